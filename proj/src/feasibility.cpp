#include "opscale/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace opscale {

namespace {

using u128 = unsigned __int128;

long bitlen(u128 v) {
  long n = 0;
  while (v != 0) {
    ++n;
    v >>= 1;
  }
  return std::max(1L, n);
}

u128 magnitude(std::int64_t v) { return static_cast<u128>(v < 0 ? -static_cast<__int128>(v) : v); }

u128 gcd128(u128 a, u128 b) {
  while (b != 0) {
    const u128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

long entry_bits(const Complex& z) {
  const Rational re = rational_reconstruction(z.real());
  const Rational im = rational_reconstruction(z.imag());
  const u128 d1 = static_cast<u128>(re.den);
  const u128 d2 = static_cast<u128>(im.den);
  const u128 den = d1 / gcd128(d1, d2) * d2;
  const u128 x = magnitude(re.num) * (den / d1);
  const u128 y = magnitude(im.num) * (den / d2);
  return bitlen(std::max(x, y)) + bitlen(den);
}

long ceil_log2(std::size_t v) {
  long n = 0;
  while ((std::size_t{1} << n) < v) ++n;
  return n;
}

std::vector<double> subset_sums(const RealVector& v) {
  std::vector<double> sums{0.0};
  for (Index i = 0; i < v.size(); ++i) {
    const std::size_t k = sums.size();
    for (std::size_t j = 0; j < k; ++j) sums.push_back(sums[j] + v[i]);
  }
  return sums;
}

}  // namespace

Rational rational_reconstruction(double x, std::int64_t max_denominator) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot reconstruct a non-finite value");
  if (max_denominator < 1) throw std::invalid_argument("max_denominator must be positive");
  const bool negative = x < 0.0;
  long double v = std::abs(static_cast<long double>(x));
  if (v >= 0x1p62L) return {static_cast<std::int64_t>(negative ? -v : v), 1};

  // Convergents h/k of the continued fraction of v.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  long double rem = v;
  for (int iter = 0; iter < 128; ++iter) {
    const long double a_ld = std::floor(rem);
    if (a_ld > 0x1p62L) break;
    const auto a = static_cast<std::int64_t>(a_ld);
    const __int128 h2 = static_cast<__int128>(a) * h1 + h0;
    const __int128 k2 = static_cast<__int128>(a) * k1 + k0;
    if (k2 > max_denominator || h2 > (__int128{1} << 62)) break;
    h0 = h1;
    h1 = static_cast<std::int64_t>(h2);
    k0 = k1;
    k1 = static_cast<std::int64_t>(k2);
    if (static_cast<double>(h1) / static_cast<double>(k1) == std::abs(x)) break;
    const long double frac = rem - a_ld;
    if (frac == 0.0L) break;
    rem = 1.0L / frac;
  }
  if (k1 == 0) return {static_cast<std::int64_t>(std::llround(negative ? -v : v)), 1};
  return {negative ? -h1 : h1, k1};
}

BitComplexity bit_complexity(const CPMap& t, const MarginalSpec& spec) {
  long total = 0;
  std::size_t r = 0;
  for (const Matrix& a : t.kraus()) {
    if (a.cwiseAbs().maxCoeff() == 0.0) continue;
    ++r;
    for (Index j = 0; j < a.cols(); ++j) {
      for (Index i = 0; i < a.rows(); ++i) total += entry_bits(a(i, j));
    }
  }
  const auto spectrum = [&](const RealVector& v) {
    const double s = v.sum();
    for (Index i = 0; i < v.size(); ++i) {
      const Rational q = rational_reconstruction(s > 0.0 ? v[i] / s : v[i]);
      total += bitlen(magnitude(q.num)) + bitlen(static_cast<u128>(q.den));
    }
  };
  spectrum(spec.p());
  spectrum(spec.q());
  total += ceil_log2(std::max<std::size_t>(r, 1)) +
           ceil_log2(static_cast<std::size_t>(t.rows())) +
           ceil_log2(static_cast<std::size_t>(t.cols()));
  return {std::max(1L, total)};
}

double certificate_epsilon(const MarginalSpec& spec) {
  const Index m = spec.m();
  const Index n = spec.n();
  if (m + n > 24) throw DimensionTooLarge("certificate_epsilon enumerates 2^(m+n) subsets; m + n must be at most 24");
  const double trace = spec.p().sum();
  const double zero = 1e-12 * std::max(1.0, trace);
  const std::vector<double> sq = subset_sums(spec.q());
  std::vector<double> sp = subset_sums(spec.p());
  std::sort(sp.begin(), sp.end());

  double best = INFINITY;
  for (double a : sq) {
    // Values |trace - a - b| for b in sp; the nonzero minimum sits next to
    // the position of trace - a.
    const double target = trace - a;
    auto it = std::lower_bound(sp.begin(), sp.end(), target - zero);
    for (auto jt = it; jt != sp.end(); ++jt) {
      const double v = std::abs(target - *jt);
      if (v > zero) {
        best = std::min(best, v);
        break;
      }
    }
    for (auto jt = it; jt != sp.begin();) {
      --jt;
      const double v = std::abs(target - *jt);
      if (v > zero) {
        best = std::min(best, v);
        break;
      }
    }
  }
  if (!std::isfinite(best)) best = trace;
  return best / (std::sqrt(static_cast<double>(m)) + std::sqrt(static_cast<double>(n)));
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kFeasible: return "FEASIBLE";
    case Decision::kInfeasible: return "INFEASIBLE";
    case Decision::kInconclusive: return "INCONCLUSIVE";
  }
  return "UNKNOWN";
}

FeasibilityVerdict decide_scalable(const CPMap& t, const MarginalSpec& spec, std::uint64_t seed,
                                   const DecisionOptions& options) {
  if (spec.trace_gap() > 1e-12 * std::max(1.0, spec.p().sum())) {
    throw std::invalid_argument("sum of p must equal sum of q");
  }
  const double scale = std::max({1.0, spec.p().maxCoeff(), spec.q().maxCoeff()});
  SolverConfig cfg;
  cfg.epsilon = std::min(0.5, certificate_epsilon(spec) / (2.0 * scale));
  cfg.max_iterations = options.max_iterations;
  cfg.seed = seed;
  cfg.mode = Mode::kGeneral;
  cfg.hard_cap = options.hard_cap;

  FeasibilityVerdict out;
  out.epsilon_used = cfg.epsilon;
  ScalingResult res = general_scale(t, spec, cfg);
  out.threshold_used = res.ds_threshold;
  switch (res.status) {
    case Status::kSuccess: out.decision = Decision::kFeasible; break;
    case Status::kErrorNotPD: out.decision = Decision::kInfeasible; break;
    default: out.decision = Decision::kInconclusive; break;
  }
  out.witness = std::move(res);
  return out;
}

}  // namespace opscale
