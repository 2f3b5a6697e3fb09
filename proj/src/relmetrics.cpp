#include "opscale/relmetrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace opscale {

namespace {

constexpr double kMinorFloor = 1e-300;
const double kLogMinorFloor = std::log(kMinorFloor);

// log|det| and the unit phase of det of the leading j x j block.
struct LogMinor {
  double log_abs;
  Complex phase;
};

LogMinor leading_minor(const Matrix& x, Index j) {
  Eigen::PartialPivLU<Matrix> lu(x.topLeftCorner(j, j));
  const Matrix& u = lu.matrixLU();
  double log_abs = 0.0;
  Complex phase = static_cast<double>(lu.permutationP().determinant());
  for (Index i = 0; i < j; ++i) {
    const double a = std::abs(u(i, i));
    if (a == 0.0) return {-std::numeric_limits<double>::infinity(), 1.0};
    log_abs += std::log(a);
    phase *= u(i, i) / a;
  }
  return {log_abs, phase};
}

double delta(const RealVector& a, Index j) {
  return j + 1 < a.size() ? a[j] - a[j + 1] : a[j];
}

void require_dims(const RealVector& a, const Matrix& x) {
  if (x.rows() != x.cols() || x.rows() != a.size()) {
    throw DimensionError("relative determinant: weight length " + std::to_string(a.size()) +
                         " does not match a " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + " matrix");
  }
}

// Sum of log|minor_j| * delta_j; -inf if a weighted minor vanishes.
double log_abs_relative_det(const RealVector& a, const Matrix& x) {
  double out = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    const double d = delta(a, j);
    if (d == 0.0) continue;
    const LogMinor mn = leading_minor(x, j + 1);
    if (!(mn.log_abs > kLogMinorFloor)) return -std::numeric_limits<double>::infinity();
    out += d * mn.log_abs;
  }
  return out;
}

bool close_log(double lhs, double rhs, double tol) {
  if (std::isinf(lhs) || std::isinf(rhs)) return lhs == rhs;
  return std::abs(lhs - rhs) <= tol * std::max(1.0, std::max(std::abs(lhs), std::abs(rhs)));
}

void require_invertible(const Matrix& x, const char* name) {
  if (inverse_condition(x) == 0.0) {
    throw NotInvertible(std::string(name) + " is singular");
  }
}

}  // namespace

void check_weights(const RealVector& a) {
  for (Index i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || a[i] < 0.0) {
      throw std::invalid_argument("weights must be finite and nonnegative");
    }
    if (i > 0 && a[i] > a[i - 1]) throw std::invalid_argument("weights must be nonincreasing");
  }
}

double log_relative_det(const RealVector& a, const Matrix& x) {
  require_dims(a, x);
  check_weights(a);
  double out = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    const double d = delta(a, j);
    if (d == 0.0) continue;
    const LogMinor mn = leading_minor(x, j + 1);
    // Minors of a PSD matrix are real and nonnegative; a nonpositive one
    // means the boundary (or roundoff past it).
    if (!(mn.log_abs > kLogMinorFloor) || mn.phase.real() <= 0.0) {
      return -std::numeric_limits<double>::infinity();
    }
    out += d * mn.log_abs;
  }
  return out;
}

double relative_det(const RealVector& a, const Matrix& x) {
  return std::exp(log_relative_det(a, x));
}

double log_relative_det(const RealVector& a, const Matrix& x, const BlockSizes& blocks) {
  require_dims(a, x);
  double out = 0.0;
  for (const auto& b : block_ranges(blocks, a.size())) {
    out += log_relative_det(a.segment(b.offset, b.size),
                            x.block(b.offset, b.offset, b.size, b.size));
  }
  return out;
}

Complex relative_det_general(const RealVector& a, const Matrix& x) {
  require_dims(a, x);
  check_weights(a);
  Complex out = 1.0;
  for (Index j = 0; j < a.size(); ++j) {
    const double d = delta(a, j);
    if (d == 0.0) continue;
    const LogMinor mn = leading_minor(x, j + 1);
    if (!std::isfinite(mn.log_abs)) return 0.0;
    out *= std::exp(Complex(d * mn.log_abs, d * std::arg(mn.phase)));
  }
  return out;
}

bool rel_det_multiplicativity_check(const RealVector& a, const Matrix& x, const Matrix& h) {
  require_dims(a, x);
  require_dims(a, h);
  check_weights(a);
  constexpr double tol = 1e-8;

  const bool oneside = close_log(log_abs_relative_det(a, x * h),
                                 log_abs_relative_det(a, x) + log_abs_relative_det(a, h), tol);

  const Matrix hh = h.adjoint() * h;
  const bool twoside = close_log(log_relative_det(a, symmetrize(h.adjoint() * x * h)),
                                 log_relative_det(a, hh) + log_relative_det(a, x), tol);

  const Matrix hinv = h.inverse();
  const bool inverse =
      close_log(log_relative_det(a, symmetrize(hinv.adjoint() * hinv)) + log_relative_det(a, hh),
                0.0, tol);

  return oneside && twoside && inverse;
}

Complex weight_character(const RealVector& a, const Matrix& g) {
  if (g.rows() != a.size() || g.cols() != a.size()) {
    throw DimensionError("weight_character: shape mismatch");
  }
  Complex out = 1.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    out *= std::pow(g(i, i), a[i]);
  }
  return out;
}

double ds_from_marginals(const Matrix& tp, const Matrix& tq, const MarginalSpec& spec) {
  if (tp.rows() != spec.m() || tp.cols() != spec.m() || tq.rows() != spec.n() ||
      tq.cols() != spec.n()) {
    throw DimensionError("ds: marginals do not match the spectra");
  }
  const auto side = [](const Matrix& x, const RealVector& a, const BlockSizes& blocks) {
    double total = 0.0;
    for (const auto& b : block_ranges(blocks, a.size())) {
      const Matrix e = x.block(b.offset, b.offset, b.size, b.size) -
                       Matrix::Identity(b.size, b.size);
      const RealVector w = a.segment(b.offset, b.size);
      double corner = 0.0;  // squared norm of the leading (i+1) x (i+1) corner
      for (Index i = 0; i < b.size; ++i) {
        corner += std::norm(e(i, i));
        for (Index k = 0; k < i; ++k) corner += std::norm(e(i, k)) + std::norm(e(k, i));
        total += delta(w, i) * corner;
      }
    }
    return total;
  };
  return side(tq, spec.p(), spec.blocks().cols) + side(tp, spec.q(), spec.blocks().rows);
}

double ds_distance(const CPMap& t, const MarginalSpec& spec) {
  const auto [tp, tq] = marginals(t, spec);
  return ds_from_marginals(tp, tq, spec);
}

double log_capacity_change_factor(const ScalingPair& s, const MarginalSpec& spec) {
  require_invertible(s.g, "g");
  require_invertible(s.h, "h");
  const double lg = log_relative_det(spec.q(), symmetrize(s.g.adjoint() * s.g), spec.blocks().rows);
  const double lh = log_relative_det(spec.p(), symmetrize(s.h.adjoint() * s.h), spec.blocks().cols);
  if (!std::isfinite(lg) || !std::isfinite(lh)) {
    throw NotInvertible("capacity change factor underflows for this pair");
  }
  return lg + lh;
}

double capacity_change_factor(const ScalingPair& s, const MarginalSpec& spec) {
  return std::exp(log_capacity_change_factor(s, spec));
}

CapacityLowerBound capacity_lower_bound(double b, Index m) {
  if (!(b >= 1.0)) throw std::invalid_argument("bit complexity must be at least 1");
  if (m < 1) throw std::invalid_argument("m must be positive");
  const double li = -10.0 * b;
  const double la = -14.0 * b * static_cast<double>(m);
  return {std::exp(li), std::exp(la), li, la};
}

double shannon_entropy(const RealVector& p) {
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0) throw std::invalid_argument("entropy of a negative weight");
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

}  // namespace opscale
