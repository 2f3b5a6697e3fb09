#include "opscale/scaler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "alternating.hpp"
#include "opscale/feasibility.hpp"

namespace opscale {

namespace {

void check_instance(const CPMap& t, const MarginalSpec& spec) {
  if (spec.n() != t.cols() || spec.m() != t.rows()) {
    throw DimensionError("marginal spectra do not match the map's shape");
  }
  const double total = spec.p().sum();
  if (!(total > 0.0) || spec.q().sum() <= 0.0) throw AllZeroSpectrum("p and q must not vanish");
  if (spec.trace_gap() > 1e-12 * std::max(1.0, total)) {
    throw std::invalid_argument("sum of p must equal sum of q");
  }
  const auto& bl = spec.blocks();
  if ((!bl.rows.empty() || !bl.cols.empty()) && !is_block_diagonal(t, bl)) {
    throw std::invalid_argument("map is not block diagonal for the given block structure");
  }
}

long resolve_budget(const CPMap& t, const MarginalSpec& spec, const MarginalSpec& unit,
                    const SolverConfig& cfg, Mode mode) {
  if (cfg.hard_cap <= 0) throw std::invalid_argument("hard_cap must be positive");
  if (cfg.max_iterations) {
    if (*cfg.max_iterations < 0) throw std::invalid_argument("max_iterations must be nonnegative");
    return std::min(*cfg.max_iterations, cfg.hard_cap);
  }
  const double b = static_cast<double>(bit_complexity(t, spec).b);
  return iteration_budget(b, spec.m(), cfg.epsilon, unit.p_min(), unit.q_min(), mode,
                          cfg.hard_cap);
}

// Smallest eigenvalue of T_{g,h}(P) relative to its mean, with g and h
// rescaled to unit size. Tends to zero as the pair runs off to infinity.
double normalized_min_eigenvalue(const CPMap& t, const MarginalSpec& spec, const ScalingPair& s) {
  const auto unit = [](const Matrix& x) -> Matrix {
    const double n = x.cwiseAbs().maxCoeff();
    return x.allFinite() && n > 0.0 ? Matrix(x / n) : Matrix::Identity(x.rows(), x.cols());
  };
  const Matrix tp = symmetrize(opscale::apply(scale(t, {unit(s.g), unit(s.h)}), spec.P()));
  const double mean = tp.trace().real() / static_cast<double>(tp.rows());
  if (!(mean > 0.0)) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(tp, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().minCoeff() / mean);
}

// Alternating scaling on a nonsingular instance. Works with unit-trace
// spectra and reports in the caller's units.
ScalingResult run_core(const CPMap& t, const MarginalSpec& spec, double epsilon, long budget,
                       double log_lower_bound) {
  const double c = spec.p().sum();
  const MarginalSpec unit = spec.scaled(1.0 / c);
  const double threshold = epsilon * epsilon * std::min(unit.p_min(), unit.q_min());

  ScalingResult res;
  res.normalization = c;
  res.budget = budget;
  res.ds_threshold = c * threshold;
  res.capacity_trace.lower_bound = log_lower_bound;

  detail::Alternating it(t, unit);
  res.initial_ds = c * it.ds();
  bool done = it.ds() <= threshold;
  if (done) res.status = Status::kSuccess;

  while (!done && it.steps() < budget) {
    detail::StepRecord rec{};
    try {
      rec = it.step();
    } catch (const NotPositiveDefinite& e) {
      res.status = Status::kErrorNotPD;
      res.min_eigenvalue = e.min_eigenvalue();
      break;
    }
    res.capacity_trace.append(rec.log_factor, rec.log_upper);
    res.ds_trace.push_back(c * rec.ds);
    if (it.diverged()) {
      res.status = Status::kErrorNotPD;
      res.min_eigenvalue = normalized_min_eigenvalue(t, unit, it.pair());
      break;
    }
    if (rec.ds <= threshold) {
      // Confirm against the original operators before declaring success.
      const double check = ds_distance(scale(t, it.pair()), unit);
      if (check <= threshold) {
        res.status = Status::kSuccess;
        done = true;
      } else {
        it.resync(t);
      }
    }
  }
  if (!done && res.status != Status::kErrorNotPD) res.status = Status::kErrorBudget;

  res.iterations = it.steps();
  res.final_ds = res.ds_trace.empty() ? res.initial_ds : res.ds_trace.back();
  const double back = std::pow(c, -0.25);
  ScalingPair pair = it.pair();
  res.pair = {pair.g * back, pair.h * back};
  res.form = PairForm::kToIdentity;
  return res;
}

Matrix random_block_matrix(Index dim, const BlockSizes& blocks, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix out = Matrix::Zero(dim, dim);
  for (const auto& b : block_ranges(blocks, dim)) {
    for (Index j = 0; j < b.size; ++j) {
      for (Index i = 0; i < b.size; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        out(b.offset + i, b.offset + j) = Complex(re, im);
      }
    }
  }
  return out;
}

// Restriction of block sizes to the kept indices.
BlockSizes restrict_blocks(const BlockSizes& blocks, Index dim, const RealVector& v,
                           std::vector<Index>& kept) {
  BlockSizes out;
  for (const auto& b : block_ranges(blocks, dim)) {
    Index count = 0;
    for (Index i = b.offset; i < b.offset + b.size; ++i) {
      if (v[i] > 0.0) {
        kept.push_back(i);
        ++count;
      }
    }
    if (count > 0) out.push_back(count);
  }
  if (blocks.empty()) out.clear();
  return out;
}

double marginal_error(const CPMap& t, const MarginalSpec& spec) {
  // Errors of the (I_n -> Q, I_m -> P) problem.
  const Matrix a = opscale::apply(t, Matrix::Identity(t.cols(), t.cols())) - spec.Q();
  const Matrix b = dual_apply(t, Matrix::Identity(t.rows(), t.rows())) - spec.P();
  return std::max(a.norm(), b.norm());
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::kSuccess: return "SUCCESS";
    case Status::kErrorNotPD: return "ERROR_NOT_PD";
    case Status::kErrorBudget: return "ERROR_BUDGET";
    case Status::kErrorSingularInit: return "ERROR_SINGULAR_INIT";
  }
  return "UNKNOWN";
}

std::string_view to_string(Mode m) {
  return m == Mode::kTriangular ? "TRIANGULAR" : "GENERAL";
}

ScalingPair to_from_identity_form(const ScalingPair& s, const MarginalSpec& spec) {
  const Matrix qh = spec.q().cwiseSqrt().cast<Complex>().asDiagonal();
  const Matrix ph = spec.p().cwiseSqrt().cast<Complex>().asDiagonal();
  return {s.g * qh, s.h * ph};
}

SupportProjection project_to_support(const CPMap& t, const MarginalSpec& spec) {
  if (spec.n() != t.cols() || spec.m() != t.rows()) {
    throw DimensionError("marginal spectra do not match the map's shape");
  }
  std::vector<Index> rows;
  std::vector<Index> cols;
  BlockStructure blocks{restrict_blocks(spec.blocks().rows, spec.m(), spec.q(), rows),
                        restrict_blocks(spec.blocks().cols, spec.n(), spec.p(), cols)};
  if (rows.empty() || cols.empty()) throw AllZeroSpectrum("p or q is identically zero");

  const bool identity = static_cast<Index>(rows.size()) == spec.m() &&
                        static_cast<Index>(cols.size()) == spec.n();
  if (identity) {
    return {t, spec, std::move(rows), std::move(cols), spec.m(), spec.n(), true};
  }

  const auto nr = static_cast<Index>(rows.size());
  const auto nc = static_cast<Index>(cols.size());
  std::vector<Matrix> kraus;
  kraus.reserve(t.size());
  for (const Matrix& a : t.kraus()) kraus.push_back(a(rows, cols));
  RealVector p(nc);
  RealVector q(nr);
  for (Index j = 0; j < nc; ++j) p[j] = spec.p()[cols[static_cast<std::size_t>(j)]];
  for (Index i = 0; i < nr; ++i) q[i] = spec.q()[rows[static_cast<std::size_t>(i)]];
  return {CPMap(std::move(kraus)), MarginalSpec(std::move(p), std::move(q), std::move(blocks)),
          std::move(rows), std::move(cols), spec.m(), spec.n(), false};
}

ScalingPair lift_scaling(const SupportProjection& proj, const ScalingPair& restricted,
                         double delta) {
  if (restricted.g.rows() != static_cast<Index>(proj.kept_rows.size()) ||
      restricted.h.rows() != static_cast<Index>(proj.kept_cols.size())) {
    throw DimensionError("lift_scaling: pair does not match the projection");
  }
  ScalingPair out{Matrix::Identity(proj.m, proj.m) * delta,
                  Matrix::Identity(proj.n, proj.n) * delta};
  out.g(proj.kept_rows, proj.kept_rows) = restricted.g;
  out.h(proj.kept_cols, proj.kept_cols) = restricted.h;
  return out;
}

ScalingResult triangular_scale(const CPMap& t, const MarginalSpec& spec, const SolverConfig& cfg) {
  check_instance(t, spec);
  if (!spec.nonsingular()) {
    throw std::invalid_argument("triangular_scale needs positive spectra; project to the support first");
  }
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const MarginalSpec unit = spec.scaled(1.0 / spec.p().sum());
  const long budget = resolve_budget(t, spec, unit, cfg, Mode::kTriangular);
  const double b = static_cast<double>(bit_complexity(t, spec).b);
  return run_core(t, spec, cfg.epsilon, budget, capacity_lower_bound(b, spec.m()).log_initial);
}

ScalingResult general_scale(const CPMap& t, const MarginalSpec& spec, const SolverConfig& cfg) {
  check_instance(t, spec);
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  const double b = static_cast<double>(bit_complexity(t, spec).b);
  std::mt19937_64 rng(cfg.seed);
  for (int attempt = 0; attempt < 3; ++attempt) {
    const Matrix g0 = random_block_matrix(spec.m(), spec.blocks().rows, rng);
    const Matrix h0 = random_block_matrix(spec.n(), spec.blocks().cols, rng);
    if (inverse_condition(g0) < 1e-12 || inverse_condition(h0) < 1e-12) continue;

    const CPMap t0 = scale(t, {g0, h0});
    const SupportProjection proj = project_to_support(t0, spec);
    const MarginalSpec unit = proj.spec.scaled(1.0 / proj.spec.p().sum());
    const long budget = resolve_budget(t, spec, unit, cfg, Mode::kGeneral);
    ScalingResult res =
        run_core(proj.map, proj.spec, cfg.epsilon, budget, capacity_lower_bound(b, spec.m()).log_initial);

    if (proj.identity) {
      res.pair = {g0 * res.pair.g, h0 * res.pair.h};
      return res;
    }

    // Lift the restricted solution, shrinking delta until the full
    // marginal errors are within twice the restricted ones.
    const ScalingPair inner = to_from_identity_form(res.pair, proj.spec);
    const double restricted_error = marginal_error(scale(proj.map, inner), proj.spec);
    ScalingPair lifted = lift_scaling(proj, inner, 1.0);
    for (double delta = 1.0; delta >= 1e-12; delta *= 0.1) {
      lifted = lift_scaling(proj, inner, delta);
      if (marginal_error(scale(t0, lifted), spec) <= 2.0 * restricted_error + 1e-14) break;
    }
    res.pair = {g0 * lifted.g, h0 * lifted.h};
    res.form = PairForm::kFromIdentity;
    return res;
  }

  ScalingResult res;
  res.status = Status::kErrorSingularInit;
  res.pair = ScalingPair::identity(spec.m(), spec.n());
  res.normalization = spec.p().sum();
  return res;
}

ScalingResult solve(const CPMap& t, const MarginalSpec& spec, const SolverConfig& cfg) {
  return cfg.mode == Mode::kTriangular ? triangular_scale(t, spec, cfg)
                                       : general_scale(t, spec, cfg);
}

long iteration_budget(double b, Index m, double epsilon, double p_min, double q_min, Mode mode,
                      long hard_cap) {
  if (!(b > 0.0) || m <= 0 || !(epsilon > 0.0) || !(p_min > 0.0) || !(q_min > 0.0)) {
    throw std::invalid_argument("iteration_budget: arguments must be positive");
  }
  if (!(epsilon < 1.0)) throw std::invalid_argument("iteration_budget: epsilon must be below 1");
  const double bm = b * static_cast<double>(m);
  const double raw =
      mode == Mode::kTriangular
          ? 100.0 * bm / (std::min(epsilon, p_min) + std::min(epsilon, q_min))
          : 400.0 * bm / (std::min(q_min, p_min) * epsilon * epsilon);
  const double iters = std::ceil(raw * (1.0 - 1e-12));
  if (!(iters < static_cast<double>(hard_cap))) return hard_cap;
  return static_cast<long>(iters);
}

long iteration_budget_from_capacity(double log_cap_first_step, double epsilon, double p_min,
                                    double q_min, long hard_cap) {
  if (!(epsilon > 0.0) || !(p_min > 0.0) || !(q_min > 0.0)) {
    throw std::invalid_argument("iteration_budget_from_capacity: arguments must be positive");
  }
  if (log_cap_first_step > 0.0) {
    throw std::invalid_argument("capacity after the first step is at most 1");
  }
  const double raw =
      -7.0 * log_cap_first_step / (std::min(epsilon, p_min) + std::min(epsilon, q_min));
  const double iters = std::ceil(raw * (1.0 - 1e-12));
  if (!(iters < static_cast<double>(hard_cap))) return hard_cap;
  return std::max(0L, static_cast<long>(iters));
}

}  // namespace opscale
