#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "opscale/apps.hpp"
#include "opscale/relmetrics.hpp"
#include "opscale/scaler.hpp"
#include "support.hpp"

using namespace opscale;
using testing::Rng;

namespace {

RealVector vec(std::initializer_list<double> d) {
  RealVector v(static_cast<Index>(d.size()));
  Index i = 0;
  for (double x : d) v[i++] = x;
  return v;
}

// Alternating row/column normalization of a nonnegative matrix.
Eigen::MatrixXd sinkhorn(Eigen::MatrixXd a, const RealVector& r, const RealVector& c, int iters) {
  for (int k = 0; k < iters; ++k) {
    a = (r.array() / a.rowwise().sum().array()).matrix().asDiagonal() * a;
    a = a * (c.array() / a.colwise().sum().transpose().array()).matrix().asDiagonal();
  }
  return a;
}

double marginal_error_to_identity(const CPMap& t, const MarginalSpec& spec) {
  const auto [tp, tq] = marginals(t, spec);
  return std::max((tp - Matrix::Identity(tp.rows(), tp.cols())).norm(),
                  (tq - Matrix::Identity(tq.rows(), tq.cols())).norm());
}

double marginal_error_from_identity(const CPMap& t, const MarginalSpec& spec) {
  const Matrix ti = opscale::apply(t, Matrix::Identity(t.cols(), t.cols()));
  const Matrix tsi = dual_apply(t, Matrix::Identity(t.rows(), t.rows()));
  return std::max((ti - spec.Q()).norm(), (tsi - spec.P()).norm());
}

}  // namespace

TEST_CASE("triangular_scale on an already balanced map") {
  const RealVector p = vec({0.5, 0.3, 0.2});
  const Matrix a = p.cwiseSqrt().cwiseInverse().cast<Complex>().asDiagonal();
  const CPMap t({a});
  const ScalingResult r = triangular_scale(t, MarginalSpec(p, p), SolverConfig{});
  CHECK(r.success());
  CHECK(r.iterations == 0);
  CHECK(r.pair.g == Matrix::Identity(3, 3));
  CHECK(r.pair.h == Matrix::Identity(3, 3));
}

TEST_CASE("triangular_scale on a triangular support matches Sinkhorn") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 1, 0, 1;
  const CPMap t = build_matrix_cpmap(a);
  const MarginalSpec spec(RealVector::Ones(2), RealVector::Ones(2));
  SolverConfig cfg;
  cfg.epsilon = 1e-2;
  const ScalingResult r = triangular_scale(t, spec, cfg);
  REQUIRE(r.success());
  CHECK(r.final_ds <= r.ds_threshold);
  CHECK(ds_distance(scale(t, r.pair), spec) <= r.ds_threshold * (1 + 1e-9));
  CHECK(testing::is_upper(r.pair.g));
  CHECK(testing::is_upper(r.pair.h));

  // Off-diagonal mass decays slowly: the scaled (0, 1) entry tends to zero in
  // both the operator iteration and classical Sinkhorn.
  const Eigen::MatrixXd s = sinkhorn(a, RealVector::Ones(2), RealVector::Ones(2), r.iterations / 2 + 1);
  const CPMap scaled = scale(t, r.pair);
  const Matrix tp = opscale::apply(scaled, Matrix::Identity(2, 2));
  CHECK(std::abs(tp(0, 0).real() - 1.0) < cfg.epsilon);
  CHECK(s(0, 1) < 0.1);
  // Column multipliers drift apart: y_2 / y_1 tends to zero.
  CHECK(std::abs(r.pair.h(1, 1) / r.pair.h(0, 0)) < 0.2);
}

TEST_CASE("common kernel gives ERROR_NOT_PD within two iterations") {
  Rng rng(31);
  std::vector<Matrix> kraus;
  for (int i = 0; i < 3; ++i) {
    Matrix a = testing::random_complex(rng, 3, 3);
    a.col(2).setZero();
    kraus.push_back(a);
  }
  const RealVector u = RealVector::Constant(3, 1.0 / 3.0);
  const ScalingResult r = triangular_scale(CPMap(kraus), MarginalSpec(u, u), SolverConfig{});
  CHECK(r.status == Status::kErrorNotPD);
  CHECK(r.iterations <= 2);
  REQUIRE(r.min_eigenvalue.has_value());
  CHECK(*r.min_eigenvalue < 1e-10);
}

TEST_CASE("a diverging pair stops with ERROR_NOT_PD") {
  // One invertible Kraus operator forces p and q to have equal spectra.
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.0, 1.0;
  RealVector p(2), q(2);
  p << 0.6, 0.4;
  q << 0.5, 0.5;
  for (const Mode mode : {Mode::kTriangular, Mode::kGeneral}) {
    SolverConfig cfg;
    cfg.mode = mode;
    const ScalingResult r = solve(CPMap({a}), MarginalSpec(p, q), cfg);
    CHECK(r.status == Status::kErrorNotPD);
    CHECK(r.iterations < r.budget);
    CHECK(r.pair.g.allFinite());
    CHECK(r.pair.h.allFinite());
    REQUIRE(r.min_eigenvalue.has_value());
    CHECK(*r.min_eigenvalue < 1e-10);
  }
}

TEST_CASE("general_scale on a doubly stochastic map succeeds for any seed") {
  const CPMap t({Matrix::Identity(3, 3) / std::sqrt(3.0)});
  const RealVector u = RealVector::Constant(3, 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverConfig cfg;
    cfg.seed = seed;
    const ScalingResult r = general_scale(t, MarginalSpec(u, u), cfg);
    CHECK(r.success());
    CHECK(marginal_error_to_identity(scale(t, r.pair), MarginalSpec(u, u)) <= cfg.epsilon);
  }
}

TEST_CASE("general_scale on random feasible instances") {
  Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const Index m = testing::uniform_int(rng, 1, 4), n = testing::uniform_int(rng, 1, 4);
    const CPMap t = testing::random_map(rng, m, n, 4);
    const double total = testing::uniform(rng, 0.5, 5.0);
    const MarginalSpec spec(testing::random_spectrum(rng, n, 0.05, total),
                            testing::random_spectrum(rng, m, 0.05, total));
    SolverConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const ScalingResult r = general_scale(t, spec, cfg);
    INFO("trial ", trial, " status ", to_string(r.status), " iterations ", r.iterations, " ds ", r.final_ds);
    REQUIRE(r.success());
    CHECK(r.form == PairForm::kToIdentity);
    CHECK(r.final_ds <= r.ds_threshold);
    CHECK(marginal_error_to_identity(scale(t, r.pair), spec) <= cfg.epsilon);

    const ScalingPair from = to_from_identity_form(r.pair, spec);
    CHECK(marginal_error_from_identity(scale(t, from), spec) <= cfg.epsilon * std::max(1.0, total));
  }
}

TEST_CASE("trace mismatch is rejected") {
  const CPMap t({Matrix::Identity(2, 2)});
  const MarginalSpec spec(vec({0.6, 0.4}), vec({0.6, 0.5}));
  CHECK_THROWS_AS(general_scale(t, spec, SolverConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(triangular_scale(t, spec, SolverConfig{}), std::invalid_argument);
}

TEST_CASE("project_to_support") {
  Rng rng(33);

  SUBCASE("positive spectra are left alone") {
    const CPMap t = testing::random_map(rng, 2, 3, 2);
    const SupportProjection proj =
        project_to_support(t, MarginalSpec(vec({0.5, 0.3, 0.2}), vec({0.7, 0.3})));
    CHECK(proj.identity);
    CHECK(proj.map.rows() == 2);
    CHECK(proj.map.cols() == 3);
  }

  SUBCASE("p = q = (1, 0) keeps the top-left entry") {
    const CPMap t = testing::random_map(rng, 2, 2, 3);
    const SupportProjection proj = project_to_support(t, MarginalSpec(vec({1, 0}), vec({1, 0})));
    CHECK_FALSE(proj.identity);
    REQUIRE(proj.map.rows() == 1);
    REQUIRE(proj.map.cols() == 1);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(proj.map[i](0, 0) == t[i](0, 0));
  }

  SUBCASE("all-zero spectrum") {
    const CPMap t = testing::random_map(rng, 2, 2, 1);
    CHECK_THROWS_AS(project_to_support(t, MarginalSpec(vec({0, 0}), vec({0, 0}))), AllZeroSpectrum);
  }

  SUBCASE("lifting keeps the error within twice the restricted error") {
    for (int trial = 0; trial < 10; ++trial) {
      const CPMap t = testing::random_map(rng, 3, 3, 3);
      RealVector p = testing::random_spectrum(rng, 3, 0.1, 1.0);
      RealVector q = testing::random_spectrum(rng, 3, 0.1, 1.0);
      p[2] = 0.0;
      q[2] = 0.0;
      q *= p.sum() / q.sum();
      const MarginalSpec spec(p, q);
      const SupportProjection proj = project_to_support(t, spec);
      SolverConfig cfg;
      cfg.epsilon = 1e-4;
      const ScalingResult r = general_scale(proj.map, proj.spec, cfg);
      REQUIRE(r.success());
      const ScalingPair restricted = to_from_identity_form(r.pair, proj.spec);
      const double inner = marginal_error_from_identity(scale(proj.map, restricted), proj.spec);
      const ScalingPair lifted = lift_scaling(proj, restricted, 1e-7);
      const double outer = marginal_error_from_identity(scale(t, lifted), spec);
      CHECK(outer <= 2.0 * inner + 1e-6);
    }
  }
}

TEST_CASE("general_scale with singular spectra returns the from-identity form") {
  Rng rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    const CPMap t = testing::random_map(rng, 3, 3, 2);
    const MarginalSpec spec(vec({0.6, 0.4, 0.0}), vec({0.5, 0.3, 0.2}));
    SolverConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const ScalingResult r = general_scale(t, spec, cfg);
    REQUIRE(r.success());
    CHECK(r.form == PairForm::kFromIdentity);
    CHECK(marginal_error_from_identity(scale(t, r.pair), spec) <= 2.0 * cfg.epsilon);
  }
}

TEST_CASE("budget exhaustion") {
  Rng rng(35);
  const CPMap t = testing::random_map(rng, 3, 3, 2);
  const MarginalSpec spec(vec({0.5, 0.3, 0.2}), vec({0.4, 0.4, 0.2}));
  SolverConfig cfg;
  cfg.epsilon = 1e-9;
  cfg.max_iterations = 3;
  const ScalingResult r = general_scale(t, spec, cfg);
  CHECK(r.status == Status::kErrorBudget);
  CHECK(r.iterations == 3);
  CHECK(r.ds_trace.size() == 3);
  CHECK(r.capacity_trace.log_factors.size() == 3);
}

TEST_CASE("determinism") {
  Rng rng(36);
  const CPMap t = testing::random_map(rng, 3, 2, 2);
  const MarginalSpec spec(vec({0.7, 0.3}), vec({0.5, 0.3, 0.2}));
  SolverConfig cfg;
  cfg.seed = 99;
  const ScalingResult a = general_scale(t, spec, cfg);
  const ScalingResult b = general_scale(t, spec, cfg);
  CHECK(a.status == b.status);
  CHECK(a.iterations == b.iterations);
  CHECK(a.ds_trace == b.ds_trace);
  CHECK(a.pair.g == b.pair.g);
  CHECK(a.pair.h == b.pair.h);
}

TEST_CASE("block structure is preserved by every iterate") {
  Rng rng(37);
  const BlockSizes rows{2, 2}, cols{1, 2};
  std::vector<Matrix> kraus;
  for (int rb = 0; rb < 2; ++rb) {
    for (int cb = 0; cb < 2; ++cb) {
      Matrix a = Matrix::Zero(4, 3);
      const Index c0 = cb == 0 ? 0 : 1, cs = cb == 0 ? 1 : 2;
      a.block(2 * rb, c0, 2, cs) = testing::random_complex(rng, 2, cs);
      kraus.push_back(a);
    }
  }
  const CPMap t(kraus);
  const MarginalSpec spec(vec({2.0, 1.2, 0.8}), vec({1.5, 1.0, 1.0, 0.5}), {rows, cols});
  SolverConfig cfg;
  cfg.mode = Mode::kTriangular;
  const ScalingResult r = solve(t, spec, cfg);
  REQUIRE(r.success());
  CHECK(r.pair.g.block(0, 2, 2, 2).norm() == 0.0);
  CHECK(r.pair.g.block(2, 0, 2, 2).norm() == 0.0);
  CHECK(r.pair.h.block(0, 1, 1, 2).norm() == 0.0);
  CHECK(r.pair.h.block(1, 0, 2, 1).norm() == 0.0);
  CHECK(testing::is_upper(r.pair.g));
  CHECK(testing::is_upper(r.pair.h));

  cfg.mode = Mode::kGeneral;
  const ScalingResult rg = solve(t, spec, cfg);
  REQUIRE(rg.success());
  CHECK(rg.pair.g.block(0, 2, 2, 2).norm() == 0.0);
  CHECK(rg.pair.h.block(1, 0, 2, 1).norm() == 0.0);
  CHECK(is_block_diagonal(scale(t, rg.pair), {rows, cols}));
}

TEST_CASE("progress and upper bound along the trace") {
  Rng rng(38);
  for (int trial = 0; trial < 10; ++trial) {
    const Index m = testing::uniform_int(rng, 2, 4), n = testing::uniform_int(rng, 2, 4);
    const CPMap t = testing::random_map(rng, m, n, 2);
    const MarginalSpec spec(testing::random_spectrum(rng, n, 0.1, 1.0), testing::random_spectrum(rng, m, 0.1, 1.0));
    SolverConfig cfg;
    cfg.epsilon = 1e-3;
    cfg.mode = Mode::kTriangular;
    const ScalingResult r = solve(t, spec, cfg);
    REQUIRE(r.success());
    const CapacityTrace& ct = r.capacity_trace;
    double before = r.initial_ds;
    double cumulative = 0.0;
    for (std::size_t j = 0; j < ct.log_factors.size(); ++j) {
      const bool even = (j + 1) % 2 == 0;
      const double floor = even ? spec.p_min() : spec.q_min();
      // The very first step only balances one side; progress is claimed from then on.
      if (j > 0 && before >= cfg.epsilon) CHECK(ct.log_factors[j] >= 0.3 * std::min(cfg.epsilon, floor) - 1e-9);
      cumulative += ct.log_factors[j];
      CHECK(ct.log_upper[j] <= 1e-9);
      before = r.ds_trace[j];
    }
    CHECK(std::abs(cumulative - ct.cumulative) < 1e-12);
  }
}

TEST_CASE("iteration_budget") {
  CHECK(iteration_budget(10, 3, 0.1, 0.2, 0.2, Mode::kTriangular) == 15000);
  CHECK(iteration_budget(10, 3, 0.1, 0.2, 0.2, Mode::kGeneral) == kHardCap);
  CHECK(iteration_budget(10, 3, 0.1, 0.2, 0.2, Mode::kGeneral, 10'000'000) == 6'000'000);
  CHECK(iteration_budget(1, 1, 0.5, 0.5, 0.5, Mode::kTriangular) == 100);
  CHECK_THROWS(iteration_budget(10, 3, 1.0, 0.2, 0.2, Mode::kTriangular));
  CHECK_THROWS(iteration_budget(0, 3, 0.1, 0.2, 0.2, Mode::kTriangular));

  // -7 log cap / (min(eps, p) + min(eps, q)) with log cap = -14 b m.
  CHECK(iteration_budget_from_capacity(-14.0 * 10 * 3, 0.1, 0.2, 0.2) == 14700);
  CHECK(iteration_budget_from_capacity(-1.0, 0.5, 0.25, 0.25) == 14);
  CHECK_THROWS(iteration_budget_from_capacity(0.5, 0.1, 0.2, 0.2));
}

TEST_CASE("auto budget comes from the bit complexity") {
  const CPMap t({Matrix::Identity(2, 2)});
  const MarginalSpec spec(vec({0.5, 0.5}), vec({0.5, 0.5}));
  SolverConfig cfg;
  cfg.mode = Mode::kTriangular;
  const ScalingResult r = solve(t, spec, cfg);
  CHECK(r.budget > 0);
  CHECK(r.budget <= kHardCap);
  cfg.hard_cap = 7;
  CHECK(solve(t, spec, cfg).budget <= 7);
}
