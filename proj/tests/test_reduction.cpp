#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "opscale/reduction.hpp"
#include "opscale/relmetrics.hpp"
#include "support.hpp"

using namespace opscale;
using testing::Rng;

namespace {

Partition random_partition(Rng& rng, long max_total) {
  std::vector<long> parts;
  long remaining = testing::uniform_int(rng, 1, max_total);
  long cap = remaining;
  while (remaining > 0) {
    const long part = testing::uniform_int(rng, 1, std::min(cap, remaining));
    parts.push_back(part);
    remaining -= part;
    cap = part;
  }
  return Partition(parts);
}

// Integral spectra with a common total N <= 8.
std::pair<Partition, Partition> random_integral_pair(Rng& rng, Index n, Index m, long max_part) {
  for (;;) {
    std::vector<long> p(static_cast<std::size_t>(n));
    for (long& x : p) x = testing::uniform_int(rng, 1, max_part);
    std::sort(p.begin(), p.end(), std::greater<>());
    long total = 0;
    for (long x : p) total += x;
    if (total < m || total > 8) continue;
    std::vector<long> q(static_cast<std::size_t>(m), 1);
    for (long extra = total - m; extra > 0; --extra) ++q[static_cast<std::size_t>(testing::uniform_int(rng, 0, m - 1))];
    std::sort(q.begin(), q.end(), std::greater<>());
    return {Partition(p), Partition(q)};
  }
}

}  // namespace

TEST_CASE("Partition") {
  CHECK(Partition({3, 1}).total() == 4);
  CHECK_THROWS(Partition({1, 2}));
  CHECK_THROWS(Partition({2, 0}));
  CHECK_THROWS(Partition(std::vector<long>{}));
}

TEST_CASE("conjugate_partition") {
  CHECK(conjugate_partition(Partition({3, 1})) == Partition({2, 1, 1}));
  CHECK(conjugate_partition(Partition({1, 1, 1, 1})) == Partition({4}));
  CHECK(conjugate_partition(Partition({2, 2, 1})) == Partition({3, 2}));

  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Partition lambda = random_partition(rng, 15);
    CHECK(lambda.conjugate().conjugate() == lambda);
    CHECK(lambda.conjugate().total() == lambda.total());
  }
}

TEST_CASE("gadget worked example for (2, 2, 1)") {
  Matrix x(3, 3);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) x(i, j) = Complex(10.0 * (i + 1) + (j + 1), static_cast<double>(i - j));
  }
  const Matrix g = gadget_apply(Partition({2, 2, 1}), x);
  REQUIRE(g.rows() == 5);
  REQUIRE(g.cols() == 5);
  Matrix expected = Matrix::Zero(5, 5);
  expected.block(0, 0, 3, 3) = x;
  expected.block(3, 3, 2, 2) = x.block(0, 0, 2, 2);
  CHECK(g == expected);
}

TEST_CASE("gadget of a single row repeats the corner entry") {
  const Matrix x = Matrix::Constant(1, 1, Complex(2.5, -1.0));
  const Matrix g = gadget_apply(Partition({4}), x);
  CHECK(g == Matrix::Identity(4, 4) * Complex(2.5, -1.0));
}

TEST_CASE("gadget marginal identities hold exactly") {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const Partition lambda = random_partition(rng, 12);
    const Index k = lambda.size();
    const Index l = lambda.total();
    CHECK(gadget_apply(lambda, Matrix::Identity(k, k)) == Matrix::Identity(l, l));
    CHECK(gadget_dual_apply(lambda, Matrix::Identity(l, l)) ==
          Matrix(lambda.as_vector().cast<Complex>().asDiagonal()));
  }
  CHECK(gadget_dual_apply(Partition({1}), Matrix::Constant(1, 1, 3.0)) == Matrix::Constant(1, 1, 3.0));
  CHECK_THROWS_AS(gadget_apply(Partition({2, 1}), Matrix::Identity(3, 3)), DimensionError);
}

TEST_CASE("gadget adjointness, homomorphism and determinant") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Partition lambda = random_partition(rng, 12);
    const Index k = lambda.size();
    const Index l = lambda.total();

    const Matrix x = testing::random_complex(rng, k, k);
    const Matrix y = testing::random_complex(rng, l, l);
    const Complex lhs = (gadget_apply(lambda, x) * y).trace();
    const Complex rhs = (x * gadget_dual_apply(lambda, y)).trace();
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));

    const Matrix h = testing::random_upper(rng, k);
    const Matrix gxh = gadget_apply(lambda, x * h);
    const Matrix prod = gadget_apply(lambda, x) * gadget_apply(lambda, h);
    CHECK((gxh - prod).norm() <= 1e-10 * std::max(1.0, prod.norm()));

    const Matrix h2 = testing::random_upper(rng, k);
    const Matrix hh = gadget_apply(lambda, h * h2);
    CHECK((hh - gadget_apply(lambda, h) * gadget_apply(lambda, h2)).norm() <= 1e-10 * std::max(1.0, hh.norm()));

    const Matrix pd = testing::random_pd(rng, k);
    const double logdet = std::log(gadget_apply(lambda, pd).determinant().real());
    CHECK(testing::rel_diff(logdet, log_relative_det(lambda.as_vector(), pd)) < 1e-8);
  }
}

TEST_CASE("integral_spectra") {
  RealVector p(3), q(2);
  p << 0.5, 0.25, 0.25;
  q << 0.75, 0.25;
  const IntegralSpectra s = integral_spectra(MarginalSpec(p, q));
  CHECK(s.denominator == 4);
  CHECK(s.p == Partition({2, 1, 1}));
  CHECK(s.q == Partition({3, 1}));

  RealVector irr(2);
  irr << 1.0 - 1.0 / M_PI, 1.0 / M_PI;
  CHECK_THROWS_AS(integral_spectra(MarginalSpec(irr, irr)), NonIntegralSpectrum);
}

TEST_CASE("build_truncation") {
  SUBCASE("unit spectra return T") {
    Rng rng(24);
    const CPMap t = testing::random_map(rng, 3, 3, 2);
    const CPMap trun = build_truncation(t, MarginalSpec(RealVector::Ones(3), RealVector::Ones(3)));
    const Matrix x = testing::random_hermitian(rng, 3);
    CHECK((opscale::apply(trun, x) - opscale::apply(t, x)).norm() < 1e-12);
  }

  SUBCASE("identity map with p = q = (2, 1)") {
    RealVector p(2);
    p << 2, 1;
    const CPMap t({Matrix::Identity(2, 2)});
    const MarginalSpec spec(p, p);
    const CPMap trun = build_truncation(t, spec);
    CHECK(trun.rows() == 3);
    CHECK(trun.cols() == 3);
    // r q_1 p_1 Kraus operators.
    CHECK(trun.size() == 4);
    const Partition lam({2, 1});
    const Matrix expected = gadget_apply(lam, opscale::apply(t, spec.P()));
    CHECK((opscale::apply(trun, Matrix::Identity(3, 3)) - expected).norm() < 1e-12);
    CHECK((dual_apply(trun, Matrix::Identity(3, 3)) - gadget_apply(lam, dual_apply(t, spec.Q()))).norm() <
          1e-12);
  }

  SUBCASE("non-integral spectra are rejected") {
    RealVector p(2);
    p << 1.5, 0.5;
    CHECK_THROWS_AS(build_truncation(CPMap({Matrix::Identity(2, 2)}), MarginalSpec(p, p)),
                    NonIntegralSpectrum);
  }

  SUBCASE("lazy and materialized forms agree") {
    Rng rng(25);
    for (int trial = 0; trial < 10; ++trial) {
      const auto [p, q] = random_integral_pair(rng, 3, 2, 4);
      const CPMap t = testing::random_map(rng, q.size(), p.size(), 2);
      const TruncatedMap lazy(t, p, q);
      const CPMap dense = lazy.materialize();
      const Index nn = p.total();
      const Matrix x = testing::random_hermitian(rng, nn);
      CHECK((lazy.apply(x) - opscale::apply(dense, x)).norm() < 1e-10 * std::max(1.0, x.norm()));
      CHECK((lazy.dual_apply(x) - dual_apply(dense, x)).norm() < 1e-10 * std::max(1.0, x.norm()));
    }
  }
}

TEST_CASE("truncation marginals and ds agreement") {
  Rng rng(26);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = testing::uniform_int(rng, 1, 4), m = testing::uniform_int(rng, 1, 4);
    const auto [p, q] = random_integral_pair(rng, n, m, 4);
    const CPMap t = testing::random_map(rng, m, n, 2);
    const MarginalSpec spec(p.as_vector(), q.as_vector());
    const CPMap trun = build_truncation(t, spec);
    const Index nn = p.total();

    const auto [tp, tq] = marginals(t, spec);
    CHECK((opscale::apply(trun, Matrix::Identity(nn, nn)) - gadget_apply(q, tp)).norm() <= 1e-10 * tp.norm());
    CHECK((dual_apply(trun, Matrix::Identity(nn, nn)) - gadget_apply(p, tq)).norm() <= 1e-10 * tq.norm());

    const MarginalSpec ones(RealVector::Ones(nn), RealVector::Ones(nn));
    CHECK(testing::rel_diff(ds_distance(t, spec), ds_distance(trun, ones)) < 1e-8);
  }
}

TEST_CASE("scaling transport through the truncation") {
  Rng rng(27);
  for (int trial = 0; trial < 15; ++trial) {
    const auto [p, q] = random_integral_pair(rng, 3, 3, 3);
    const CPMap t = testing::random_map(rng, 3, 3, 2);
    const MarginalSpec spec(p.as_vector(), q.as_vector());
    const Matrix g = testing::random_upper(rng, 3);
    const Matrix h = testing::random_upper(rng, 3);

    const CPMap lhs = build_truncation(scale(t, {g, h}), spec);
    const CPMap rhs = scale(build_truncation(t, spec), {gadget_apply(q, g), gadget_apply(p, h)});
    const Index nn = p.total();
    const Matrix x = testing::random_hermitian(rng, nn);
    const Matrix a = opscale::apply(lhs, x), b = opscale::apply(rhs, x);
    CHECK((a - b).norm() <= 1e-10 * std::max(1.0, b.norm()));

    // The capacity factor of (g, h) equals the plain determinant factor of
    // the lifted pair.
    const Matrix gg = gadget_apply(q, g), hh = gadget_apply(p, h);
    const double lifted = std::log((gg.adjoint() * gg).determinant().real()) +
                          std::log((hh.adjoint() * hh).determinant().real());
    CHECK(testing::rel_diff(log_capacity_change_factor({g, h}, spec), lifted) < 1e-8);
  }
}
