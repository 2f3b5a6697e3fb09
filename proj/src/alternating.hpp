#pragma once

// Shared state of the upper-triangular alternating iteration. Keeps the
// scaled Kraus operators g^† A_i h and their current marginals so that each
// step costs one balance_factor and two marginal evaluations.

#include <vector>

#include "opscale/cpmap.hpp"
#include "opscale/relmetrics.hpp"

namespace opscale::detail {

struct StepRecord {
  double log_factor;
  double log_upper;
  double ds;
};

class Alternating {
 public:
  Alternating(const CPMap& t, const MarginalSpec& spec)
      : spec_(spec),
        kraus_(t.kraus()),
        g_(Matrix::Identity(t.rows(), t.rows())),
        h_(Matrix::Identity(t.cols(), t.cols())),
        P_(spec.P()),
        Q_(spec.Q()) {
    refresh();
  }

  double ds() const { return ds_; }
  double log_upper() const { return log_relative_det(spec_.q(), tp_, spec_.blocks().rows); }
  long steps() const { return steps_; }
  ScalingPair pair() const { return {g_, h_}; }

  // The accumulated factors are upper triangular, so their conditioning is
  // visible on the diagonal. Past these bounds the pair can no longer be
  // applied to the original operators in double precision.
  bool diverged() const {
    const auto bad = [](const Matrix& x) {
      if (!x.allFinite()) return true;
      const double hi = x.cwiseAbs().maxCoeff();
      const double lo = x.diagonal().cwiseAbs().minCoeff();
      return hi > 1e100 || lo < 1e-100;
    };
    return bad(g_) || bad(h_);
  }
  CPMap current() const { return CPMap(kraus_); }

  // Odd steps balance T(P) with g, even steps balance T^*(Q) with h.
  // Throws NotPositiveDefinite from balance_factor.
  StepRecord step() {
    ++steps_;
    double log_factor = 0.0;
    if (steps_ % 2 == 1) {
      const Matrix gs = balance_factor(tp_, spec_.blocks().rows);
      log_factor = log_relative_det(spec_.q(), symmetrize(gs.adjoint() * gs), spec_.blocks().rows);
      const Matrix gd = gs.adjoint();
      for (Matrix& a : kraus_) a = gd * a;
      g_ = g_ * gs;
    } else {
      const Matrix hs = balance_factor(tq_, spec_.blocks().cols);
      log_factor = log_relative_det(spec_.p(), symmetrize(hs.adjoint() * hs), spec_.blocks().cols);
      for (Matrix& a : kraus_) a = a * hs;
      h_ = h_ * hs;
    }
    refresh();
    return {log_factor, log_upper(), ds_};
  }

  // Rebuilds the scaled operators from the original map and the
  // accumulated pair, discarding drift from the incremental updates.
  void resync(const CPMap& original) {
    kraus_ = scale(original, {g_, h_}).kraus();
    refresh();
  }

 private:
  void refresh() {
    tp_.setZero(g_.rows(), g_.rows());
    tq_.setZero(h_.rows(), h_.rows());
    for (const Matrix& a : kraus_) {
      tp_.noalias() += a * P_ * a.adjoint();
      tq_.noalias() += a.adjoint() * Q_ * a;
    }
    tp_ = symmetrize(tp_);
    tq_ = symmetrize(tq_);
    ds_ = ds_from_marginals(tp_, tq_, spec_);
  }

  MarginalSpec spec_;
  std::vector<Matrix> kraus_;
  Matrix g_;
  Matrix h_;
  Matrix P_;
  Matrix Q_;
  Matrix tp_;
  Matrix tq_;
  double ds_ = 0.0;
  long steps_ = 0;
};

}  // namespace opscale::detail
