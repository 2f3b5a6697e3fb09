#pragma once

// Relative determinants, the ds distance, and capacity bookkeeping.

#include <vector>

#include "opscale/cpmap.hpp"

namespace opscale {

/// Throws std::invalid_argument unless a is nonnegative and nonincreasing.
void check_weights(const RealVector& a);

/// log det(A, X) = sum_j (a_j - a_{j+1}) log det X[0:j, 0:j] for Hermitian
/// PSD X, with a_{k+1} = 0 and 0^0 = 1. Returns -infinity when a leading
/// minor with positive exponent is at most 1e-300.
double log_relative_det(const RealVector& a, const Matrix& x);

/// exp(log_relative_det(a, x)).
double relative_det(const RealVector& a, const Matrix& x);

/// Product over diagonal blocks of the per-block relative determinants,
/// each block using its own slice of a. Returned in log form.
double log_relative_det(const RealVector& a, const Matrix& x, const BlockSizes& blocks);

/// Relative determinant of a general square matrix using principal-branch
/// complex powers of the leading minors.
Complex relative_det_general(const RealVector& a, const Matrix& x);

/// Numerically checks, to relative tolerance 1e-8:
///   |det(A, X h)| = |det(A, X)| |det(A, h)|
///   det(A, h^† X h) = det(A, h^† h) det(A, X)
///   det(A, h^{-†} h^{-1}) det(A, h^† h) = 1
/// for PD Hermitian X and invertible upper-triangular h.
bool rel_det_multiplicativity_check(const RealVector& a, const Matrix& x, const Matrix& h);

/// Character of an upper-triangular g: prod_i g_ii^{a_i} (principal branch).
Complex weight_character(const RealVector& a, const Matrix& g);

/// ds distance of T from mapping (P -> I_m, Q -> I_n), computed blockwise
/// along the flag blocks of spec.
double ds_distance(const CPMap& t, const MarginalSpec& spec);

/// Same, from precomputed marginals T(P) (m x m) and T^*(Q) (n x n).
double ds_from_marginals(const Matrix& tp, const Matrix& tq, const MarginalSpec& spec);

/// log of det(Q, g^† g) det(P, h^† h). Throws NotInvertible if g or h is
/// singular.
double log_capacity_change_factor(const ScalingPair& s, const MarginalSpec& spec);
double capacity_change_factor(const ScalingPair& s, const MarginalSpec& spec);

/// Per-run record of capacity changes. log_factors[j] is the log change of
/// capacity caused by step j + 1; log_upper[j] bounds log cap(T_{j+1}) from
/// above by plugging h = I into the capacity infimum.
struct CapacityTrace {
  std::vector<double> log_factors;
  std::vector<double> log_upper;
  double cumulative = 0.0;
  double lower_bound = 0.0;  // log of the a-priori capacity lower bound

  void append(double log_factor, double log_upper_bound) {
    log_factors.push_back(log_factor);
    log_upper.push_back(log_upper_bound);
    cumulative += log_factor;
  }
};

struct CapacityLowerBound {
  double initial;           // exp(-10 b)
  double after_first_step;  // exp(-14 b m)
  double log_initial;
  double log_after_first_step;
};

CapacityLowerBound capacity_lower_bound(double b, Index m);

struct CapacityBudget {
  long max_iterations = 2000;
  /// The estimate is reported as zero once its log drops below this.
  double log_floor = -700.0;
};

enum class CapacityStatus { kConverged, kBudgetExhausted, kVanished };

struct CapacityEstimate {
  double value = 0.0;
  double log_value = 0.0;
  CapacityStatus status = CapacityStatus::kConverged;
  long iterations = 0;
};

/// Upper estimate of cap(T, P, Q), obtained by running the alternating
/// triangular iteration on (T, P, Q) and taking
///   min_j [ log det(Q, T_j(P)) - sum_{k<=j} log factor_k ].
/// P and Q must be nonsingular.
CapacityEstimate estimate_capacity(const CPMap& t, const MarginalSpec& spec,
                                   const CapacityBudget& budget = {});

/// -sum p_i log p_i with 0 log 0 = 0; p must be a probability vector.
double shannon_entropy(const RealVector& p);

}  // namespace opscale
