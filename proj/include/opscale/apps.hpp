#pragma once

// Matrix scaling with prescribed row/column sums, the sum-of-Hermitians
// eigenvalue problem, and radial isotropic position (with Schur-Horn), each
// reduced to block-diagonal operator scaling.

#include <cstdint>
#include <optional>
#include <vector>

#include "opscale/cpmap.hpp"
#include "opscale/scaler.hpp"

namespace opscale {

/// Options shared by the application solvers.
struct AppOptions {
  std::uint64_t seed = 0;
  std::optional<long> max_iterations;  // empty means AUTO
  long hard_cap = kHardCap;
};

// Matrix scaling

struct MatrixScalingInstance {
  Eigen::MatrixXd a;  // m x n, nonnegative
  RealVector r;       // row sums, length m
  RealVector c;       // column sums, length n
};

/// Kraus operators sqrt(A_ij) e_i e_j^T for the nonzero entries.
CPMap build_matrix_cpmap(const Eigen::MatrixXd& a);

/// Exact zero-submatrix test: sum r = sum c and, for every row set L with
/// R = {j : A_ij = 0 for all i in L}, sum_{L} r <= sum_{j not in R} c.
/// Throws DimensionTooLarge for m > 20.
bool rc_feasible(const MatrixScalingInstance& inst);

struct MatrixScalingResult {
  ScalingResult solver;
  RealVector x;  // row multipliers
  RealVector y;  // column multipliers
  double row_error = 0.0;  // max |row sums of diag(x) A diag(y) - r|
  double col_error = 0.0;
  bool verified = false;  // both errors within epsilon

  bool success() const { return solver.success() && verified; }
};

MatrixScalingResult matrix_scale(const MatrixScalingInstance& inst, double epsilon,
                                 const AppOptions& opts = {});

// Sums of Hermitian matrices

/// s spectra of length m, each nonincreasing and nonnegative, meant to be
/// the eigenvalues of H_1, ..., H_s with sum H_i = I_m.
struct HornInstance {
  Index m = 0;
  std::vector<RealVector> spectra;
};

/// s Kraus operators of shape m x ms; the i-th is I_m in column block i.
CPMap build_horn_cpmap(Index m, Index s);

struct HornResult {
  ScalingResult solver;
  std::vector<Matrix> h;         // H_1, ..., H_s
  double sum_error = 0.0;        // ||sum H_i - I||_F
  double spectrum_error = 0.0;   // max_i ||lambda(H_i) - p(i)||_inf
  bool verified = false;         // both errors within epsilon

  bool success() const { return solver.success() && verified; }
};

/// Throws std::invalid_argument when the spectra do not sum to m.
HornResult horn_solve(const HornInstance& inst, double epsilon, const AppOptions& opts = {});

/// Affine change of variables taking A + B = C to H_1 + H_2 + H_3 = I:
///   H_1 = s (A + t1 I), H_2 = s (B + t2 I), H_3 = s (t3 I - C).
struct HornNormalization {
  HornInstance instance;
  double s = 1.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  /// |sum alpha + sum beta - sum gamma|; nonzero means no solution exists.
  double trace_mismatch = 0.0;

  bool trace_consistent() const { return trace_mismatch <= 1e-12; }
};

HornNormalization horn_normalize(const RealVector& alpha, const RealVector& beta,
                                 const RealVector& gamma);

/// Maps (H_1, H_2, H_3) back to (A, B, C).
std::vector<Matrix> horn_denormalize(const HornNormalization& nrm, const std::vector<Matrix>& h);

// Radial isotropic position

struct ForsterInstance {
  Matrix u;      // m x n, columns u_i
  RealVector p;  // length n, positive weights
  RealVector q;  // length m, nonincreasing spectrum of the target
  /// Optional Hermitian target with spectrum q; diag(q) when empty.
  std::optional<Matrix> target;
};

/// Kraus operators u_i e_i^T, i = 1..n. Throws on a zero column.
CPMap build_forster_cpmap(const Matrix& u);

struct ForsterResult {
  ScalingResult solver;
  Matrix b;  // m x m
  Matrix w;  // m x n, columns B u_i / ||B u_i||
  double error = 0.0;  // ||sum p_i w_i w_i^† - Q||_F
  bool verified = false;

  bool success() const { return solver.success() && verified; }
};

ForsterResult forster_scale(const ForsterInstance& inst, double epsilon,
                            const AppOptions& opts = {});

/// Exact test of p in K_q(U): sum p = sum q and
/// sum_{j in J} p_j <= q_1 + ... + q_{dim span(u_j : j in J)} for all J.
/// Throws DimensionTooLarge for n > 20.
bool polymatroid_membership(const ForsterInstance& inst);

/// q (padded with zeros) majorizes p; both sorted internally.
bool majorizes(const RealVector& q, const RealVector& p);

struct SchurHornResult {
  bool majorized = false;
  ForsterResult forster;
  Matrix h;                    // n x n Hermitian
  double diagonal_error = 0.0;  // ||diag(H) - p||_inf
  double spectrum_error = 0.0;  // vs q padded with zeros

  bool success() const { return majorized && forster.success(); }
};

/// Hermitian n x n matrix with diagonal p and nonzero spectrum q (length m <= n).
SchurHornResult schur_horn(const RealVector& p, const RealVector& q, double epsilon,
                           const AppOptions& opts = {});

}  // namespace opscale
