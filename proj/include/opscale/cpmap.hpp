#pragma once

// Completely positive maps in Kraus form, their duals, scalings and
// marginals, plus the Cholesky-based balancing step every solver uses.

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "opscale/types.hpp"

namespace opscale {

/// A completely positive map X -> sum_i A_i X A_i^† from n x n to m x m
/// matrices, stored as its r Kraus operators (each m x n).
class CPMap {
 public:
  explicit CPMap(std::vector<Matrix> kraus);

  Index rows() const noexcept { return m_; }  // m
  Index cols() const noexcept { return n_; }  // n
  std::size_t size() const noexcept { return kraus_.size(); }  // r
  const std::vector<Matrix>& kraus() const noexcept { return kraus_; }
  const Matrix& operator[](std::size_t i) const { return kraus_[i]; }

 private:
  std::vector<Matrix> kraus_;
  Index m_ = 0;
  Index n_ = 0;
};

/// Block sizes for the m-side (rows, acted on by g) and the n-side (cols,
/// acted on by h). An empty list means a single block.
struct BlockStructure {
  BlockSizes rows;
  BlockSizes cols;
};

/// Half-open index range [offset, offset + size) of one diagonal block.
struct BlockRange {
  Index offset;
  Index size;
};

/// Expands block sizes into ranges; throws DimensionError if they do not sum
/// to dim or contain a nonpositive size.
std::vector<BlockRange> block_ranges(const BlockSizes& sizes, Index dim);

/// Target spectra: p (length n, the P = diag(p) side) and q (length m).
/// Entries are nonnegative and nonincreasing within every flag block.
class MarginalSpec {
 public:
  MarginalSpec(RealVector p, RealVector q, BlockStructure blocks = {});

  const RealVector& p() const noexcept { return p_; }
  const RealVector& q() const noexcept { return q_; }
  const BlockStructure& blocks() const noexcept { return blocks_; }
  Index n() const noexcept { return p_.size(); }
  Index m() const noexcept { return q_.size(); }

  Matrix P() const;
  Matrix Q() const;
  double trace_gap() const { return std::abs(p_.sum() - q_.sum()); }
  double p_min() const { return p_.minCoeff(); }
  double q_min() const { return q_.minCoeff(); }
  bool nonsingular() const { return p_min() > 0.0 && q_min() > 0.0; }

  /// Same spectra multiplied by c > 0.
  MarginalSpec scaled(double c) const;

 private:
  RealVector p_;
  RealVector q_;
  BlockStructure blocks_;
};

/// Invertible pair (g: m x m, h: n x n) acting as T_{g,h}: X -> g^† T(h X h^†) g.
struct ScalingPair {
  Matrix g;
  Matrix h;

  static ScalingPair identity(Index m, Index n) {
    return {Matrix::Identity(m, m), Matrix::Identity(n, n)};
  }
};

/// Returns sum_i A_i X A_i^†, symmetrized.
Matrix apply(const CPMap& t, const Matrix& x);

/// Returns sum_i A_i^† Y A_i, symmetrized.
Matrix dual_apply(const CPMap& t, const Matrix& y);

/// Kraus operators g^† A_i h.
CPMap scale(const CPMap& t, const ScalingPair& s);

/// (T(P), T^*(Q)).
std::pair<Matrix, Matrix> marginals(const CPMap& t, const MarginalSpec& spec);

/// Upper-triangular g with g^† S g = I, obtained from the Cholesky factor
/// S = L L^† as g = L^{-†}. With block sizes, g is block-diagonal and each
/// block is factored independently. Throws NotPositiveDefinite when the
/// smallest eigenvalue of S is at or below 1e-12 * trace(S) / dim.
Matrix balance_factor(const Matrix& s, const BlockSizes& blocks = {});

/// Relative threshold under which balance_factor rejects S.
inline constexpr double kSingularFloor = 1e-12;

/// True if every Kraus operator is supported on a single (row block, col
/// block) cell of the grid.
bool is_block_diagonal(const CPMap& t, const BlockStructure& blocks);

/// Smallest singular value divided by the largest (0 for the zero matrix).
double inverse_condition(const Matrix& x);

}  // namespace opscale
