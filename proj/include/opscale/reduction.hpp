#pragma once

// The partition gadget G_lambda and the truncation trun_{P,Q} T = G_q o T o G_p^*
// that turns integral-spectrum instances into doubly stochastic ones.

#include <vector>

#include "opscale/cpmap.hpp"

namespace opscale {

class Partition {
 public:
  /// Parts must be positive and nonincreasing.
  explicit Partition(std::vector<long> parts);

  const std::vector<long>& parts() const noexcept { return parts_; }
  Index size() const noexcept { return static_cast<Index>(parts_.size()); }  // k
  long total() const noexcept { return total_; }                            // l
  long operator[](std::size_t i) const { return parts_[i]; }

  Partition conjugate() const;
  RealVector as_vector() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<long> parts_;
  long total_ = 0;
};

Partition conjugate_partition(const Partition& lambda);

/// G_lambda(X) = diag(X[0:l'_1, 0:l'_1], ..., X[0:l'_{lambda_1}, ...]) for a
/// k x k matrix X; the result is l x l.
Matrix gadget_apply(const Partition& lambda, const Matrix& x);

/// Adjoint of gadget_apply: sums the diagonal blocks of Y back into the
/// corresponding k x k corners.
Matrix gadget_dual_apply(const Partition& lambda, const Matrix& y);

/// Integral spectra with a common scale factor.
struct IntegralSpectra {
  Partition p;
  Partition q;
  long denominator;  // p_int = denominator * p
};

/// Scales rational p, q to integers by their least common denominator.
/// Throws NonIntegralSpectrum if some entry is not a ratio with denominator
/// at most max_denominator, or if an entry is zero.
IntegralSpectra integral_spectra(const MarginalSpec& spec, long max_denominator = 64);

/// trun_{P,Q} T evaluated through the gadgets, without forming the
/// r q_1 p_1 block Kraus operators.
class TruncatedMap {
 public:
  TruncatedMap(CPMap t, Partition p, Partition q);

  long dim() const noexcept { return p_.total(); }  // N
  const Partition& p() const noexcept { return p_; }
  const Partition& q() const noexcept { return q_; }

  Matrix apply(const Matrix& x) const;
  Matrix dual_apply(const Matrix& y) const;

  /// Block Kraus operators: for each A_i, row block j of G_q and column
  /// block k of G_p, the N x N matrix with eta_{q'_j} A_i eta_{p'_k}^† in
  /// the (j, k) block. Ordered by i, then j, then k.
  CPMap materialize() const;

 private:
  CPMap t_;
  Partition p_;
  Partition q_;
};

/// Materialized trun_{P,Q} T for integral p, q with equal sums. Throws
/// NonIntegralSpectrum otherwise.
CPMap build_truncation(const CPMap& t, const MarginalSpec& spec);

}  // namespace opscale
