#pragma once

// Bit complexity, the subset-sum certificate threshold, and the
// scaling-based feasibility decision.

#include <cstdint>
#include <optional>
#include <string_view>

#include "opscale/cpmap.hpp"
#include "opscale/scaler.hpp"

namespace opscale {

struct BitComplexity {
  long b = 1;
};

/// Rational reconstruction of a double by continued fractions, with the
/// denominator bounded by max_denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};
Rational rational_reconstruction(double x, std::int64_t max_denominator = std::int64_t{1} << 53);

/// Counting convention:
///   - each Kraus entry x + iy contributes bitlen(max(|X|, |Y|)) + bitlen(D)
///     where X/D, Y/D is the reconstruction over a common denominator D;
///   - p and q are first divided by their sum, then every entry contributes
///     bitlen(numerator) + bitlen(denominator);
///   - all-zero Kraus operators are ignored;
///   - plus ceil(log2 r) + ceil(log2 m) + ceil(log2 n).
/// bitlen(0) = bitlen(1) = 1.
BitComplexity bit_complexity(const CPMap& t, const MarginalSpec& spec);

/// min over nonzero values of |Tr P - sum_{i in I} q_i - sum_{j in J} p_j| / (sqrt m + sqrt n).
/// Values below 1e-12 * Tr P count as zero. Throws DimensionTooLarge for
/// m + n > 24.
double certificate_epsilon(const MarginalSpec& spec);

enum class Decision { kFeasible, kInfeasible, kInconclusive };
std::string_view to_string(Decision d);

struct FeasibilityVerdict {
  Decision decision = Decision::kInconclusive;
  std::optional<ScalingResult> witness;
  double threshold_used = 0.0;
  double epsilon_used = 0.0;
};

struct DecisionOptions {
  /// Empty means AUTO (see SolverConfig).
  std::optional<long> max_iterations;
  long hard_cap = kHardCap;
};

/// Runs general_scale at eps = certificate_epsilon / (2 max(1, p_1, q_1)).
/// SUCCESS -> feasible, NOT_PD -> infeasible, anything else inconclusive.
/// Throws std::invalid_argument if the traces differ.
FeasibilityVerdict decide_scalable(const CPMap& t, const MarginalSpec& spec, std::uint64_t seed,
                                   const DecisionOptions& options = {});

}  // namespace opscale
