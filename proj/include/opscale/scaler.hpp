#pragma once

// Alternating triangular scaling, the randomized general solver built on it,
// the projection onto the support of (P, Q), and iteration budgets.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "opscale/cpmap.hpp"
#include "opscale/relmetrics.hpp"

namespace opscale {

enum class Mode { kTriangular, kGeneral };

enum class Status { kSuccess, kErrorNotPD, kErrorBudget, kErrorSingularInit };

std::string_view to_string(Status s);
std::string_view to_string(Mode m);

inline constexpr long kHardCap = 1'000'000;

struct SolverConfig {
  double epsilon = 1e-3;
  /// Empty means AUTO: the theoretical budget, capped at hard_cap.
  std::optional<long> max_iterations;
  std::uint64_t seed = 0;
  Mode mode = Mode::kGeneral;
  long hard_cap = kHardCap;
};

/// Which marginal problem the returned pair solves.
///   kToIdentity:   scale(T, pair) maps (P -> I_m, Q -> I_n).
///   kFromIdentity: scale(T, pair) maps (I_n -> Q, I_m -> P).
/// A solution of the first kind converts to the second via
/// (g Q^{1/2}, h P^{1/2}); singular spectra only admit the second kind.
enum class PairForm { kToIdentity, kFromIdentity };

struct ScalingResult {
  Status status = Status::kErrorBudget;
  ScalingPair pair;
  PairForm form = PairForm::kToIdentity;
  long iterations = 0;
  long budget = 0;
  /// ds after each step, in the units of the caller's spectra.
  std::vector<double> ds_trace;
  double initial_ds = 0.0;
  double final_ds = 0.0;
  double ds_threshold = 0.0;
  /// Recorded with the spectra normalized to unit trace.
  CapacityTrace capacity_trace;
  /// Sum of p; the solver works with p / normalization.
  double normalization = 1.0;
  std::optional<double> min_eigenvalue;

  bool success() const { return status == Status::kSuccess; }
};

/// Converts a kToIdentity pair for spec into the kFromIdentity form.
ScalingPair to_from_identity_form(const ScalingPair& s, const MarginalSpec& spec);

/// Restriction of (T, P, Q) to the positive parts of p and q. Within each
/// flag block the zero tail is dropped; blocks with no positive entry
/// disappear.
struct SupportProjection {
  CPMap map;
  MarginalSpec spec;
  std::vector<Index> kept_rows;  // indices into [m] kept by q
  std::vector<Index> kept_cols;  // indices into [n] kept by p
  Index m;
  Index n;
  bool identity;  // nothing was dropped
};

/// Throws AllZeroSpectrum when p or q is identically zero.
SupportProjection project_to_support(const CPMap& t, const MarginalSpec& spec);

/// Embeds a kFromIdentity pair of the restricted problem into full size,
/// putting delta on the diagonal of dropped coordinates.
ScalingPair lift_scaling(const SupportProjection& proj, const ScalingPair& restricted,
                         double delta);

/// Alternating upper-triangular scaling. Requires nonsingular P, Q with equal
/// traces; the returned pair is upper triangular (block upper triangular
/// with block structure) and of kToIdentity form.
ScalingResult triangular_scale(const CPMap& t, const MarginalSpec& spec, const SolverConfig& cfg);

/// Random block-diagonal initialization followed by triangular_scale on the
/// support of (P, Q). Deterministic given cfg.seed. Accepts singular P, Q;
/// the result is then of kFromIdentity form.
ScalingResult general_scale(const CPMap& t, const MarginalSpec& spec, const SolverConfig& cfg);

/// Dispatches on cfg.mode.
ScalingResult solve(const CPMap& t, const MarginalSpec& spec, const SolverConfig& cfg);

/// Triangular: ceil(100 b m / (min(eps, p_min) + min(eps, q_min))).
/// General:    ceil(400 b m / (min(q_min, p_min) eps^2)).
/// Both capped at hard_cap; requires positive arguments and eps < 1.
long iteration_budget(double b, Index m, double epsilon, double p_min, double q_min, Mode mode,
                      long hard_cap = kHardCap);

/// ceil(-7 log cap(T_1) / (min(eps, p_min) + min(eps, q_min))), capped.
long iteration_budget_from_capacity(double log_cap_first_step, double epsilon, double p_min,
                                    double q_min, long hard_cap = kHardCap);

}  // namespace opscale
