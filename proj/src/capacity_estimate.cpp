#include <cmath>

#include "alternating.hpp"
#include "opscale/relmetrics.hpp"

namespace opscale {

CapacityEstimate estimate_capacity(const CPMap& t, const MarginalSpec& spec,
                                   const CapacityBudget& budget) {
  if (!spec.nonsingular()) throw std::invalid_argument("estimate_capacity needs nonsingular P, Q");
  if (spec.n() != t.cols() || spec.m() != t.rows()) {
    throw DimensionError("marginal spectra do not match the map's shape");
  }

  CapacityEstimate out;
  detail::Alternating it(t, spec);
  // log cap(T) <= log det(Q, T_j(P)) - sum of the first j log factors.
  double best = it.log_upper();
  double cumulative = 0.0;
  const auto vanish = [&] {
    out.value = 0.0;
    out.log_value = -INFINITY;
    out.status = CapacityStatus::kVanished;
    out.iterations = it.steps();
    return out;
  };
  if (!(best > budget.log_floor)) return vanish();

  out.status = CapacityStatus::kBudgetExhausted;
  for (long j = 0; j < budget.max_iterations; ++j) {
    detail::StepRecord rec{};
    try {
      rec = it.step();
    } catch (const NotPositiveDefinite&) {
      return vanish();
    }
    cumulative += rec.log_factor;
    best = std::min(best, rec.log_upper - cumulative);
    if (!(best > budget.log_floor)) return vanish();
    if (rec.ds < 1e-24) {
      out.status = CapacityStatus::kConverged;
      break;
    }
  }
  out.iterations = it.steps();
  out.log_value = best;
  out.value = std::exp(best);
  return out;
}

}  // namespace opscale
