#pragma once

#include "eulbo/exact_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eulbo {

template <typename Scalar = double>
struct TurboConfig {
  Scalar length_init = Scalar(0.8);
  Scalar length_min = Scalar(0.0078125);  // 0.5^7
  Scalar length_max = Scalar(1.6);
  int success_tol = 3;
  int failure_tol = 4;
  Scalar improvement_rel = Scalar(1e-3);
  Scalar improvement_abs = Scalar(1e-6);

  /// Defaults for a d-dimensional problem proposing q points per iteration.
  static TurboConfig defaults(Index d, Index q) {
    if (d < 1 || q < 1) throw InvalidArgument("turbo config: d and q must be positive");
    TurboConfig c;
    c.failure_tol = static_cast<int>(std::max<Index>((d + q - 1) / q, 4));
    return c;
  }

  void validate() const {
    if (!(length_min > 0) || !(length_min <= length_init) || !(length_init <= length_max)) {
      throw InvalidArgument("turbo config: need 0 < length_min <= length_init <= length_max");
    }
    if (success_tol < 1 || failure_tol < 1) throw InvalidArgument("turbo config: tolerances must be positive");
    if (!(improvement_rel >= 0) || !(improvement_abs >= 0)) throw InvalidArgument("turbo config: negative threshold");
  }
};

template <typename Scalar = double>
struct TrustRegionState {
  TurboConfig<Scalar> config;
  Scalar length = Scalar(0.8);
  int successes = 0;
  int failures = 0;
  Scalar best_value = -std::numeric_limits<Scalar>::infinity();
  Vector<Scalar> best_x;
  bool restart = false;

  static TrustRegionState initial(const TurboConfig<Scalar>& config) {
    config.validate();
    TrustRegionState s;
    s.config = config;
    s.length = config.length_init;
    return s;
  }

  bool has_incumbent() const { return best_x.size() > 0 && std::isfinite(best_value); }

  void validate() const {
    config.validate();
    if (!(length >= config.length_min && length <= config.length_max)) throw InvalidArgument("trust region: L out of range");
    if (successes < 0 || failures < 0) throw InvalidArgument("trust region: negative counter");
    if (successes > 0 && failures > 0) throw InvalidArgument("trust region: both counters nonzero");
  }
};

/// Improvement threshold a batch must beat the incumbent by to count as a success.
template <typename Scalar>
Scalar tr_threshold(const TrustRegionState<Scalar>& s) {
  if (!std::isfinite(s.best_value)) return Scalar(0);
  return s.config.improvement_rel * std::abs(s.best_value) + s.config.improvement_abs;
}

/// One transition on the best value of the latest batch (and its location, when given).
/// The incumbent follows any strict improvement; the counters only count improvements
/// beyond the threshold. The first value seen only sets the incumbent.
template <typename Scalar>
TrustRegionState<Scalar> tr_update(TrustRegionState<Scalar> s, Scalar batch_best_value,
                                   const Vector<Scalar>* batch_best_x = nullptr) {
  if (!std::isfinite(s.best_value)) {
    s.best_value = batch_best_value;
    if (batch_best_x) s.best_x = *batch_best_x;
    return s;
  }
  const bool success = batch_best_value > s.best_value + tr_threshold(s);
  if (batch_best_value > s.best_value) {
    s.best_value = batch_best_value;
    if (batch_best_x) s.best_x = *batch_best_x;
  }
  if (success) {
    s.failures = 0;
    if (++s.successes >= s.config.success_tol) {
      s.length = std::min(Scalar(2) * s.length, s.config.length_max);
      s.successes = 0;
    }
  } else {
    s.successes = 0;
    if (++s.failures >= s.config.failure_tol) {
      const Scalar halved = s.length / Scalar(2);
      if (halved < s.config.length_min) s.restart = true;
      s.length = std::max(halved, s.config.length_min);
      s.failures = 0;
    }
  }
  return s;
}

/// Box centred at the incumbent with half-widths (L/2)·ℓ_d/geomean(ℓ), intersected with `domain`.
template <typename Scalar>
Bounds<Scalar> tr_bounds(const TrustRegionState<Scalar>& s, const Vector<Scalar>& lengthscales,
                         const Bounds<Scalar>& domain) {
  domain.validate();
  if (!s.has_incumbent()) throw InvalidArgument("tr_bounds: no incumbent");
  if (s.best_x.size() != domain.dim() || lengthscales.size() != domain.dim()) {
    throw InvalidArgument("tr_bounds: dimension mismatch");
  }
  if (!(lengthscales.array() > 0).all()) throw InvalidArgument("tr_bounds: lengthscales must be positive");
  const Scalar geomean = std::exp(lengthscales.array().log().mean());
  const Vector<Scalar> half = (s.length / Scalar(2)) * lengthscales / geomean;
  const Vector<Scalar> center = project_box(s.best_x, domain);
  Bounds<Scalar> box{(center - half).cwiseMax(domain.lower), (center + half).cwiseMin(domain.upper)};
  return box;
}

/// Fresh region after a collapse: L back to L_init, counters cleared, incumbent taken from
/// the re-seed batch.
template <typename Scalar>
TrustRegionState<Scalar> tr_restart(const TrustRegionState<Scalar>& s, const Dataset<Scalar>& reseed) {
  if (reseed.size() < 1) throw InvalidArgument("tr_restart: empty re-seed batch");
  auto out = TrustRegionState<Scalar>::initial(s.config);
  Index best = 0;
  for (Index i = 1; i < reseed.size(); ++i) {
    if (reseed.targets(i) > reseed.targets(best)) best = i;
  }
  out.best_value = reseed.targets(best);
  out.best_x = reseed.inputs.row(best).transpose();
  return out;
}

}  // namespace eulbo
