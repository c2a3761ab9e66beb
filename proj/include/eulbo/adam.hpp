#pragma once

#include "eulbo/types.hpp"

#include <cmath>

namespace eulbo {

/// Moment accumulators for one flat parameter block.
template <typename Scalar = double>
struct AdamState {
  Vector<Scalar> first;
  Vector<Scalar> second;
  long step = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  static AdamState zeros(Index n) { return {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n)}; }

  void reset() {
    first.setZero();
    second.setZero();
    step = 0;
  }
};

/// Bias-corrected Adam step in the ascent direction of `g`.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Vector<Scalar>& params, const Vector<Scalar>& g, Scalar lr) {
  if (params.size() != g.size() || state.first.size() != g.size() || state.second.size() != g.size()) {
    throw InvalidArgument("adam_step: shape mismatch");
  }
  ++state.step;
  state.first = state.beta1 * state.first + (Scalar(1) - state.beta1) * g;
  state.second = state.beta2 * state.second + (Scalar(1) - state.beta2) * g.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.step));
  params.array() += lr * (state.first.array() / c1) / ((state.second.array() / c2).sqrt() + state.eps);
}

/// Rescales `g` onto the ball of radius `threshold` when it lies outside (boundary inclusive).
template <typename Scalar>
Vector<Scalar> clip_gradient(const Vector<Scalar>& g, Scalar threshold) {
  if (!g.allFinite()) throw InvalidArgument("clip_gradient: non-finite gradient");
  if (!(threshold > 0)) throw InvalidArgument("clip_gradient: threshold must be positive");
  const Scalar norm = g.norm();
  if (norm > threshold) return g * (threshold / norm);
  return g;
}

}  // namespace eulbo
