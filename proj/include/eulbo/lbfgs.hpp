#pragma once

#include "eulbo/types.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace eulbo {

struct LbfgsOptions {
  int max_iterations = 200;
  int history = 10;
  double gradient_tolerance = 1e-6;  // on the projected gradient, infinity norm
  double value_tolerance = 1e-10;    // relative change of the objective
  double armijo = 1e-4;
  int max_backtracks = 40;
};

template <typename Scalar = double>
struct LbfgsResult {
  Vector<Scalar> x;
  Scalar value = -std::numeric_limits<Scalar>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Box-projected L-BFGS maximizer. `objective(x, grad)` returns f(x) and writes ∇f into
/// `grad`. Non-finite trial values are treated as failed line-search steps, so the
/// returned iterate is always the best finite one visited.
template <typename Scalar>
LbfgsResult<Scalar> lbfgs_maximize(const std::function<Scalar(const Vector<Scalar>&, Vector<Scalar>&)>& objective,
                                   const Vector<Scalar>& x0, const Vector<Scalar>& lower, const Vector<Scalar>& upper,
                                   const LbfgsOptions& opts = {}) {
  const Index n = x0.size();
  auto project = [&](const Vector<Scalar>& x) { return Vector<Scalar>(x.cwiseMax(lower).cwiseMin(upper)); };
  // Work with phi = -f so the textbook minimization recurrences apply unchanged.
  auto eval = [&](const Vector<Scalar>& x, Vector<Scalar>& g) {
    const Scalar f = objective(x, g);
    g = -g;
    return -f;
  };

  LbfgsResult<Scalar> res;
  res.x = project(x0);
  Vector<Scalar> g(n);
  Scalar phi = eval(res.x, g);
  if (!std::isfinite(phi) || !g.allFinite()) throw NumericalError("lbfgs: objective not finite at the initial point");

  std::deque<Vector<Scalar>> s_hist, y_hist;
  std::deque<Scalar> rho_hist;

  auto projected_gradient_norm = [&](const Vector<Scalar>& x, const Vector<Scalar>& grad) {
    Scalar m(0);
    for (Index i = 0; i < n; ++i) {
      Scalar gi = grad(i);
      if (x(i) <= lower(i) && gi > 0) gi = 0;
      if (x(i) >= upper(i) && gi < 0) gi = 0;
      m = std::max(m, std::abs(gi));
    }
    return m;
  };

  Vector<Scalar> g_new(n);
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    if (projected_gradient_norm(res.x, g) < Scalar(opts.gradient_tolerance)) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    Vector<Scalar> q = g;
    std::vector<Scalar> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const Scalar beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Vector<Scalar> dir = -q;
    if (!(dir.dot(g) < 0)) {
      dir = -g;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    Scalar step = s_hist.empty() ? std::min(Scalar(1), Scalar(1) / std::max(g.norm(), Scalar(1e-12))) : Scalar(1);

    bool accepted = false;
    Vector<Scalar> x_new;
    Scalar phi_new = phi;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      x_new = project(res.x + step * dir);
      const Vector<Scalar> delta = x_new - res.x;
      if (delta.squaredNorm() == 0) break;
      bool finite = true;
      try {
        phi_new = eval(x_new, g_new);
        finite = std::isfinite(phi_new) && g_new.allFinite();
      } catch (const NumericalError&) {
        finite = false;
      }
      if (finite && phi_new <= phi + Scalar(opts.armijo) * g.dot(delta)) {
        accepted = true;
        break;
      }
      step *= Scalar(0.5);
    }
    if (!accepted) {
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      res.converged = true;  // no descent available from the current point
      break;
    }
    const Vector<Scalar> s = x_new - res.x;
    const Vector<Scalar> y = g_new - g;
    const Scalar sy = s.dot(y);
    if (sy > Scalar(1e-12) * y.squaredNorm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(Scalar(1) / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const Scalar change = std::abs(phi - phi_new);
    res.x = x_new;
    g = g_new;
    const Scalar prev = phi;
    phi = phi_new;
    if (change <= Scalar(opts.value_tolerance) * std::max(Scalar(1), std::abs(prev))) {
      res.converged = true;
      res.iterations = it + 1;
      break;
    }
  }
  res.value = -phi;
  return res;
}

}  // namespace eulbo
