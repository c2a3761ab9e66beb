#pragma once

#include "eulbo/types.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

namespace eulbo {

/// Nodes and weights for ∫ e^{-t²} g(t) dt ≈ Σ wⱼ g(tⱼ), nodes ascending.
struct GaussHermiteRule {
  Vector<double> nodes;
  Vector<double> weights;
};

inline constexpr int kMaxQuadPoints = 128;

namespace detail {

inline GaussHermiteRule compute_gauss_hermite(int n) {
  // Golub-Welsch on the symmetric Jacobi matrix of the Hermite recurrence.
  Matrix<double> J = Matrix<double>::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(0.5 * i);
  Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(J);
  GaussHermiteRule rule{eig.eigenvalues(), Vector<double>(n)};
  // Polish each node with Newton steps on the orthonormal Hermite functions, then
  // take weights from the derivative: w = 2 / (h'_n(t))².
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  for (int k = 0; k < n; ++k) {
    double t = rule.nodes(k), pp = 0.0;
    for (int it = 0; it < 3; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = t * std::sqrt(2.0 / j) * p2 - std::sqrt(double(j - 1) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      t -= p1 / pp;
    }
    rule.nodes(k) = t;
    rule.weights(k) = 2.0 / (pp * pp);
  }
  return rule;
}

}  // namespace detail

/// Cached n-point rule; n must lie in [2, kMaxQuadPoints].
inline const GaussHermiteRule& gauss_hermite(int n) {
  if (n < 2 || n > kMaxQuadPoints) throw InvalidArgument("gauss_hermite: no quadrature table for that many points");
  static std::array<std::unique_ptr<GaussHermiteRule>, kMaxQuadPoints + 1> cache;
  static std::mutex lock;
  std::lock_guard<std::mutex> guard(lock);
  auto& slot = cache[static_cast<std::size_t>(n)];
  if (!slot) slot = std::make_unique<GaussHermiteRule>(detail::compute_gauss_hermite(n));
  return *slot;
}

}  // namespace eulbo
