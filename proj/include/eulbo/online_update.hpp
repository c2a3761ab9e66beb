#pragma once

#include "eulbo/svgp.hpp"

namespace eulbo {

/// Factorizations for conditioning the variational predictive GP on one fantasy
/// observation at `x`. Bound to the model it was built from by its revision.
template <typename Scalar = double>
struct FantasyContext {
  std::uint64_t revision = 0;
  Vector<Scalar> x;
  Matrix<Scalar> chol_l;   // chol(K_ZZ + jitter)
  Vector<Scalar> white_x;  // L⁻¹ k_Zx
  Vector<Scalar> white_m;  // L⁻¹ m
  Vector<Scalar> white_s;  // L⁻¹ S L⁻ᵀ (L⁻¹ k_Zx)
  Scalar mean = Scalar(0);
  Scalar variance = Scalar(0);
  Scalar noise_variance = Scalar(0);
};

template <typename Scalar>
FantasyContext<Scalar> build_context(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                                     const Vector<Scalar>& x) {
  if (x.size() != model.dim()) throw InvalidArgument("build_context: dimension mismatch");
  FantasyContext<Scalar> ctx;
  ctx.revision = model.revision();
  ctx.x = x;
  ctx.chol_l = factor.chol.llt.matrixL();
  const auto L = ctx.chol_l.template triangularView<Eigen::Lower>();
  ctx.white_x = L.solve(kernel_vector(x, model.state.inducing_points, model.hypers, model.family));
  ctx.white_m = L.solve(model.state.mean);
  const Matrix<Scalar> white_ls = L.solve(model.state.cov_factor.template triangularView<Eigen::Lower>().toDenseMatrix());
  ctx.white_s = white_ls * (white_ls.transpose() * ctx.white_x);
  ctx.mean = ctx.white_x.dot(ctx.white_m);
  ctx.variance = std::max(model.hypers.outputscale - ctx.white_x.squaredNorm() + ctx.white_x.dot(ctx.white_s), Scalar(0));
  ctx.noise_variance = model.hypers.noise_variance;
  return ctx;
}

template <typename Scalar>
FantasyContext<Scalar> build_context(const SvgpModel<Scalar>& model, const Vector<Scalar>& x) {
  return build_context(model, factor_inducing(model), x);
}

template <typename Scalar>
void check_fresh(const FantasyContext<Scalar>& ctx, const SvgpModel<Scalar>& model) {
  if (ctx.revision != model.revision()) throw StaleContext("fantasy context was built from a different model");
}

namespace detail {

/// Predictive mean at x′ and cov_q(x′, x) from one triangular solve.
template <typename Scalar>
void fantasy_moments(const FantasyContext<Scalar>& ctx, const SvgpModel<Scalar>& model, const Vector<Scalar>& xp,
                     Scalar& mean_p, Scalar& cov_px) {
  if (xp.size() != ctx.x.size()) throw InvalidArgument("fantasy_mean: dimension mismatch");
  Vector<Scalar> wp = kernel_vector(xp, model.state.inducing_points, model.hypers, model.family);
  ctx.chol_l.template triangularView<Eigen::Lower>().solveInPlace(wp);
  mean_p = wp.dot(ctx.white_m);
  cov_px = kernel_eval(xp, ctx.x, model.hypers, model.family) - wp.dot(ctx.white_x) + wp.dot(ctx.white_s);
}

}  // namespace detail

/// E[f(x′) | fantasy (x, y)] under the variational predictive GP, O(m²) per call.
template <typename Scalar>
Scalar fantasy_mean(const FantasyContext<Scalar>& ctx, const SvgpModel<Scalar>& model, Scalar y,
                    const Vector<Scalar>& xp) {
  check_fresh(ctx, model);
  Scalar mean_p, cov_px;
  detail::fantasy_moments(ctx, model, xp, mean_p, cov_px);
  return mean_p + cov_px / (ctx.variance + ctx.noise_variance) * (y - ctx.mean);
}

/// Row-wise fantasy_mean over the rows of `xps`, with a single freshness check.
template <typename Scalar>
Vector<Scalar> fantasy_means(const FantasyContext<Scalar>& ctx, const SvgpModel<Scalar>& model,
                             const Vector<Scalar>& ys, const Matrix<Scalar>& xps) {
  check_fresh(ctx, model);
  if (ys.size() != xps.rows()) throw InvalidArgument("fantasy_means: size mismatch");
  Vector<Scalar> out(xps.rows());
  Scalar mean_p, cov_px;
  for (Index i = 0; i < xps.rows(); ++i) {
    detail::fantasy_moments(ctx, model, Vector<Scalar>(xps.row(i).transpose()), mean_p, cov_px);
    out(i) = mean_p + cov_px / (ctx.variance + ctx.noise_variance) * (ys(i) - ctx.mean);
  }
  return out;
}

}  // namespace eulbo
