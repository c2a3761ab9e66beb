#pragma once

#include "eulbo/online_update.hpp"
#include "eulbo/quadrature.hpp"
#include "eulbo/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string_view>

namespace eulbo {

inline constexpr double kSoftplusSwitch = 30.0;
inline constexpr double kVarianceFloor = 1e-12;

template <typename Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(kSoftplusSwitch)) return x + std::exp(-x);
  if (x < -Scalar(kSoftplusSwitch)) return std::max(std::exp(x), std::numeric_limits<Scalar>::denorm_min());
  return std::log1p(std::exp(x));
}

/// log(softplus(x)) without overflow or underflow: → x as x → −∞, → log x as x → +∞.
template <typename Scalar>
Scalar log_softplus(Scalar x) {
  if (x < -Scalar(kSoftplusSwitch)) return x;
  if (x > Scalar(kSoftplusSwitch)) return std::log(x);
  return std::log(std::log1p(std::exp(x)));
}

/// d/dx log_softplus(x), consistent with the asymptotic branches.
template <typename Scalar>
Scalar log_softplus_grad(Scalar x) {
  if (x < -Scalar(kSoftplusSwitch)) return Scalar(1);
  if (x > Scalar(kSoftplusSwitch)) return Scalar(1) / x;
  const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-x));
  return sig / std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar normal_pdf(Scalar z) {
  return std::exp(Scalar(-0.5) * z * z) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar normal_cdf(Scalar z) {
  return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

/// E[max(f − y*, 0)] for f ~ N(mu, sigma²); optional partials in mu and sigma.
template <typename Scalar>
Scalar closed_form_ei(Scalar mu, Scalar sigma, Scalar ystar, Scalar* d_mu = nullptr, Scalar* d_sigma = nullptr) {
  if (sigma < 0) throw InvalidArgument("closed_form_ei: sigma must be nonnegative");
  if (sigma == 0) {
    if (d_mu) *d_mu = mu > ystar ? Scalar(1) : Scalar(0);
    if (d_sigma) *d_sigma = Scalar(0);
    return std::max(mu - ystar, Scalar(0));
  }
  const Scalar z = (mu - ystar) / sigma;
  const Scalar cdf = normal_cdf(z), pdf = normal_pdf(z);
  if (d_mu) *d_mu = cdf;
  if (d_sigma) *d_sigma = pdf;
  return std::max(sigma * (z * cdf + pdf), Scalar(0));
}

enum class UtilityKind { sei, one_shot_skg, q_sei, q_skg };

inline std::string_view to_string(UtilityKind k) {
  switch (k) {
    case UtilityKind::sei: return "sei";
    case UtilityKind::one_shot_skg: return "one_shot_skg";
    case UtilityKind::q_sei: return "q_sei";
    case UtilityKind::q_skg: return "q_skg";
  }
  return "?";
}

inline bool is_kg(UtilityKind k) { return k == UtilityKind::one_shot_skg || k == UtilityKind::q_skg; }

/// Standard-normal draws frozen for one BO iteration: row i is sample i, column j batch slot j.
template <typename Scalar = double>
struct BaseSamples {
  Matrix<Scalar> eps;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  Index count() const { return eps.rows(); }
  Index width() const { return eps.cols(); }

  static BaseSamples draw(Index samples, Index q, std::uint64_t seed, std::uint64_t iteration) {
    if (samples < 1 || q < 1) throw InvalidArgument("base samples: sizes must be positive");
    auto rng = make_rng(seed, RngStream::base_samples, iteration);
    BaseSamples out{Matrix<Scalar>(samples, q), seed, iteration};
    for (Index i = 0; i < samples; ++i)
      for (Index j = 0; j < q; ++j) out.eps(i, j) = Scalar(rng.normal());
    return out;
  }

  void validate() const {
    if (eps.size() == 0) throw InvalidArgument("base samples: empty");
    if (!eps.allFinite()) throw InvalidArgument("base samples: non-finite entry");
  }
};

enum class CPlusRule { best_observed };

template <typename Scalar = double>
struct UtilityConfig {
  UtilityKind kind = UtilityKind::sei;
  int quad_points = 20;
  Index mc_samples = 64;
  CPlusRule c_plus_rule = CPlusRule::best_observed;
  Scalar incumbent = Scalar(0);
  Scalar c_plus = Scalar(0);

  void validate() const {
    if (quad_points < 2) throw InvalidArgument("utility config: quad_points must be >= 2");
    if (mc_samples < 1) throw InvalidArgument("utility config: mc_samples must be >= 1");
  }

  /// Sets y* and c⁺ from the observed targets.
  void set_reference(const Vector<Scalar>& targets) {
    if (targets.size() == 0) throw InvalidArgument("utility config: no observations");
    incumbent = targets.maxCoeff();
    c_plus = incumbent;
  }
};

/// Adjoints of a scalar utility with respect to joint predictive moments.
template <typename Scalar = double>
struct MomentGrad {
  Vector<Scalar> mean;
  Matrix<Scalar> cov;  // partials per entry; symmetrized by the consumer
  Scalar noise = Scalar(0);

  static MomentGrad zero(Index p) { return {Vector<Scalar>::Zero(p), Matrix<Scalar>::Zero(p, p), Scalar(0)}; }
};

/// Inner transform applied to KG fantasy means.
enum class KgTransform { log_softplus, identity };

namespace moments {

/// Gauss-Hermite E[log softplus(f − y*)] for f ~ N(mean(0), cov(0,0)).
template <typename Scalar>
Scalar sei(const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar ystar, int quad_points, MomentGrad<Scalar>* g) {
  const auto& rule = gauss_hermite(quad_points);
  const bool floored = !(cov(0, 0) > Scalar(kVarianceFloor));
  const Scalar var = floored ? Scalar(kVarianceFloor) : cov(0, 0);
  const Scalar sigma = std::sqrt(var);
  const Scalar inv_sqrt_pi = Scalar(1) / std::sqrt(std::numbers::pi_v<Scalar>);
  Scalar value(0), d_mu(0), d_sigma(0);
  for (Index j = 0; j < rule.nodes.size(); ++j) {
    const Scalar t = Scalar(rule.nodes(j)), w = Scalar(rule.weights(j)) * inv_sqrt_pi;
    const Scalar arg = mean(0) + std::numbers::sqrt2_v<Scalar> * sigma * t - ystar;
    value += w * log_softplus(arg);
    if (g) {
      const Scalar d = w * log_softplus_grad(arg);
      d_mu += d;
      d_sigma += d * std::numbers::sqrt2_v<Scalar> * t;
    }
  }
  if (g) {
    g->mean(0) += d_mu;
    if (!floored) g->cov(0, 0) += d_sigma / (Scalar(2) * sigma);
  }
  return value;
}

/// Closed-form EI on the marginal at point 0.
template <typename Scalar>
Scalar ei(const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar ystar, MomentGrad<Scalar>* g) {
  const bool floored = !(cov(0, 0) > Scalar(kVarianceFloor));
  const Scalar sigma = floored ? Scalar(0) : std::sqrt(cov(0, 0));
  Scalar d_mu, d_sigma;
  const Scalar value = closed_form_ei(mean(0), sigma, ystar, &d_mu, &d_sigma);
  if (g) {
    g->mean(0) += d_mu;
    if (!floored) g->cov(0, 0) += d_sigma / (Scalar(2) * sigma);
  }
  return value;
}

/// Joint draws f_i = mean + C ε_i with C the semidefinite Cholesky of cov; `row_fn(i, f_i)`
/// returns the per-sample value and writes ∂/∂f_i into its third argument.
template <typename Scalar, typename RowFn>
Scalar joint_mc(const Vector<Scalar>& mean, const Matrix<Scalar>& cov, const Matrix<Scalar>& eps, RowFn&& row_fn,
                MomentGrad<Scalar>* g) {
  const Index q = mean.size(), S = eps.rows();
  if (eps.cols() != q) throw InvalidArgument("base samples: width does not match the batch size");
  const Matrix<Scalar> C = psd_cholesky<Scalar>(cov);
  Matrix<Scalar> c_bar = Matrix<Scalar>::Zero(q, q);
  Vector<Scalar> f(q), f_bar(q);
  Scalar total(0);
  for (Index i = 0; i < S; ++i) {
    f = mean + C * eps.row(i).transpose();
    f_bar.setZero();
    total += row_fn(i, f, f_bar);
    if (g) {
      g->mean += f_bar / Scalar(S);
      c_bar.noalias() += f_bar * eps.row(i) / Scalar(S);
    }
  }
  if (g) g->cov += psd_cholesky_backward<Scalar>(C, c_bar);
  return total / Scalar(S);
}

/// (1/S) Σᵢ log softplus(maxⱼ fᵢⱼ − y*) over joint draws.
template <typename Scalar>
Scalar q_sei(const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar ystar, const Matrix<Scalar>& eps,
             MomentGrad<Scalar>* g) {
  auto row = [&](Index, const Vector<Scalar>& f, Vector<Scalar>& f_bar) {
    Index j;
    const Scalar top = f.maxCoeff(&j);
    f_bar(j) = log_softplus_grad(top - ystar);
    return log_softplus(top - ystar);
  };
  return joint_mc(mean, cov, eps, row, g);
}

/// (1/S) Σᵢ maxⱼ ReLU(fᵢⱼ − y*) over joint draws.
template <typename Scalar>
Scalar q_ei(const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar ystar, const Matrix<Scalar>& eps,
            MomentGrad<Scalar>* g) {
  auto row = [&](Index, const Vector<Scalar>& f, Vector<Scalar>& f_bar) {
    Index j;
    const Scalar top = f.maxCoeff(&j);
    if (top <= ystar) return Scalar(0);
    f_bar(j) = Scalar(1);
    return top - ystar;
  };
  return joint_mc(mean, cov, eps, row, g);
}

/// One-shot (batch) KG over points laid out as [x_1..x_q, x′_1..x′_S]:
/// (1/S) Σᵢ maxⱼ T(μ(x′ᵢ) + cov(x′ᵢ, xⱼ)·zᵢⱼ/(σ²(xⱼ) + σₙ²) − c⁺), zᵢ = C εᵢ, C = chol(Σ_XX).
template <typename Scalar>
Scalar kg(const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar noise, Index q, const Matrix<Scalar>& eps,
          Scalar c_plus, KgTransform transform, MomentGrad<Scalar>* g) {
  const Index S = eps.rows();
  if (mean.size() != q + S) throw InvalidArgument("kg: need one fantasy maximizer per base sample");
  if (eps.cols() != q) throw InvalidArgument("base samples: width does not match the batch size");
  const Matrix<Scalar> C = psd_cholesky<Scalar>(Matrix<Scalar>(cov.topLeftCorner(q, q)));
  Matrix<Scalar> c_bar = Matrix<Scalar>::Zero(q, q);
  const Vector<Scalar> denom = cov.diagonal().head(q).array() + noise;
  auto apply = [transform](Scalar a) { return transform == KgTransform::log_softplus ? log_softplus(a) : a; };
  auto apply_grad = [transform](Scalar a) {
    return transform == KgTransform::log_softplus ? log_softplus_grad(a) : Scalar(1);
  };
  Scalar total(0);
  for (Index i = 0; i < S; ++i) {
    const Vector<Scalar> z = C * eps.row(i).transpose();
    Index best = 0;
    Scalar best_arg = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < q; ++j) {
      const Scalar arg = mean(q + i) + cov(q + i, j) * z(j) / denom(j) - c_plus;
      if (arg > best_arg) {
        best_arg = arg;
        best = j;
      }
    }
    total += apply(best_arg);
    if (g) {
      const Scalar gb = apply_grad(best_arg) / Scalar(S);
      const Index j = best;
      const Scalar c = cov(q + i, j), dj = denom(j);
      g->mean(q + i) += gb;
      g->cov(q + i, j) += gb * z(j) / dj;
      const Scalar d_den = -gb * c * z(j) / (dj * dj);
      g->cov(j, j) += d_den;
      g->noise += d_den;
      c_bar.row(j).head(j + 1) += (gb * c / dj) * eps.row(i).head(j + 1);
    }
  }
  if (g) g->cov.topLeftCorner(q, q) += psd_cholesky_backward<Scalar>(C, c_bar);
  return total / Scalar(S);
}

}  // namespace moments

/// Evaluates a moment-level utility on the SVGP joint predictive over `points` and, when
/// `grad` is given, pushes its adjoints into the model (`grad`, `adj`) and `point_grad`.
template <typename Scalar, typename MomentFn>
Scalar svgp_moment_utility(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                           const Matrix<Scalar>& points, MomentFn&& fn, SvgpGradient<Scalar>* grad,
                           InducingAdjoint<Scalar>* adj, Matrix<Scalar>* point_grad) {
  const auto p = predictive(model, factor, points, true);
  if (!grad && !point_grad) return fn(p.mean, p.cov, model.hypers.noise_variance, nullptr);
  auto g = MomentGrad<Scalar>::zero(points.rows());
  const Scalar value = fn(p.mean, p.cov, model.hypers.noise_variance, &g);
  SvgpGradient<Scalar> scratch;
  InducingAdjoint<Scalar> scratch_adj;
  if (!grad) {
    scratch = SvgpGradient<Scalar>::zero(model.num_inducing(), model.dim());
    scratch_adj = InducingAdjoint<Scalar>::zero(model.num_inducing());
  }
  SvgpGradient<Scalar>& gr = grad ? *grad : scratch;
  InducingAdjoint<Scalar>& ad = grad ? *adj : scratch_adj;
  predictive_backward<Scalar>(model, factor, p, g.mean, &g.cov, nullptr, gr, ad, point_grad);
  gr.hypers.log_noise += g.noise * model.hypers.noise_variance;
  return value;
}

/// Expected log utility of `kind` for the query rows `X` (and fantasy maximizers `xps`
/// for KG kinds). Gradients flow to the model and, when given, to X and xps.
template <typename Scalar>
Scalar expected_log_utility(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                            const UtilityConfig<Scalar>& cfg, const Matrix<Scalar>& X, const Matrix<Scalar>* xps,
                            const BaseSamples<Scalar>* samples, SvgpGradient<Scalar>* grad, InducingAdjoint<Scalar>* adj,
                            Matrix<Scalar>* x_grad, Matrix<Scalar>* xp_grad) {
  const Index q = X.rows();
  const bool kg = is_kg(cfg.kind);
  if (q < 1) throw InvalidArgument("expected_log_utility: empty query batch");
  if ((cfg.kind == UtilityKind::sei || cfg.kind == UtilityKind::one_shot_skg) && q != 1) {
    throw InvalidArgument("expected_log_utility: single-point utility given a batch");
  }
  if (kg && !xps) throw InvalidArgument("expected_log_utility: KG utility needs fantasy maximizers");
  if (cfg.kind != UtilityKind::sei && !samples) throw InvalidArgument("expected_log_utility: base samples required");
  if (samples) samples->validate();
  Matrix<Scalar> points = X;
  if (kg) {
    if (xps->rows() != samples->count()) throw InvalidArgument("expected_log_utility: fantasy count mismatch");
    points.resize(q + xps->rows(), X.cols());
    points << X, *xps;
  }
  Matrix<Scalar> pg;
  const bool want_points = x_grad || xp_grad;
  if (want_points) pg = Matrix<Scalar>::Zero(points.rows(), points.cols());
  auto fn = [&](const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar noise, MomentGrad<Scalar>* g) {
    switch (cfg.kind) {
      case UtilityKind::sei: return moments::sei(mean, cov, cfg.incumbent, cfg.quad_points, g);
      case UtilityKind::q_sei: return moments::q_sei(mean, cov, cfg.incumbent, samples->eps, g);
      case UtilityKind::one_shot_skg:
      case UtilityKind::q_skg:
        return moments::kg(mean, cov, noise, q, samples->eps, cfg.c_plus, KgTransform::log_softplus, g);
    }
    return Scalar(0);
  };
  const Scalar value = svgp_moment_utility(model, factor, points, fn, grad, adj, want_points ? &pg : nullptr);
  if (x_grad) *x_grad += pg.topRows(q);
  if (xp_grad && kg) *xp_grad += pg.bottomRows(points.rows() - q);
  return value;
}

// Named single-purpose entry points.

template <typename Scalar>
Scalar expected_log_sei(Scalar mean, Scalar variance, Scalar ystar, int quad_points = 20) {
  const Vector<Scalar> m = Vector<Scalar>::Constant(1, mean);
  const Matrix<Scalar> c = Matrix<Scalar>::Constant(1, 1, variance);
  return moments::sei(m, c, ystar, quad_points, static_cast<MomentGrad<Scalar>*>(nullptr));
}

template <typename Scalar>
Scalar expected_log_sei(const SvgpModel<Scalar>& model, const Vector<Scalar>& x, Scalar ystar, int quad_points = 20) {
  const auto p = svgp_predict(model, x);
  return expected_log_sei(p.mean, p.variance, ystar, quad_points);
}

/// y_λ(x; ε) = μ_f(x) + σ_f(x)·ε.
template <typename Scalar>
Scalar fantasy_y(const SvgpModel<Scalar>& model, const Vector<Scalar>& x, Scalar eps) {
  const auto p = svgp_predict(model, x);
  return p.mean + std::sqrt(p.variance) * eps;
}

template <typename Scalar>
Scalar one_shot_skg_term(const SvgpModel<Scalar>& model, const Vector<Scalar>& x, const Vector<Scalar>& xp, Scalar eps,
                         Scalar c_plus) {
  const auto ctx = build_context(model, x);
  const Scalar y = ctx.mean + std::sqrt(ctx.variance) * eps;
  return log_softplus(fantasy_mean(ctx, model, y, xp) - c_plus);
}

/// (1/S) Σᵢ one_shot_skg_term(x, x′ᵢ, εᵢ), via one shared fantasy context.
template <typename Scalar>
Scalar expected_log_skg(const SvgpModel<Scalar>& model, const Vector<Scalar>& x, const Matrix<Scalar>& fantasy_xs,
                        const BaseSamples<Scalar>& samples, Scalar c_plus) {
  if (fantasy_xs.rows() != samples.count() || samples.width() != 1) {
    throw InvalidArgument("expected_log_skg: need S fantasy points and S × 1 base samples");
  }
  const auto ctx = build_context(model, x);
  const Vector<Scalar> ys = (ctx.mean + std::sqrt(ctx.variance) * samples.eps.col(0).array()).matrix();
  const Vector<Scalar> means = fantasy_means(ctx, model, ys, fantasy_xs);
  Scalar total(0);
  for (Index i = 0; i < means.size(); ++i) total += log_softplus(means(i) - c_plus);
  return total / Scalar(means.size());
}

template <typename Scalar>
Scalar expected_log_q_sei(const SvgpModel<Scalar>& model, const Matrix<Scalar>& X, Scalar ystar,
                          const BaseSamples<Scalar>& samples) {
  UtilityConfig<Scalar> cfg;
  cfg.kind = UtilityKind::q_sei;
  cfg.incumbent = ystar;
  return expected_log_utility<Scalar>(model, factor_inducing(model), cfg, X, nullptr, &samples, nullptr, nullptr,
                                      nullptr, nullptr);
}

template <typename Scalar>
Scalar expected_log_q_skg(const SvgpModel<Scalar>& model, const Matrix<Scalar>& X, const Matrix<Scalar>& fantasy_xs,
                          const BaseSamples<Scalar>& samples, Scalar c_plus) {
  UtilityConfig<Scalar> cfg;
  cfg.kind = UtilityKind::q_skg;
  cfg.c_plus = c_plus;
  return expected_log_utility<Scalar>(model, factor_inducing(model), cfg, X, &fantasy_xs, &samples, nullptr, nullptr,
                                      nullptr, nullptr);
}

}  // namespace eulbo
