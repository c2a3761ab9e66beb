#pragma once

#include "eulbo/exact_gp.hpp"

#include <cstdint>
#include <cstring>
#include <numbers>
#include <string>

namespace eulbo {

/// q(u) = N(mean, L Lᵀ) over inducing values at `inducing_points`, non-whitened.
template <typename Scalar = double>
struct VariationalState {
  Matrix<Scalar> inducing_points;  // m × d
  Vector<Scalar> mean;             // m
  Matrix<Scalar> cov_factor;       // m × m, lower triangular with positive diagonal

  Index size() const { return inducing_points.rows(); }
  Index dim() const { return inducing_points.cols(); }

  Matrix<Scalar> covariance() const {
    const Matrix<Scalar> L = cov_factor.template triangularView<Eigen::Lower>();
    return L * L.transpose();
  }

  void validate(const Bounds<Scalar>* bounds = nullptr, Scalar tol = Scalar(1e-12)) const {
    const Index m = size();
    if (m == 0) throw InvalidArgument("variational state: no inducing points");
    if (mean.size() != m || cov_factor.rows() != m || cov_factor.cols() != m) {
      throw InvalidArgument("variational state: shape mismatch");
    }
    if (!inducing_points.allFinite() || !mean.allFinite() || !cov_factor.allFinite()) {
      throw InvalidArgument("variational state: non-finite entry");
    }
    for (Index j = 0; j < m; ++j) {
      if (!(cov_factor(j, j) > 0)) throw InvalidArgument("variational state: covariance factor diagonal must be > 0");
      for (Index i = 0; i < j; ++i) {
        if (cov_factor(i, j) != 0) throw InvalidArgument("variational state: covariance factor must be lower triangular");
      }
    }
    if (bounds) {
      for (Index i = 0; i < m; ++i) {
        if (!bounds->contains(inducing_points.row(i).transpose(), tol)) {
          throw InvalidArgument("variational state: inducing point outside bounds");
        }
      }
    }
  }
};

template <typename Scalar = double>
struct SvgpModel {
  VariationalState<Scalar> state;
  Hyperparams<Scalar> hypers;
  KernelFamily family = KernelFamily::matern52;

  Index num_inducing() const { return state.size(); }
  Index dim() const { return state.dim(); }

  void validate(const Bounds<Scalar>* bounds = nullptr) const {
    hypers.validate();
    state.validate(bounds);
    if (hypers.dim() != state.dim()) throw InvalidArgument("svgp: hyperparameter / inducing dimension mismatch");
  }

  /// Content hash of every parameter; two models with equal parameters share a revision.
  std::uint64_t revision() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t w) {
      h ^= w;
      h *= 1099511628211ULL;
      h ^= h >> 29;
    };
    auto mix_scalar = [&](Scalar v) {
      std::uint64_t w = 0;
      std::memcpy(&w, &v, std::min(sizeof v, sizeof w));
      mix(w);
    };
    auto mix_matrix = [&](const auto& m) {
      mix(static_cast<std::uint64_t>(m.rows()));
      mix(static_cast<std::uint64_t>(m.cols()));
      for (Index i = 0; i < m.size(); ++i) mix_scalar(m.data()[i]);
    };
    mix_matrix(state.inducing_points);
    mix_matrix(state.mean);
    mix_matrix(state.cov_factor);
    mix_matrix(hypers.lengthscales);
    mix_scalar(hypers.outputscale);
    mix_scalar(hypers.noise_variance);
    mix(static_cast<std::uint64_t>(family));
    return h;
  }

  /// q(u) equal to the prior p(u) = N(0, K_ZZ): mean zero, covariance factor chol(K_ZZ).
  static SvgpModel from_prior(const Matrix<Scalar>& inducing, const Hyperparams<Scalar>& theta,
                              KernelFamily family) {
    const Matrix<Scalar> K = kernel_matrix(inducing, theta, family);
    const auto chol = jittered_cholesky<Scalar>(K, theta.outputscale, false);
    SvgpModel model;
    model.state.inducing_points = inducing;
    model.state.mean = Vector<Scalar>::Zero(inducing.rows());
    model.state.cov_factor = chol.llt.matrixL();
    model.hypers = theta;
    model.family = family;
    return model;
  }
};

/// Gradient of a scalar objective with respect to every SVGP parameter block.
template <typename Scalar = double>
struct SvgpGradient {
  Vector<Scalar> mean;
  Matrix<Scalar> cov_factor;  // lower triangular
  Matrix<Scalar> inducing;
  HyperGradient<Scalar> hypers;

  static SvgpGradient zero(Index m, Index d) {
    return {Vector<Scalar>::Zero(m), Matrix<Scalar>::Zero(m, m), Matrix<Scalar>::Zero(m, d),
            HyperGradient<Scalar>::zero(d)};
  }

  SvgpGradient& operator+=(const SvgpGradient& o) {
    mean += o.mean;
    cov_factor += o.cov_factor;
    inducing += o.inducing;
    hypers += o.hypers;
    return *this;
  }

  /// Name of the first block holding a non-finite entry, or empty.
  std::string non_finite_block() const {
    if (!mean.allFinite()) return "variational_mean";
    if (!cov_factor.allFinite()) return "variational_cov_factor";
    if (!inducing.allFinite()) return "inducing_points";
    if (!hypers.log_lengthscales.allFinite()) return "log_lengthscales";
    if (!std::isfinite(hypers.log_outputscale)) return "log_outputscale";
    if (!std::isfinite(hypers.log_noise)) return "log_noise";
    return {};
  }

  bool all_finite() const { return non_finite_block().empty(); }
};

/// Factorization of K_ZZ + jitter shared by every quantity computed for one model.
template <typename Scalar = double>
struct InducingFactor {
  JitteredCholesky<Scalar> chol;
  Vector<Scalar> alpha;  // K_ZZ⁻¹ m
};

template <typename Scalar>
InducingFactor<Scalar> factor_inducing(const SvgpModel<Scalar>& model) {
  const Matrix<Scalar> K = kernel_matrix(model.state.inducing_points, model.hypers, model.family);
  InducingFactor<Scalar> f;
  f.chol = jittered_cholesky<Scalar>(K, model.hypers.outputscale, false);
  f.alpha = f.chol.solve(model.state.mean);
  return f;
}

/// Pending adjoints with respect to K_ZZ (including its jitter) and S, flushed into an
/// SvgpGradient by `finish_inducing_adjoint` once all terms have been accumulated.
template <typename Scalar = double>
struct InducingAdjoint {
  Matrix<Scalar> kzz;
  Matrix<Scalar> cov;

  static InducingAdjoint zero(Index m) { return {Matrix<Scalar>::Zero(m, m), Matrix<Scalar>::Zero(m, m)}; }
};

template <typename Scalar>
void finish_inducing_adjoint(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                             const InducingAdjoint<Scalar>& adj, SvgpGradient<Scalar>& grad) {
  const Matrix<Scalar>& L = model.state.cov_factor;
  grad.cov_factor += ((adj.cov + adj.cov.transpose()) * L).template triangularView<Eigen::Lower>().toDenseMatrix();
  kernel_matrix_backward<Scalar>(model.state.inducing_points, model.state.inducing_points, model.hypers, model.family,
                                 adj.kzz, &grad.inducing, &grad.inducing, grad.hypers);
  grad.hypers.log_outputscale += factor.chol.jitter * adj.kzz.trace();
}

/// Variational predictive moments of f at a set of points, with the
/// intermediates the backward pass needs.
template <typename Scalar = double>
struct Predictive {
  Matrix<Scalar> points;  // p × d
  Matrix<Scalar> kxz;     // p × m
  Matrix<Scalar> proj;    // p × m, K_xZ K_ZZ⁻¹
  Vector<Scalar> mean;    // p
  Vector<Scalar> var;     // p, diagonal of cov (unclamped)
  Matrix<Scalar> cov;     // p × p, only when requested
  bool has_cov = false;
};

template <typename Scalar>
Predictive<Scalar> predictive(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                              const Matrix<Scalar>& points, bool full_cov) {
  if (points.cols() != model.dim()) throw InvalidArgument("svgp predict: point dimension mismatch");
  Predictive<Scalar> p;
  p.points = points;
  p.kxz = kernel_matrix(points, model.state.inducing_points, model.hypers, model.family);
  p.proj = factor.chol.solve(p.kxz.transpose()).transpose();
  p.mean = p.proj * model.state.mean;
  const Matrix<Scalar> AL = p.proj * model.state.cov_factor.template triangularView<Eigen::Lower>();
  if (full_cov) {
    p.cov = kernel_matrix(points, model.hypers, model.family) - p.proj * p.kxz.transpose() + AL * AL.transpose();
    p.cov = Scalar(0.5) * (p.cov + p.cov.transpose());
    p.var = p.cov.diagonal();
    p.has_cov = true;
  } else {
    p.var = Vector<Scalar>::Constant(points.rows(), model.hypers.outputscale) -
            (p.proj.array() * p.kxz.array()).rowwise().sum().matrix() + AL.rowwise().squaredNorm();
  }
  return p;
}

/// Reverse-mode step through `predictive`. `cov_bar` is a symmetric adjoint of the full
/// covariance (or null), `var_bar` an adjoint of the diagonal only (or null).
/// Model adjoints go into `grad` / `adj`; point adjoints into `point_grad` when given.
template <typename Scalar>
void predictive_backward(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                         const Predictive<Scalar>& p, const Vector<Scalar>& mean_bar, const Matrix<Scalar>* cov_bar,
                         const Vector<Scalar>* var_bar, SvgpGradient<Scalar>& grad, InducingAdjoint<Scalar>& adj,
                         Matrix<Scalar>* point_grad) {
  const Index np = p.points.rows();
  Matrix<Scalar> sigma_bar = Matrix<Scalar>::Zero(np, np);
  if (cov_bar) sigma_bar += Scalar(0.5) * (*cov_bar + cov_bar->transpose());
  if (var_bar) sigma_bar.diagonal() += *var_bar;

  const Matrix<Scalar> S = model.state.covariance();
  grad.mean += p.proj.transpose() * mean_bar;

  // Σ = K_pp − A K_xzᵀ + A S Aᵀ with A = K_xz K⁻¹; μ = A m.
  const Matrix<Scalar> sigma_a = sigma_bar * p.proj;
  Matrix<Scalar> a_bar = mean_bar * model.state.mean.transpose() - sigma_bar * p.kxz + Scalar(2) * sigma_a * S;
  adj.cov += p.proj.transpose() * sigma_a;

  const Matrix<Scalar> a_bar_kinv = factor.chol.solve(a_bar.transpose()).transpose();  // Ā K⁻¹
  Matrix<Scalar> kxz_bar = a_bar_kinv - sigma_a;
  adj.kzz -= p.proj.transpose() * a_bar_kinv;

  kernel_matrix_backward<Scalar>(p.points, model.state.inducing_points, model.hypers, model.family, kxz_bar,
                                 point_grad, &grad.inducing, grad.hypers);
  if (cov_bar) {
    kernel_matrix_backward<Scalar>(p.points, p.points, model.hypers, model.family, sigma_bar, point_grad, point_grad,
                                   grad.hypers);
  } else {
    grad.hypers.log_outputscale += model.hypers.outputscale * sigma_bar.diagonal().sum();
  }
}

/// Variational marginal at a single point.
template <typename Scalar>
PosteriorGaussian<Scalar> svgp_predict(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                                       const Vector<Scalar>& x) {
  const Matrix<Scalar> pts = x.transpose();
  const auto p = predictive(model, factor, pts, false);
  return {p.mean(0), std::max(p.var(0), Scalar(0))};
}

template <typename Scalar>
PosteriorGaussian<Scalar> svgp_predict(const SvgpModel<Scalar>& model, const Vector<Scalar>& x) {
  return svgp_predict(model, factor_inducing(model), x);
}

template <typename Scalar = double>
struct ObjectiveValue {
  Scalar value = Scalar(0);
  SvgpGradient<Scalar> grad;
};

namespace detail {

template <typename Scalar>
Scalar kl_to_prior(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor, Matrix<Scalar>* kinv_l) {
  const Index m = model.num_inducing();
  const Matrix<Scalar>& L = model.state.cov_factor;
  const Matrix<Scalar> half = factor.chol.llt.matrixL().solve(L.template triangularView<Eigen::Lower>().toDenseMatrix());
  const Scalar trace = half.squaredNorm();
  const Scalar maha = model.state.mean.dot(factor.alpha);
  const Scalar logdet_s = Scalar(2) * L.diagonal().array().log().sum();
  if (kinv_l) *kinv_l = factor.chol.solve(L.template triangularView<Eigen::Lower>().toDenseMatrix());
  return Scalar(0.5) * (trace + maha - Scalar(m) + factor.chol.log_det() - logdet_s);
}

}  // namespace detail

/// Minibatch ELBO: (n_total/|batch|)·Σ E_q[log N(yᵢ | f(xᵢ), σₙ²)] − KL(q(u) ‖ p(u)).
/// Adds its model adjoints into `grad` / `adj` when `grad` is non-null.
template <typename Scalar>
Scalar elbo_accumulate(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                       const Dataset<Scalar>& batch, Index n_total, SvgpGradient<Scalar>* grad,
                       InducingAdjoint<Scalar>* adj) {
  const Index b = batch.size();
  if (b == 0) throw InvalidArgument("elbo: empty batch");
  if (n_total < b) throw InvalidArgument("elbo: n_total smaller than the batch");
  if (batch.dim() != model.dim()) throw InvalidArgument("elbo: batch dimension mismatch");
  const Scalar noise = model.hypers.noise_variance;
  const Scalar scale = Scalar(n_total) / Scalar(b);
  const auto p = predictive(model, factor, batch.inputs, false);
  const Vector<Scalar> resid = batch.targets - p.mean;
  const Scalar sq = resid.squaredNorm() + p.var.sum();
  const Scalar ell =
      scale * (Scalar(-0.5) * Scalar(b) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * noise) - sq / (2 * noise));
  Matrix<Scalar> kinv_l;
  const Scalar kl = detail::kl_to_prior(model, factor, grad ? &kinv_l : nullptr);
  if (grad) {
    const Vector<Scalar> mean_bar = (scale / noise) * resid;
    const Vector<Scalar> var_bar = Vector<Scalar>::Constant(b, -scale / (2 * noise));
    predictive_backward<Scalar>(model, factor, p, mean_bar, nullptr, &var_bar, *grad, *adj, nullptr);
    grad->hypers.log_noise += noise * scale * (Scalar(-0.5) * Scalar(b) / noise + sq / (2 * noise * noise));
    // −KL terms.
    const Index m = model.num_inducing();
    grad->mean -= factor.alpha;
    const Matrix<Scalar> kinv = factor.chol.solve(Matrix<Scalar>::Identity(m, m));
    adj->kzz += Scalar(0.5) * (kinv_l * kinv_l.transpose() + factor.alpha * factor.alpha.transpose() - kinv);
    Matrix<Scalar> l_bar = -kinv_l.template triangularView<Eigen::Lower>().toDenseMatrix();
    l_bar.diagonal() += model.state.cov_factor.diagonal().cwiseInverse();
    grad->cov_factor += l_bar;
  }
  return ell - kl;
}

template <typename Scalar>
Scalar elbo(const SvgpModel<Scalar>& model, const Dataset<Scalar>& batch, Index n_total) {
  return elbo_accumulate<Scalar>(model, factor_inducing(model), batch, n_total, nullptr, nullptr);
}

/// ELBO value and its gradient with respect to (mean, cov_factor, Z, log-θ).
template <typename Scalar>
ObjectiveValue<Scalar> elbo_gradients(const SvgpModel<Scalar>& model, const Dataset<Scalar>& batch, Index n_total) {
  const auto factor = factor_inducing(model);
  ObjectiveValue<Scalar> out;
  out.grad = SvgpGradient<Scalar>::zero(model.num_inducing(), model.dim());
  auto adj = InducingAdjoint<Scalar>::zero(model.num_inducing());
  out.value = elbo_accumulate<Scalar>(model, factor, batch, n_total, &out.grad, &adj);
  finish_inducing_adjoint(model, factor, adj, out.grad);
  if (const auto block = out.grad.non_finite_block(); !block.empty()) {
    throw NumericalError("elbo_gradients: non-finite gradient in " + block);
  }
  return out;
}

}  // namespace eulbo
