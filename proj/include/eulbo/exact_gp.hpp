#pragma once

#include "eulbo/cholesky.hpp"
#include "eulbo/kernel.hpp"
#include "eulbo/lbfgs.hpp"

#include <cmath>
#include <numbers>

namespace eulbo {

/// Ordered observations with box-bounded inputs.
template <typename Scalar = double>
struct Dataset {
  Matrix<Scalar> inputs;   // n × d
  Vector<Scalar> targets;  // n
  Bounds<Scalar> bounds;

  Index size() const { return inputs.rows(); }
  Index dim() const { return inputs.cols(); }

  void validate(Scalar tol = Scalar(1e-12)) const {
    bounds.validate();
    if (inputs.cols() != bounds.dim()) throw InvalidArgument("dataset: input dimension does not match bounds");
    if (inputs.rows() != targets.size()) throw InvalidArgument("dataset: inputs/targets length mismatch");
    if (!targets.allFinite()) throw InvalidArgument("dataset: non-finite target");
    for (Index i = 0; i < inputs.rows(); ++i) {
      if (!bounds.contains(inputs.row(i).transpose(), tol)) throw InvalidArgument("dataset: input outside bounds");
    }
  }

  Dataset subset(const std::vector<Index>& rows) const {
    Dataset out{Matrix<Scalar>(static_cast<Index>(rows.size()), dim()),
                Vector<Scalar>(static_cast<Index>(rows.size())), bounds};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.inputs.row(static_cast<Index>(i)) = inputs.row(rows[i]);
      out.targets(static_cast<Index>(i)) = targets(rows[i]);
    }
    return out;
  }

  Scalar best_target() const { return targets.size() ? targets.maxCoeff() : -std::numeric_limits<Scalar>::infinity(); }
};

template <typename Scalar = double>
struct PosteriorGaussian {
  Scalar mean = Scalar(0);
  Scalar variance = Scalar(0);
};

/// Exact GP posterior with the factorization of K_XX + σₙ²I cached for repeated queries.
template <typename Scalar = double>
class ExactGpPosterior {
 public:
  ExactGpPosterior(const Dataset<Scalar>& data, const Hyperparams<Scalar>& theta, KernelFamily family)
      : inputs_(data.inputs), theta_(theta), family_(family) {
    theta_.validate();
    if (data.size() > 0 && data.dim() != theta.dim()) throw InvalidArgument("exact gp: dimension mismatch");
    if (data.size() == 0) return;
    Matrix<Scalar> K = kernel_matrix(inputs_, theta_, family_);
    K.diagonal().array() += theta_.noise_variance;
    chol_ = jittered_cholesky<Scalar>(K, theta_.outputscale, true);
    alpha_ = chol_.solve(data.targets);
  }

  PosteriorGaussian<Scalar> predict(const Vector<Scalar>& x) const { return predict(x, nullptr, nullptr); }

  /// Posterior marginal at x; optionally the gradients of mean and variance with respect to x.
  PosteriorGaussian<Scalar> predict(const Vector<Scalar>& x, Vector<Scalar>* dmean, Vector<Scalar>* dvar) const {
    if (x.size() != theta_.dim()) throw InvalidArgument("exact gp: query dimension mismatch");
    const Scalar prior = theta_.outputscale;
    if (inputs_.rows() == 0) {
      if (dmean) *dmean = Vector<Scalar>::Zero(x.size());
      if (dvar) *dvar = Vector<Scalar>::Zero(x.size());
      return {Scalar(0), prior};
    }
    Vector<Scalar> k;
    Matrix<Scalar> dk;
    const bool need_grad = dmean || dvar;
    kernel_vector_with_gradient(x, inputs_, theta_, family_, k, need_grad ? &dk : nullptr);
    const Vector<Scalar> v = chol_.solve(k);
    PosteriorGaussian<Scalar> out{k.dot(alpha_), std::max(prior - k.dot(v), Scalar(0))};
    if (dmean) *dmean = dk.transpose() * alpha_;
    if (dvar) *dvar = Scalar(-2) * dk.transpose() * v;
    return out;
  }

  struct Joint {
    Matrix<Scalar> points;
    Matrix<Scalar> kpx;   // p × n
    Matrix<Scalar> proj;  // p × n, K_px (K_XX + σₙ²I)⁻¹
    Vector<Scalar> mean;
    Matrix<Scalar> cov;
  };

  /// Joint posterior over the rows of `points`.
  Joint joint(const Matrix<Scalar>& points) const {
    if (points.cols() != theta_.dim()) throw InvalidArgument("exact gp: query dimension mismatch");
    Joint j;
    j.points = points;
    j.cov = kernel_matrix(points, theta_, family_);
    if (inputs_.rows() == 0) {
      j.mean = Vector<Scalar>::Zero(points.rows());
      return j;
    }
    j.kpx = kernel_matrix(points, inputs_, theta_, family_);
    j.proj = chol_.solve(j.kpx.transpose()).transpose();
    j.mean = j.kpx * alpha_;
    j.cov -= j.proj * j.kpx.transpose();
    j.cov = Scalar(0.5) * (j.cov + j.cov.transpose());
    return j;
  }

  /// Accumulates into `point_grad` the gradient of a scalar with adjoints (mean_bar, cov_bar)
  /// on the joint moments, with respect to the query points.
  void joint_backward(const Joint& j, const Vector<Scalar>& mean_bar, const Matrix<Scalar>& cov_bar,
                      Matrix<Scalar>& point_grad) const {
    const Matrix<Scalar> g = Scalar(0.5) * (cov_bar + cov_bar.transpose());
    HyperGradient<Scalar> unused = HyperGradient<Scalar>::zero(theta_.dim());
    kernel_matrix_backward<Scalar>(j.points, j.points, theta_, family_, g, &point_grad, &point_grad, unused);
    if (inputs_.rows() == 0) return;
    const Matrix<Scalar> kpx_bar = mean_bar * alpha_.transpose() - Scalar(2) * g * j.proj;
    kernel_matrix_backward<Scalar>(j.points, inputs_, theta_, family_, kpx_bar, &point_grad, nullptr, unused);
  }

  const Hyperparams<Scalar>& hyperparams() const { return theta_; }

 private:
  Matrix<Scalar> inputs_;
  Hyperparams<Scalar> theta_;
  KernelFamily family_;
  JitteredCholesky<Scalar> chol_;
  Vector<Scalar> alpha_;
};

template <typename Scalar>
PosteriorGaussian<Scalar> exact_gp_posterior(const Dataset<Scalar>& data, const Hyperparams<Scalar>& theta,
                                             const Vector<Scalar>& x, KernelFamily family = KernelFamily::matern52) {
  return ExactGpPosterior<Scalar>(data, theta, family).predict(x);
}

template <typename Scalar = double>
struct LmlResult {
  Scalar value;
  HyperGradient<Scalar> gradient;
};

/// log N(y; 0, K_XX + σₙ²I) and its gradient with respect to the log-hyperparameters.
template <typename Scalar>
LmlResult<Scalar> log_marginal_likelihood_with_gradient(const Dataset<Scalar>& data, const Hyperparams<Scalar>& theta,
                                                        KernelFamily family, bool need_gradient = true) {
  const Index n = data.size();
  if (n < 1) throw InvalidArgument("log_marginal_likelihood: needs at least one observation");
  theta.validate();
  Matrix<Scalar> K = kernel_matrix(data.inputs, theta, family);
  K.diagonal().array() += theta.noise_variance;
  const auto chol = jittered_cholesky<Scalar>(K, theta.outputscale, true);
  const Vector<Scalar> alpha = chol.solve(data.targets);
  LmlResult<Scalar> out;
  out.value = Scalar(-0.5) * data.targets.dot(alpha) - Scalar(0.5) * chol.log_det() -
              Scalar(0.5) * Scalar(n) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  out.gradient = HyperGradient<Scalar>::zero(theta.dim());
  if (!need_gradient) return out;
  const Matrix<Scalar> Kinv = chol.solve(Matrix<Scalar>::Identity(n, n));
  const Matrix<Scalar> adjoint = Scalar(0.5) * (alpha * alpha.transpose() - Kinv);
  kernel_matrix_backward<Scalar>(data.inputs, data.inputs, theta, family, adjoint, nullptr, nullptr, out.gradient);
  const Scalar trace = adjoint.trace();
  out.gradient.log_noise = trace * theta.noise_variance;
  out.gradient.log_outputscale += trace * chol.jitter;  // jitter scales with the outputscale
  return out;
}

template <typename Scalar>
Scalar log_marginal_likelihood(const Dataset<Scalar>& data, const Hyperparams<Scalar>& theta,
                               KernelFamily family = KernelFamily::matern52) {
  return log_marginal_likelihood_with_gradient(data, theta, family, false).value;
}

/// Admissible ranges for hyperparameters, in natural units (inputs live in the unit cube).
template <typename Scalar = double>
struct HyperparamBox {
  Scalar lengthscale_min = Scalar(1e-2);
  Scalar lengthscale_max = Scalar(1e2);
  Scalar outputscale_min = Scalar(1e-3);
  Scalar outputscale_max = Scalar(1e2);
  Scalar noise_min = Scalar(1e-6);
  Scalar noise_max = Scalar(1e1);

  void log_limits(Index d, Vector<Scalar>& lo, Vector<Scalar>& hi) const {
    lo.resize(d + 2);
    hi.resize(d + 2);
    lo.head(d).setConstant(std::log(lengthscale_min));
    hi.head(d).setConstant(std::log(lengthscale_max));
    lo(d) = std::log(outputscale_min);
    hi(d) = std::log(outputscale_max);
    lo(d + 1) = std::log(noise_min);
    hi(d + 1) = std::log(noise_max);
  }

  Hyperparams<Scalar> clamp(const Hyperparams<Scalar>& theta) const {
    Vector<Scalar> lo, hi;
    log_limits(theta.dim(), lo, hi);
    return Hyperparams<Scalar>::from_log(theta.to_log().cwiseMax(lo).cwiseMin(hi));
  }
};

/// Type-II maximum likelihood over log-hyperparameters (box-projected L-BFGS).
template <typename Scalar>
Hyperparams<Scalar> fit_exact_hyperparams(const Dataset<Scalar>& data, const Hyperparams<Scalar>& theta_init,
                                          KernelFamily family = KernelFamily::matern52,
                                          const HyperparamBox<Scalar>& box = {}, const LbfgsOptions& opts = {}) {
  if (data.size() < 2) throw InvalidArgument("fit_exact_hyperparams: needs at least two observations");
  const Index d = theta_init.dim();
  Vector<Scalar> lo, hi;
  box.log_limits(d, lo, hi);
  auto objective = [&](const Vector<Scalar>& z, Vector<Scalar>& grad) -> Scalar {
    const auto res = log_marginal_likelihood_with_gradient(data, Hyperparams<Scalar>::from_log(z), family);
    grad = res.gradient.to_vector();
    return res.value;
  };
  const Vector<Scalar> z0 = box.clamp(theta_init).to_log();
  const auto res = lbfgs_maximize<Scalar>(objective, z0, lo, hi, opts);
  return Hyperparams<Scalar>::from_log(res.x);
}

}  // namespace eulbo
