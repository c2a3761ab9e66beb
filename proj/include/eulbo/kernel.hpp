#pragma once

#include "eulbo/types.hpp"

#include <cmath>
#include <string>
#include <string_view>

namespace eulbo {

enum class KernelFamily { rbf, matern52 };

inline std::string_view to_string(KernelFamily family) {
  return family == KernelFamily::rbf ? "rbf" : "matern52";
}

inline KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "matern52") return KernelFamily::matern52;
  throw InvalidArgument("unknown kernel family: " + std::string(name));
}

/// ARD kernel hyperparameters together with the Gaussian observation noise.
template <typename Scalar = double>
struct Hyperparams {
  Vector<Scalar> lengthscales;
  Scalar outputscale = Scalar(1);
  Scalar noise_variance = Scalar(1e-2);

  static Hyperparams isotropic(Index d, Scalar lengthscale, Scalar outputscale, Scalar noise) {
    return {Vector<Scalar>::Constant(d, lengthscale), outputscale, noise};
  }

  Index dim() const { return lengthscales.size(); }

  void validate() const {
    if (lengthscales.size() == 0) throw InvalidArgument("hyperparams: no lengthscales");
    for (Index i = 0; i < lengthscales.size(); ++i) {
      if (!std::isfinite(lengthscales(i)) || !(lengthscales(i) > 0)) {
        throw InvalidArgument("hyperparams: lengthscales must be finite and positive");
      }
    }
    if (!std::isfinite(outputscale) || !(outputscale > 0)) throw InvalidArgument("hyperparams: bad outputscale");
    if (!std::isfinite(noise_variance) || !(noise_variance > 0)) throw InvalidArgument("hyperparams: bad noise");
  }

  /// Packs [log lengthscales..., log outputscale, log noise].
  Vector<Scalar> to_log() const {
    Vector<Scalar> v(dim() + 2);
    v.head(dim()) = lengthscales.array().log().matrix();
    v(dim()) = std::log(outputscale);
    v(dim() + 1) = std::log(noise_variance);
    return v;
  }

  static Hyperparams from_log(const Vector<Scalar>& v) {
    const Index d = v.size() - 2;
    if (d < 1) throw InvalidArgument("hyperparams: log vector too short");
    return {v.head(d).array().exp().matrix(), std::exp(v(d)), std::exp(v(d + 1))};
  }
};

/// Gradient with respect to the log-transformed hyperparameters.
template <typename Scalar = double>
struct HyperGradient {
  Vector<Scalar> log_lengthscales;
  Scalar log_outputscale = Scalar(0);
  Scalar log_noise = Scalar(0);

  static HyperGradient zero(Index d) { return {Vector<Scalar>::Zero(d), Scalar(0), Scalar(0)}; }

  Vector<Scalar> to_vector() const {
    Vector<Scalar> v(log_lengthscales.size() + 2);
    v << log_lengthscales, log_outputscale, log_noise;
    return v;
  }

  HyperGradient& operator+=(const HyperGradient& other) {
    log_lengthscales += other.log_lengthscales;
    log_outputscale += other.log_outputscale;
    log_noise += other.log_noise;
    return *this;
  }
};

namespace detail {

/// Unit-outputscale kernel profile g(r²) and its derivative dg/d(r²), where r² is
/// the lengthscale-scaled squared distance.
template <typename Scalar>
inline void kernel_profile(KernelFamily family, Scalar r2, Scalar& value, Scalar& d_r2) {
  using std::exp;
  using std::sqrt;
  if (family == KernelFamily::rbf) {
    value = exp(Scalar(-0.5) * r2);
    d_r2 = Scalar(-0.5) * value;
    return;
  }
  const Scalar sqrt5 = sqrt(Scalar(5));
  const Scalar r = sqrt(std::max(r2, Scalar(0)));
  const Scalar e = exp(-sqrt5 * r);
  value = (Scalar(1) + sqrt5 * r + Scalar(5) / Scalar(3) * r2) * e;
  // d/dr = -(5/3) r (1 + sqrt5 r) e, and d/dr² = (d/dr) / 2r, finite at r = 0.
  d_r2 = Scalar(-5) / Scalar(6) * (Scalar(1) + sqrt5 * r) * e;
}

template <typename Scalar, typename D1, typename D2>
inline Scalar scaled_sq_dist(const Eigen::MatrixBase<D1>& x1, const Eigen::MatrixBase<D2>& x2,
                             const Vector<Scalar>& lengthscales) {
  Scalar r2(0);
  for (Index k = 0; k < lengthscales.size(); ++k) {
    const Scalar diff = (x1(k) - x2(k)) / lengthscales(k);
    r2 += diff * diff;
  }
  return r2;
}

}  // namespace detail

template <typename Scalar, typename D1, typename D2>
Scalar kernel_eval(const Eigen::MatrixBase<D1>& x1, const Eigen::MatrixBase<D2>& x2, const Hyperparams<Scalar>& theta,
                   KernelFamily family) {
  if (x1.size() != theta.dim() || x2.size() != theta.dim()) {
    throw InvalidArgument("kernel_eval: input dimension does not match lengthscales");
  }
  Scalar g, dg;
  detail::kernel_profile(family, detail::scaled_sq_dist<Scalar>(x1, x2, theta.lengthscales), g, dg);
  return theta.outputscale * g;
}

/// Cross-covariance matrix with entry (i, j) = k(X1.row(i), X2.row(j)).
template <typename Scalar>
Matrix<Scalar> kernel_matrix(const Matrix<Scalar>& X1, const Matrix<Scalar>& X2, const Hyperparams<Scalar>& theta,
                             KernelFamily family) {
  if (X1.cols() != theta.dim() || X2.cols() != theta.dim()) {
    throw InvalidArgument("kernel_matrix: column count does not match lengthscales");
  }
  const Matrix<Scalar> S1 = X1.array().rowwise() / theta.lengthscales.transpose().array();
  const Matrix<Scalar> S2 = X2.array().rowwise() / theta.lengthscales.transpose().array();
  Matrix<Scalar> K(X1.rows(), X2.rows());
  Scalar g, dg;
  for (Index j = 0; j < S2.rows(); ++j) {
    for (Index i = 0; i < S1.rows(); ++i) {
      detail::kernel_profile(family, (S1.row(i) - S2.row(j)).squaredNorm(), g, dg);
      K(i, j) = theta.outputscale * g;
    }
  }
  return K;
}

/// Symmetric kernel matrix of a single point set (fills both triangles from one pass).
template <typename Scalar>
Matrix<Scalar> kernel_matrix(const Matrix<Scalar>& X, const Hyperparams<Scalar>& theta, KernelFamily family) {
  if (X.cols() != theta.dim()) throw InvalidArgument("kernel_matrix: column count does not match lengthscales");
  const Matrix<Scalar> S = X.array().rowwise() / theta.lengthscales.transpose().array();
  const Index n = X.rows();
  Matrix<Scalar> K(n, n);
  Scalar g, dg;
  for (Index j = 0; j < n; ++j) {
    K(j, j) = theta.outputscale;
    for (Index i = j + 1; i < n; ++i) {
      detail::kernel_profile(family, (S.row(i) - S.row(j)).squaredNorm(), g, dg);
      K(i, j) = K(j, i) = theta.outputscale * g;
    }
  }
  return K;
}

/// Reverse-mode step through K = kernel_matrix(X1, X2): given dL/dK in `adjoint`,
/// accumulates dL/dX1, dL/dX2 (either may be null, or alias each other when X1 and X2
/// are the same point set) and the log-lengthscale / log-outputscale gradients.
template <typename Scalar>
void kernel_matrix_backward(const Matrix<Scalar>& X1, const Matrix<Scalar>& X2, const Hyperparams<Scalar>& theta,
                            KernelFamily family, const Matrix<Scalar>& adjoint, Matrix<Scalar>* grad_X1,
                            Matrix<Scalar>* grad_X2, HyperGradient<Scalar>& grad_theta) {
  const Index d = theta.dim();
  const Vector<Scalar> inv_l2 = theta.lengthscales.array().square().inverse().matrix();
  Vector<Scalar> diff(d);
  Scalar g, dg;
  for (Index j = 0; j < X2.rows(); ++j) {
    for (Index i = 0; i < X1.rows(); ++i) {
      const Scalar a = adjoint(i, j);
      if (a == Scalar(0)) continue;
      diff = (X1.row(i) - X2.row(j)).transpose();
      const Scalar r2 = diff.cwiseAbs2().dot(inv_l2);
      detail::kernel_profile(family, r2, g, dg);
      grad_theta.log_outputscale += a * theta.outputscale * g;
      // dk/dr² scaled by the incoming adjoint.
      const Scalar w = a * theta.outputscale * dg;
      if (w == Scalar(0)) continue;
      for (Index k = 0; k < d; ++k) {
        const Scalar t = diff(k) * inv_l2(k);
        grad_theta.log_lengthscales(k) += w * Scalar(-2) * diff(k) * t;
        if (grad_X1) (*grad_X1)(i, k) += w * Scalar(2) * t;
        if (grad_X2) (*grad_X2)(j, k) -= w * Scalar(2) * t;
      }
    }
  }
}

/// Kernel vector k(x, X.row(i)), vectorized over rows without per-row temporaries.
template <typename Scalar, typename Derived>
Vector<Scalar> kernel_vector(const Eigen::MatrixBase<Derived>& x, const Matrix<Scalar>& X, const Hyperparams<Scalar>& theta,
                             KernelFamily family) {
  const Index d = theta.dim();
  if (x.size() != d || X.cols() != d) throw InvalidArgument("kernel_vector: dimension mismatch");
  Eigen::Array<Scalar, Eigen::Dynamic, 1> r2 = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(X.rows());
  for (Index k = 0; k < d; ++k) r2 += ((X.col(k).array() - x(k)) / theta.lengthscales(k)).square();
  if (family == KernelFamily::rbf) return (theta.outputscale * (Scalar(-0.5) * r2).exp()).matrix();
  const Scalar sqrt5 = std::sqrt(Scalar(5));
  const auto r = r2.sqrt();
  return (theta.outputscale * (Scalar(1) + sqrt5 * r + Scalar(5) / Scalar(3) * r2) * (-sqrt5 * r).exp()).matrix();
}

/// Kernel vector k(x, X.row(i)) and its Jacobian with respect to x (n × d).
template <typename Scalar, typename Derived>
void kernel_vector_with_gradient(const Eigen::MatrixBase<Derived>& x, const Matrix<Scalar>& X,
                                 const Hyperparams<Scalar>& theta, KernelFamily family, Vector<Scalar>& k,
                                 Matrix<Scalar>* dk_dx) {
  const Index n = X.rows();
  const Index d = theta.dim();
  if (x.size() != d || X.cols() != d) throw InvalidArgument("kernel_vector: dimension mismatch");
  const Vector<Scalar> inv_l2 = theta.lengthscales.array().square().inverse().matrix();
  k.resize(n);
  if (dk_dx) dk_dx->resize(n, d);
  Scalar g, dg;
  for (Index i = 0; i < n; ++i) {
    const Vector<Scalar> diff = x - X.row(i).transpose();
    detail::kernel_profile(family, diff.cwiseAbs2().dot(inv_l2), g, dg);
    k(i) = theta.outputscale * g;
    if (dk_dx) dk_dx->row(i) = (Scalar(2) * theta.outputscale * dg) * diff.cwiseProduct(inv_l2).transpose();
  }
}

}  // namespace eulbo
