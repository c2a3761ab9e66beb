#pragma once

#include "eulbo/types.hpp"

#include <cmath>
#include <sstream>

namespace eulbo {

/// Relative jitter ladder: 1e-8 .. 1e-4, multiplied by the caller's scale (the outputscale).
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

template <typename Scalar = double>
struct JitteredCholesky {
  Eigen::LLT<Matrix<Scalar>> llt;
  Scalar jitter = Scalar(0);  // absolute jitter that was added to the diagonal

  Index size() const { return llt.matrixLLT().rows(); }
  auto matrix_l() const { return llt.matrixL(); }

  template <typename Rhs>
  Matrix<Scalar> solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return llt.solve(rhs);
  }

  Scalar log_det() const {
    return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  }
};

namespace detail {

template <typename Scalar>
bool factor_ok(const Eigen::LLT<Matrix<Scalar>>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal();
  for (Index i = 0; i < diag.size(); ++i) {
    if (!std::isfinite(diag(i)) || !(diag(i) > Scalar(0))) return false;
  }
  return true;
}

}  // namespace detail

/// Cholesky of K + jitter·I with a deterministic escalation: optionally no jitter first,
/// then scale·1e-8, scale·1e-7, ..., scale·1e-4. Throws NumericalError with the trace.
template <typename Scalar>
JitteredCholesky<Scalar> jittered_cholesky(const Matrix<Scalar>& K, Scalar scale, bool try_without_jitter) {
  if (K.rows() != K.cols()) throw InvalidArgument("jittered_cholesky: matrix must be square");
  std::vector<double> trace;
  JitteredCholesky<Scalar> out;
  if (try_without_jitter) {
    trace.push_back(0.0);
    out.llt.compute(K);
    if (detail::factor_ok(out.llt)) return out;
  }
  for (double rel = kJitterStart; rel <= kJitterMax * 1.0000001; rel *= 10.0) {
    const Scalar jitter = Scalar(rel) * scale;
    trace.push_back(static_cast<double>(jitter));
    Matrix<Scalar> Kj = K;
    Kj.diagonal().array() += jitter;
    out.llt.compute(Kj);
    if (detail::factor_ok(out.llt)) {
      out.jitter = jitter;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "Cholesky failed after jitter escalation (n=" << K.rows() << ", tried";
  for (double j : trace) msg << ' ' << j;
  msg << ')';
  throw NumericalError(msg.str(), std::move(trace));
}

/// Reverse-mode step through L = chol(A): maps dL/dL (lower triangular part of `grad_l`)
/// to a symmetric dL/dA.
template <typename Scalar>
Matrix<Scalar> cholesky_backward(const Matrix<Scalar>& L, const Matrix<Scalar>& grad_l) {
  Matrix<Scalar> phi = L.transpose() * grad_l.template triangularView<Eigen::Lower>().toDenseMatrix();
  phi = phi.template triangularView<Eigen::Lower>();
  phi.diagonal() *= Scalar(0.5);
  // L^{-T} phi L^{-1}
  Matrix<Scalar> tmp = L.transpose().template triangularView<Eigen::Upper>().solve(phi);
  Matrix<Scalar> grad = L.transpose().template triangularView<Eigen::Upper>().solve(tmp.transpose()).transpose();
  return Scalar(0.5) * (grad + grad.transpose());
}

/// Cholesky of a positive semidefinite matrix: pivots at or below rel_tol·max(diag)
/// zero their whole column, so exactly repeated rows reproduce the same sample path.
template <typename Scalar>
Matrix<Scalar> psd_cholesky(const Matrix<Scalar>& A, Scalar rel_tol = Scalar(1e-10)) {
  const Index n = A.rows();
  if (A.cols() != n) throw InvalidArgument("psd_cholesky: matrix must be square");
  if (!A.allFinite()) throw NumericalError("psd_cholesky: non-finite entry");
  const Scalar tol = rel_tol * std::max(A.diagonal().maxCoeff(), Scalar(0));
  Matrix<Scalar> L = Matrix<Scalar>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    const Scalar pivot = A(j, j) - L.row(j).head(j).squaredNorm();
    if (!(pivot > tol)) continue;
    const Scalar ljj = std::sqrt(pivot);
    L(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) L(i, j) = (A(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / ljj;
  }
  return L;
}

/// Reverse-mode step through psd_cholesky, entry by entry. Returns dL/dA on the lower
/// triangle (upper triangle zero); zeroed columns are treated as constants.
template <typename Scalar>
Matrix<Scalar> psd_cholesky_backward(const Matrix<Scalar>& L, const Matrix<Scalar>& grad_l) {
  const Index n = L.rows();
  Matrix<Scalar> lbar = grad_l.template triangularView<Eigen::Lower>();
  Matrix<Scalar> abar = Matrix<Scalar>::Zero(n, n);
  for (Index j = n - 1; j >= 0; --j) {
    const Scalar ljj = L(j, j);
    if (ljj == Scalar(0)) continue;
    for (Index i = n - 1; i > j; --i) {
      const Scalar b = lbar(i, j) / ljj;
      if (b == Scalar(0)) continue;
      abar(i, j) += b;
      lbar(j, j) -= b * L(i, j);
      for (Index k = 0; k < j; ++k) {
        lbar(i, k) -= b * L(j, k);
        lbar(j, k) -= b * L(i, k);
      }
    }
    const Scalar b = lbar(j, j) / (Scalar(2) * ljj);
    abar(j, j) += b;
    for (Index k = 0; k < j; ++k) lbar(j, k) -= Scalar(2) * b * L(j, k);
  }
  return abar;
}

}  // namespace eulbo
