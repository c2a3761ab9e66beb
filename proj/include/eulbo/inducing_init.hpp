#pragma once

#include "eulbo/kernel.hpp"

#include <limits>
#include <vector>

namespace eulbo {

inline constexpr const char* kMossStyleLabel = "greedy-maxdet (Moss-style)";

template <typename Scalar = double>
struct MaxdetSelection {
  std::vector<Index> indices;  // rows of X in greedy order
  std::vector<Scalar> gains;   // conditional prior variance of each pick
  Matrix<Scalar> points;
};

/// Greedy log-determinant maximization: each step adds the input with the largest prior
/// variance conditional on the inputs already chosen (lowest index on ties).
template <typename Scalar>
MaxdetSelection<Scalar> greedy_maxdet(const Matrix<Scalar>& X, const Hyperparams<Scalar>& hypers, KernelFamily family,
                                      Index m) {
  const Index n = X.rows();
  if (m < 0 || m > n) throw InvalidArgument("greedy_maxdet_select: need 0 <= m <= n");
  if (hypers.lengthscales.size() != X.cols()) throw InvalidArgument("greedy_maxdet_select: dimension mismatch");
  Vector<Scalar> var(n);
  for (Index i = 0; i < n; ++i) {
    const Matrix<Scalar> xi = X.row(i);
    var(i) = kernel_matrix<Scalar>(xi, xi, hypers, family)(0, 0);
  }
  Matrix<Scalar> C = Matrix<Scalar>::Zero(n, m);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  MaxdetSelection<Scalar> out;
  out.points.resize(m, X.cols());
  for (Index t = 0; t < m; ++t) {
    Index pick = -1;
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (pick < 0 || var(i) > var(pick)) pick = i;
    }
    const Scalar gain = var(pick);
    taken[static_cast<std::size_t>(pick)] = true;
    out.indices.push_back(pick);
    out.gains.push_back(gain);
    out.points.row(t) = X.row(pick);
    if (!(gain > Scalar(0))) continue;
    const Vector<Scalar> k = kernel_matrix<Scalar>(X, Matrix<Scalar>(X.row(pick)), hypers, family).col(0);
    const Vector<Scalar> c = (k - C.leftCols(t) * C.row(pick).head(t).transpose()) / std::sqrt(gain);
    C.col(t) = c;
    var -= c.cwiseAbs2();
    var = var.cwiseMax(Scalar(0));
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> greedy_maxdet_select(const Matrix<Scalar>& X, const Hyperparams<Scalar>& hypers, KernelFamily family,
                                    Index m) {
  return greedy_maxdet(X, hypers, family, m).points;
}

}  // namespace eulbo
