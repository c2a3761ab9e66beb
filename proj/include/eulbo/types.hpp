#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace eulbo {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a factorization fails even after the full jitter escalation.
/// `jitter_trace` lists every jitter level that was attempted, in order.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::vector<double> jitter_trace = {})
      : std::runtime_error(what), jitter_trace_(std::move(jitter_trace)) {}

  const std::vector<double>& jitter_trace() const noexcept { return jitter_trace_; }

 private:
  std::vector<double> jitter_trace_;
};

/// A cached quantity was used against a model other than the one it was built from.
class StaleContext : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Axis-aligned box domain.
template <typename Scalar = double>
struct Bounds {
  Vector<Scalar> lower;
  Vector<Scalar> upper;

  static Bounds unit(Index d) { return {Vector<Scalar>::Zero(d), Vector<Scalar>::Ones(d)}; }

  Index dim() const { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size()) throw InvalidArgument("bounds: lower/upper size mismatch");
    if (lower.size() == 0) throw InvalidArgument("bounds: empty");
    for (Index i = 0; i < lower.size(); ++i) {
      if (!(lower(i) < upper(i))) throw InvalidArgument("bounds: lower must be < upper in every coordinate");
    }
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar tol = Scalar(0)) const {
    if (x.size() != lower.size()) return false;
    for (Index i = 0; i < lower.size(); ++i) {
      if (x(i) < lower(i) - tol || x(i) > upper(i) + tol) return false;
    }
    return true;
  }
};

/// Coordinatewise clamp of `x` into the box.
template <typename Scalar, typename Derived>
Vector<Scalar> project_box(const Eigen::MatrixBase<Derived>& x, const Bounds<Scalar>& bounds) {
  if (x.size() != bounds.dim()) throw InvalidArgument("project_box: dimension mismatch");
  return x.derived().cwiseMax(bounds.lower).cwiseMin(bounds.upper);
}

/// Row-wise clamp of a point set into the box.
template <typename Scalar>
void project_rows(Matrix<Scalar>& points, const Bounds<Scalar>& bounds) {
  if (points.cols() != bounds.dim()) throw InvalidArgument("project_rows: dimension mismatch");
  for (Index i = 0; i < points.rows(); ++i) {
    points.row(i) = points.row(i).cwiseMax(bounds.lower.transpose()).cwiseMin(bounds.upper.transpose());
  }
}

}  // namespace eulbo
