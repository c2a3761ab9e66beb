#pragma once

#include "eulbo/adam.hpp"
#include "eulbo/sobol.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace eulbo {

/// Acquisition over a block of `rows` points (rows × d). Writes ∂α/∂X into `grad` when non-null.
template <typename Scalar = double>
using AcqFunction = std::function<Scalar(const Matrix<Scalar>&, Matrix<Scalar>*)>;

struct AcqOptions {
  int restarts = 10;
  int raw_samples = 256;
  int max_steps = 200;
  int fail_limit = 3;
  int window = 10;  // steps per progress check
  double step = 0.01;
  double clip = 2.0;
  double progress_tol = 1e-6;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  int threads = 0;  // 0: hardware concurrency, capped by EULBO_THREADS

  void validate() const {
    if (restarts < 1 || raw_samples < 1 || max_steps < 0 || fail_limit < 1 || window < 1) {
      throw InvalidArgument("acq options: counts must be positive");
    }
    if (!(step > 0) || !(clip > 0) || !(progress_tol >= 0)) throw InvalidArgument("acq options: bad step/clip/tol");
  }
};

template <typename Scalar = double>
struct AcqResult {
  Matrix<Scalar> x;
  Scalar value = -std::numeric_limits<Scalar>::infinity();
  Scalar raw_best = -std::numeric_limits<Scalar>::infinity();
  int restart = -1;
};

/// Worker count for independent restarts: `requested` if positive, otherwise the hardware
/// concurrency; never more than EULBO_THREADS when that is set to a positive integer.
inline int worker_count(int requested, int tasks) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("EULBO_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<long>(n, cap);
  }
  return std::max(1, std::min(n, tasks));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < count; i += threads) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> reshape_rows(const Vector<Scalar>& flat, Index rows, Index d) {
  Matrix<Scalar> X(rows, d);
  for (Index i = 0; i < rows; ++i) X.row(i) = flat.segment(i * d, d).transpose();
  return X;
}

template <typename Scalar>
Vector<Scalar> flatten_rows(const Matrix<Scalar>& X) {
  Vector<Scalar> flat(X.size());
  for (Index i = 0; i < X.rows(); ++i) flat.segment(i * X.cols(), X.cols()) = X.row(i).transpose();
  return flat;
}

/// Quasi-uniform raw candidates, each a rows × d block inside `bounds`.
template <typename Scalar>
std::vector<Matrix<Scalar>> raw_candidates(const Bounds<Scalar>& bounds, Index rows, int count, std::uint64_t seed,
                                           std::uint64_t iteration) {
  const Index d = bounds.dim();
  const Index dim = rows * d;
  auto rng = make_rng(seed, RngStream::acquisition, iteration);
  Matrix<Scalar> unit(count, dim);
  if (dim <= kSobolDims) {
    auto sobol = SobolSequence::scrambled(dim, rng);
    unit = sobol.template draw<Scalar>(count);
  } else {
    for (Index i = 0; i < unit.size(); ++i) unit.data()[i] = Scalar(rng.uniform());
  }
  std::vector<Matrix<Scalar>> out;
  out.reserve(static_cast<std::size_t>(count));
  const RowVector<Scalar> width = (bounds.upper - bounds.lower).transpose();
  for (int s = 0; s < count; ++s) {
    Matrix<Scalar> X(rows, d);
    for (Index i = 0; i < rows; ++i) {
      X.row(i) = bounds.lower.transpose() + unit.row(s).segment(i * d, d).cwiseProduct(width);
    }
    project_rows(X, bounds);
    out.push_back(std::move(X));
  }
  return out;
}

}  // namespace detail

/// Projected-Adam ascent of `fn` from `start`; returns the best iterate visited. Progress is
/// checked every `window` steps on the best value so far.
template <typename Scalar>
AcqResult<Scalar> ascend_acquisition(const AcqFunction<Scalar>& fn, const Bounds<Scalar>& bounds,
                                     const Matrix<Scalar>& start, Scalar start_value, const AcqOptions& opts) {
  const Index rows = start.rows(), d = start.cols();
  AcqResult<Scalar> best{start, start_value, start_value, -1};
  Vector<Scalar> flat = detail::flatten_rows(start);
  auto adam = AdamState<Scalar>::zeros(flat.size());
  Matrix<Scalar> X = start, grad(rows, d);
  Scalar checkpoint = start_value;
  int fails = 0;
  bool finite = true;
  for (int step = 0; step < opts.max_steps && fails < opts.fail_limit; ++step) {
    grad.setZero();
    const Scalar value = fn(X, &grad);
    if (!std::isfinite(value) || !grad.allFinite()) {
      finite = false;
      break;
    }
    if (value > best.value) {
      best.value = value;
      best.x = X;
    }
    adam_step(adam, flat, clip_gradient<Scalar>(detail::flatten_rows(grad), Scalar(opts.clip)), Scalar(opts.step));
    X = detail::reshape_rows(flat, rows, d);
    project_rows(X, bounds);
    flat = detail::flatten_rows(X);
    if ((step + 1) % opts.window == 0) {
      fails = best.value > checkpoint + Scalar(opts.progress_tol) ? 0 : fails + 1;
      checkpoint = best.value;
    }
  }
  if (finite) {
    const Scalar value = fn(X, nullptr);
    if (std::isfinite(value) && value > best.value) {
      best.value = value;
      best.x = X;
    }
  }
  return best;
}

/// Multi-start maximization: score `raw_samples` quasi-uniform blocks (plus any `extra_starts`),
/// ascend from the best `restarts` of them, return the overall best.
template <typename Scalar>
AcqResult<Scalar> maximize_acquisition(const AcqFunction<Scalar>& fn, const Bounds<Scalar>& bounds, Index rows,
                                       const AcqOptions& opts = {},
                                       const std::vector<Matrix<Scalar>>& extra_starts = {}) {
  bounds.validate();
  opts.validate();
  if (rows < 1) throw InvalidArgument("maximize_acquisition: need at least one row");
  auto candidates = detail::raw_candidates(bounds, rows, opts.raw_samples, opts.seed, opts.iteration);
  for (const auto& s : extra_starts) {
    if (s.rows() != rows || s.cols() != bounds.dim()) throw InvalidArgument("maximize_acquisition: bad extra start");
    Matrix<Scalar> X = s;
    project_rows(X, bounds);
    candidates.push_back(std::move(X));
  }
  const int count = static_cast<int>(candidates.size());
  std::vector<Scalar> scores(candidates.size());
  parallel_for(count, worker_count(opts.threads, count), [&](int i) {
    scores[static_cast<std::size_t>(i)] = fn(candidates[static_cast<std::size_t>(i)], nullptr);
  });
  std::vector<int> order;
  for (int i = 0; i < count; ++i) {
    if (std::isfinite(scores[static_cast<std::size_t>(i)])) order.push_back(i);
  }
  if (order.empty()) {
    std::ostringstream msg;
    msg << "maximize_acquisition: all " << count << " raw candidates are non-finite";
    throw NumericalError(msg.str());
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  const Scalar raw_best = scores[static_cast<std::size_t>(order.front())];
  const int starts = std::min<int>(opts.restarts, static_cast<int>(order.size()));
  std::vector<AcqResult<Scalar>> results(static_cast<std::size_t>(starts));
  parallel_for(starts, worker_count(opts.threads, starts), [&](int r) {
    const int idx = order[static_cast<std::size_t>(r)];
    results[static_cast<std::size_t>(r)] =
        ascend_acquisition(fn, bounds, candidates[static_cast<std::size_t>(idx)], scores[static_cast<std::size_t>(idx)], opts);
  });
  AcqResult<Scalar> best = results.front();
  best.restart = 0;
  for (int r = 1; r < starts; ++r) {
    if (results[static_cast<std::size_t>(r)].value > best.value) {
      best = results[static_cast<std::size_t>(r)];
      best.restart = r;
    }
  }
  best.raw_best = raw_best;
  return best;
}

}  // namespace eulbo
