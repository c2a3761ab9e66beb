#pragma once

#include "eulbo/acq_opt.hpp"
#include "eulbo/adam.hpp"
#include "eulbo/utility.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace eulbo {

template <typename Scalar = double>
struct EulboConfig {
  Scalar step_x = Scalar(0.001);
  Scalar step_w = Scalar(0.01);
  Index batch_size = 32;
  Scalar clip = Scalar(2.0);
  int max_epochs = 30;
  int fail_limit = 3;
  int acq_restarts = 10;
  int acq_raw_samples = 256;
  Index q = 1;
  int quad_points = 20;
  Index num_inducing = 100;
  Index init_size = 100;
  Index mc_samples = 64;  // base samples for q-batch utilities, fantasies for KG
  Scalar progress_tol = Scalar(1e-6);
  int acq_max_steps = 200;
  int threads = 0;
  HyperparamBox<Scalar> hyper_box;

  void validate() const {
    if (!(step_x > 0) || !(step_w > 0) || !(clip > 0) || !(progress_tol >= 0)) {
      throw InvalidArgument("eulbo config: step sizes and clip threshold must be positive");
    }
    if (batch_size < 1 || max_epochs < 1 || fail_limit < 1 || acq_restarts < 1 || acq_raw_samples < 1 || q < 1 ||
        quad_points < 2 || num_inducing < 1 || init_size < 1 || mc_samples < 1 || acq_max_steps < 0) {
      throw InvalidArgument("eulbo config: counts must be positive");
    }
  }

  AcqOptions acq_options(std::uint64_t seed, std::uint64_t iteration) const {
    AcqOptions o;
    o.restarts = acq_restarts;
    o.raw_samples = acq_raw_samples;
    o.max_steps = acq_max_steps;
    o.fail_limit = fail_limit;
    o.clip = static_cast<double>(clip);
    o.progress_tol = static_cast<double>(progress_tol);
    o.seed = seed;
    o.iteration = iteration;
    o.threads = threads;
    return o;
  }
};

/// Which parameter groups maximize_eulbo may change.
struct RefinementMask {
  bool refine_variational = true;
  bool refine_inducing = true;
  bool refine_hypers = true;
  bool refine_query = true;

  bool any_model() const { return refine_variational || refine_inducing || refine_hypers; }
};

/// Reshuffled partition of the data indices into minibatches, one permutation per epoch.
class EpochSchedule {
 public:
  EpochSchedule(Index n, Index batch_size, CounterRng rng) : n_(n), batch_(batch_size), rng_(rng) {
    if (n < 1 || batch_size < 1) throw InvalidArgument("epoch schedule: sizes must be positive");
    order_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
  }

  Index num_batches() const { return (n_ + batch_ - 1) / batch_; }
  Index epoch() const { return epoch_; }
  const std::vector<Index>& order() const { return order_; }

  /// Starts the next epoch with a fresh permutation.
  void shuffle() {
    rng_.shuffle(order_);
    ++epoch_;
  }

  std::vector<Index> batch(Index b) const {
    if (b < 0 || b >= num_batches()) throw InvalidArgument("epoch schedule: batch index out of range");
    const Index lo = b * batch_, hi = std::min(n_, lo + batch_);
    return {order_.begin() + lo, order_.begin() + hi};
  }

 private:
  Index n_, batch_;
  CounterRng rng_;
  std::vector<Index> order_;
  Index epoch_ = 0;
};

/// Query block: q candidate rows plus, for KG utilities, one fantasy maximizer per base sample.
template <typename Scalar = double>
struct EulboQuery {
  Matrix<Scalar> x;
  Matrix<Scalar> fantasies;

  Index rows() const { return x.rows() + fantasies.rows(); }
};

template <typename Scalar = double>
struct EulboGradient {
  Scalar value = Scalar(0);
  SvgpGradient<Scalar> model;
  Matrix<Scalar> x;
  Matrix<Scalar> fantasies;
};

template <typename Scalar>
UtilityConfig<Scalar> make_utility_config(const EulboConfig<Scalar>& cfg, UtilityKind kind, const Dataset<Scalar>& full) {
  UtilityConfig<Scalar> u;
  u.kind = kind;
  u.quad_points = cfg.quad_points;
  u.mc_samples = cfg.mc_samples;
  u.set_reference(full.targets);
  return u;
}

/// Frozen base samples for one BO iteration; none for the single-point quadrature utility.
template <typename Scalar>
std::optional<BaseSamples<Scalar>> make_base_samples(const EulboConfig<Scalar>& cfg, UtilityKind kind,
                                                     std::uint64_t seed, std::uint64_t iteration) {
  if (kind == UtilityKind::sei) return std::nullopt;
  const Index q = (kind == UtilityKind::one_shot_skg) ? 1 : cfg.q;
  return BaseSamples<Scalar>::draw(cfg.mc_samples, q, seed, iteration);
}

namespace detail {

template <typename Scalar>
void check_query(const EulboQuery<Scalar>& query, const UtilityConfig<Scalar>& ucfg) {
  if (is_kg(ucfg.kind) != (query.fantasies.rows() > 0)) {
    throw InvalidArgument("eulbo: fantasy maximizers must be given exactly for KG utilities");
  }
}

/// ELBO on `batch` plus, when `with_utility`, the expected log utility at `query`.
template <typename Scalar>
Scalar eulbo_accumulate(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                        const EulboQuery<Scalar>& query, const UtilityConfig<Scalar>& ucfg,
                        const BaseSamples<Scalar>* samples, const Dataset<Scalar>& batch, Index n_total,
                        bool with_utility, SvgpGradient<Scalar>* grad, InducingAdjoint<Scalar>* adj,
                        Matrix<Scalar>* x_grad, Matrix<Scalar>* xp_grad) {
  Scalar value = elbo_accumulate<Scalar>(model, factor, batch, n_total, grad, adj);
  if (with_utility) {
    value += expected_log_utility<Scalar>(model, factor, ucfg, query.x,
                                          query.fantasies.rows() ? &query.fantasies : nullptr, samples, grad, adj,
                                          x_grad, xp_grad);
  }
  return value;
}

}  // namespace detail

/// elbo(model, minibatch, |full|) + expected log utility referenced to the full-data incumbent.
template <typename Scalar>
Scalar eulbo(const SvgpModel<Scalar>& model, const EulboQuery<Scalar>& query, UtilityConfig<Scalar> ucfg,
             const BaseSamples<Scalar>* samples, const Dataset<Scalar>& minibatch, const Dataset<Scalar>& full,
             bool with_utility = true) {
  ucfg.set_reference(full.targets);
  detail::check_query(query, ucfg);
  return detail::eulbo_accumulate<Scalar>(model, factor_inducing(model), query, ucfg, samples, minibatch, full.size(),
                                          with_utility, nullptr, nullptr, nullptr, nullptr);
}

template <typename Scalar>
EulboGradient<Scalar> eulbo_gradients(const SvgpModel<Scalar>& model, const EulboQuery<Scalar>& query,
                                      UtilityConfig<Scalar> ucfg, const BaseSamples<Scalar>* samples,
                                      const Dataset<Scalar>& minibatch, const Dataset<Scalar>& full,
                                      bool with_utility = true) {
  ucfg.set_reference(full.targets);
  detail::check_query(query, ucfg);
  const auto factor = factor_inducing(model);
  EulboGradient<Scalar> out;
  out.model = SvgpGradient<Scalar>::zero(model.num_inducing(), model.dim());
  out.x = Matrix<Scalar>::Zero(query.x.rows(), query.x.cols());
  out.fantasies = Matrix<Scalar>::Zero(query.fantasies.rows(), query.fantasies.cols());
  auto adj = InducingAdjoint<Scalar>::zero(model.num_inducing());
  out.value = detail::eulbo_accumulate<Scalar>(model, factor, query, ucfg, samples, minibatch, full.size(),
                                               with_utility, &out.model, &adj, &out.x, &out.fantasies);
  finish_inducing_adjoint(model, factor, adj, out.model);
  if (const auto block = out.model.non_finite_block(); !block.empty()) {
    throw NumericalError("eulbo_gradients: non-finite gradient in " + block);
  }
  if (!out.x.allFinite()) throw NumericalError("eulbo_gradients: non-finite gradient in query");
  if (!out.fantasies.allFinite()) throw NumericalError("eulbo_gradients: non-finite gradient in fantasy maximizers");
  if (!std::isfinite(out.value)) throw NumericalError("eulbo_gradients: non-finite objective");
  return out;
}

namespace detail {

/// Flat w-block layout: [mean (m) | lower triangle of L by columns | Z by rows | log-θ (d + 2)].
template <typename Scalar>
Vector<Scalar> pack_model(const SvgpModel<Scalar>& model) {
  const Index m = model.num_inducing(), d = model.dim();
  Vector<Scalar> w(m + m * (m + 1) / 2 + m * d + d + 2);
  Index k = 0;
  for (Index i = 0; i < m; ++i) w(k++) = model.state.mean(i);
  for (Index j = 0; j < m; ++j)
    for (Index i = j; i < m; ++i) w(k++) = model.state.cov_factor(i, j);
  for (Index i = 0; i < m; ++i)
    for (Index c = 0; c < d; ++c) w(k++) = model.state.inducing_points(i, c);
  w.tail(d + 2) = model.hypers.to_log();
  return w;
}

/// Variational block in whitened coordinates: m̃ = L_K⁻¹ m, L̃ = L_K⁻¹ L with L_K = chol(K_ZZ + jitter).
template <typename Scalar>
SvgpModel<Scalar> whiten(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor) {
  SvgpModel<Scalar> out = model;
  const Matrix<Scalar> LK = factor.chol.matrix_l();
  out.state.mean = LK.template triangularView<Eigen::Lower>().solve(model.state.mean);
  out.state.cov_factor = LK.template triangularView<Eigen::Lower>().solve(model.state.cov_factor);
  out.state.cov_factor = out.state.cov_factor.template triangularView<Eigen::Lower>();
  return out;
}

/// Maps a gradient in (m, L, Z, θ) to one in (m̃, L̃, Z, θ), where Z and θ also move m and L
/// through L_K.
template <typename Scalar>
SvgpGradient<Scalar> whiten_gradient(const SvgpModel<Scalar>& model, const InducingFactor<Scalar>& factor,
                                     const SvgpModel<Scalar>& white, const SvgpGradient<Scalar>& g) {
  SvgpGradient<Scalar> out = g;
  const Matrix<Scalar> LK = factor.chol.matrix_l();
  out.mean = LK.transpose() * g.mean;
  out.cov_factor = (LK.transpose() * g.cov_factor).template triangularView<Eigen::Lower>();
  const Matrix<Scalar> lk_bar = g.mean * white.state.mean.transpose() + g.cov_factor * white.state.cov_factor.transpose();
  auto adj = InducingAdjoint<Scalar>::zero(model.num_inducing());
  adj.kzz = cholesky_backward<Scalar>(LK, lk_bar);
  finish_inducing_adjoint<Scalar>(model, factor, adj, out);
  return out;
}

template <typename Scalar>
Vector<Scalar> pack_model_gradient(const SvgpGradient<Scalar>& g, const RefinementMask& mask) {
  const Index m = g.mean.size(), d = g.inducing.cols();
  Vector<Scalar> w = Vector<Scalar>::Zero(m + m * (m + 1) / 2 + m * d + d + 2);
  Index k = 0;
  for (Index i = 0; i < m; ++i, ++k)
    if (mask.refine_variational) w(k) = g.mean(i);
  for (Index j = 0; j < m; ++j)
    for (Index i = j; i < m; ++i, ++k)
      if (mask.refine_variational) w(k) = g.cov_factor(i, j);
  for (Index i = 0; i < m; ++i)
    for (Index c = 0; c < d; ++c, ++k)
      if (mask.refine_inducing) w(k) = g.inducing(i, c);
  if (mask.refine_hypers) w.tail(d + 2) = g.hypers.to_vector();
  return w;
}

/// Writes the refined groups of `w` back into `model`, then projects: Z into the domain,
/// log-θ into the box, and columns of L̃ with a negative diagonal are reflected (S is
/// unchanged) together with their first-moment accumulators. A refined variational block is
/// read in whitened coordinates and mapped back through the new L_K.
template <typename Scalar>
void unpack_model(const Vector<Scalar>& w, const RefinementMask& mask, const Bounds<Scalar>& domain,
                  const HyperparamBox<Scalar>& box, SvgpModel<Scalar>& model, AdamState<Scalar>& adam) {
  const Index m = model.num_inducing(), d = model.dim();
  Index k = m + m * (m + 1) / 2;
  if (mask.refine_inducing) {
    for (Index i = 0; i < m; ++i)
      for (Index c = 0; c < d; ++c) model.state.inducing_points(i, c) = w(k++);
    project_rows(model.state.inducing_points, domain);
  }
  if (mask.refine_hypers) model.hypers = box.clamp(Hyperparams<Scalar>::from_log(w.tail(d + 2)));
  if (mask.refine_variational) {
    Vector<Scalar> mw(m);
    Matrix<Scalar> lw = Matrix<Scalar>::Zero(m, m);
    k = 0;
    for (Index i = 0; i < m; ++i) mw(i) = w(k++);
    for (Index j = 0; j < m; ++j) {
      const Index col_start = k;
      for (Index i = j; i < m; ++i) lw(i, j) = w(k++);
      if (lw(j, j) < 0) {
        lw.col(j).tail(m - j) *= Scalar(-1);
        adam.first.segment(col_start, m - j) *= Scalar(-1);
      }
    }
    const Matrix<Scalar> LK = factor_inducing(model).chol.matrix_l();
    model.state.mean = LK * mw;
    model.state.cov_factor = (LK * lw).template triangularView<Eigen::Lower>();
  }
}

/// Flat w-block in the coordinates Adam steps in.
template <typename Scalar>
Vector<Scalar> pack_step_model(const SvgpModel<Scalar>& model, const RefinementMask& mask) {
  return mask.refine_variational ? pack_model(whiten(model, factor_inducing(model))) : pack_model(model);
}

template <typename Scalar>
Vector<Scalar> flatten_query(const Matrix<Scalar>& x, const Matrix<Scalar>& fantasies) {
  Vector<Scalar> out(x.size() + fantasies.size());
  out << flatten_rows(x), flatten_rows(fantasies);
  return out;
}

}  // namespace detail

/// Moves the inducing points to `Z`, keeping the whitened variational state.
template <typename Scalar>
SvgpModel<Scalar> relocate_inducing(const SvgpModel<Scalar>& model, const Matrix<Scalar>& Z) {
  if (Z.rows() != model.num_inducing() || Z.cols() != model.dim()) {
    throw InvalidArgument("relocate_inducing: inducing block shape mismatch");
  }
  const auto white = detail::whiten(model, factor_inducing(model));
  SvgpModel<Scalar> out = model;
  out.state.inducing_points = Z;
  const Matrix<Scalar> LK = factor_inducing(out).chol.matrix_l();
  out.state.mean = LK * white.state.mean;
  out.state.cov_factor = (LK * white.state.cov_factor).template triangularView<Eigen::Lower>();
  return out;
}

/// Outcome of one block-coordinate ascent run.
template <typename Scalar = double>
struct AscentResult {
  SvgpModel<Scalar> model;
  EulboQuery<Scalar> query;
  Scalar start_value = Scalar(0);
  Scalar best_value = Scalar(0);  // full-data objective at the returned iterate
  int epochs = 0;
  long steps = 0;
  int numerical_failures = 0;
  std::vector<Scalar> trace;  // best full-data objective after each epoch
};

/// Alternating minibatch Adam ascent: one w-block step then one query step per minibatch,
/// both clipped, with the query projected into `query_bounds`. Progress is judged on the
/// full-data objective at the end of each epoch; the best iterate is returned. With no
/// utility (`ucfg` null) this is plain ELBO fitting.
template <typename Scalar>
AscentResult<Scalar> block_ascent(const SvgpModel<Scalar>& model0, const EulboQuery<Scalar>& query0,
                                  const UtilityConfig<Scalar>* ucfg, const BaseSamples<Scalar>* samples,
                                  const Dataset<Scalar>& full, const EulboConfig<Scalar>& cfg,
                                  const RefinementMask& mask, const Bounds<Scalar>& query_bounds, CounterRng rng) {
  cfg.validate();
  full.validate();
  if (full.size() < 1) throw InvalidArgument("block_ascent: empty dataset");
  const bool with_utility = ucfg != nullptr;
  UtilityConfig<Scalar> u;
  if (with_utility) {
    u = *ucfg;
    u.set_reference(full.targets);
    detail::check_query(query0, u);
  }
  const Index n = full.size();
  auto full_objective = [&](const SvgpModel<Scalar>& model, const EulboQuery<Scalar>& query) {
    try {
      return detail::eulbo_accumulate<Scalar>(model, factor_inducing(model), query, u, samples, full, n, with_utility,
                                              nullptr, nullptr, nullptr, nullptr);
    } catch (const NumericalError&) {
      return std::numeric_limits<Scalar>::quiet_NaN();
    }
  };

  AscentResult<Scalar> res{model0, query0};
  res.start_value = full_objective(model0, query0);
  if (!std::isfinite(res.start_value)) throw NumericalError("block_ascent: objective is not finite at the start");
  res.best_value = res.start_value;

  SvgpModel<Scalar> model = model0;
  EulboQuery<Scalar> query = query0;
  Vector<Scalar> w = detail::pack_step_model(model, mask);
  auto adam_w = AdamState<Scalar>::zeros(w.size());
  Vector<Scalar> xq = detail::flatten_query(query.x, query.fantasies);
  auto adam_x = AdamState<Scalar>::zeros(xq.size());
  const bool step_query = with_utility && mask.refine_query;
  EpochSchedule schedule(n, cfg.batch_size, rng);
  int fails = 0;

  while (res.epochs < cfg.max_epochs && fails < cfg.fail_limit) {
    schedule.shuffle();
    for (Index b = 0; b < schedule.num_batches(); ++b) {
      if (mask.any_model()) {
        const Dataset<Scalar> batch = full.subset(schedule.batch(b));
        const SvgpModel<Scalar> prev = model;
        const AdamState<Scalar> prev_adam = adam_w;
        try {
          const auto g = eulbo_gradients<Scalar>(model, query, u, samples, batch, full, with_utility);
          SvgpGradient<Scalar> gm = g.model;
          if (mask.refine_variational) {
            const auto factor = factor_inducing(model);
            gm = detail::whiten_gradient(model, factor, detail::whiten(model, factor), g.model);
          }
          const Vector<Scalar> gw = clip_gradient<Scalar>(detail::pack_model_gradient(gm, mask), cfg.clip);
          adam_step(adam_w, w, gw, cfg.step_w);
          detail::unpack_model(w, mask, full.bounds, cfg.hyper_box, model, adam_w);
          model.validate();
          w = detail::pack_step_model(model, mask);
        } catch (const std::exception&) {
          model = prev;
          adam_w = prev_adam;
          w = detail::pack_step_model(model, mask);
          ++res.numerical_failures;
          ++fails;
        }
      }
      if (step_query) {
        try {
          const auto factor = factor_inducing(model);
          Matrix<Scalar> gx = Matrix<Scalar>::Zero(query.x.rows(), query.x.cols());
          Matrix<Scalar> gf = Matrix<Scalar>::Zero(query.fantasies.rows(), query.fantasies.cols());
          const Scalar v = expected_log_utility<Scalar>(model, factor, u, query.x,
                                                        query.fantasies.rows() ? &query.fantasies : nullptr, samples,
                                                        nullptr, nullptr, &gx, &gf);
          if (!std::isfinite(v) || !gx.allFinite() || !gf.allFinite()) throw NumericalError("non-finite query gradient");
          adam_step(adam_x, xq, clip_gradient<Scalar>(detail::flatten_query(gx, gf), cfg.clip), cfg.step_x);
          query.x = detail::reshape_rows(Vector<Scalar>(xq.head(query.x.size())), query.x.rows(), query.x.cols());
          project_rows(query.x, query_bounds);
          if (query.fantasies.rows()) {
            query.fantasies = detail::reshape_rows(Vector<Scalar>(xq.tail(query.fantasies.size())),
                                                   query.fantasies.rows(), query.fantasies.cols());
            project_rows(query.fantasies, query_bounds);
          }
          xq = detail::flatten_query(query.x, query.fantasies);
        } catch (const NumericalError&) {
          ++res.numerical_failures;
          ++fails;
        }
      }
      ++res.steps;
    }
    ++res.epochs;
    const Scalar value = full_objective(model, query);
    if (!std::isfinite(value)) {
      model = res.model;
      query = res.query;
      w = detail::pack_step_model(model, mask);
      xq = detail::flatten_query(query.x, query.fantasies);
      ++res.numerical_failures;
      ++fails;
    } else {
      if (value > res.best_value + cfg.progress_tol) {
        fails = 0;
      } else {
        ++fails;
      }
      if (value > res.best_value) {
        res.best_value = value;
        res.model = model;
        res.query = query;
      }
    }
    res.trace.push_back(res.best_value);
  }
  return res;
}

/// ELBO-only Adam fit of every (masked) model block until the progress rule stops it.
template <typename Scalar>
AscentResult<Scalar> fit_elbo(const SvgpModel<Scalar>& model, const Dataset<Scalar>& data,
                              const EulboConfig<Scalar>& cfg, std::uint64_t seed, std::uint64_t iteration,
                              const RefinementMask& mask = {}) {
  RefinementMask m = mask;
  m.refine_query = false;
  return block_ascent<Scalar>(model, EulboQuery<Scalar>{}, nullptr, nullptr, data, cfg, m, data.bounds,
                              make_rng(seed, RngStream::minibatch, 2 * iteration));
}

/// Conventional acquisition on the variational predictive used to initialize the query:
/// closed-form EI (q = 1), Monte-Carlo q-EI, or one-shot KG with fantasy maximizers.
template <typename Scalar>
AcqFunction<Scalar> warm_start_acquisition(const SvgpModel<Scalar>& model, UtilityKind kind, Scalar incumbent,
                                           const BaseSamples<Scalar>* samples) {
  auto factor = std::make_shared<const InducingFactor<Scalar>>(factor_inducing(model));
  const Index q = samples ? samples->width() : 1;
  return [model, factor, kind, incumbent, samples, q](const Matrix<Scalar>& X, Matrix<Scalar>* grad) -> Scalar {
    auto fn = [&](const Vector<Scalar>& mean, const Matrix<Scalar>& cov, Scalar noise, MomentGrad<Scalar>* g) {
      switch (kind) {
        case UtilityKind::sei: return moments::ei(mean, cov, incumbent, g);
        case UtilityKind::q_sei: return moments::q_ei(mean, cov, incumbent, samples->eps, g);
        case UtilityKind::one_shot_skg:
        case UtilityKind::q_skg:
          return moments::kg(mean, cov, noise, q, samples->eps, Scalar(0), KgTransform::identity, g);
      }
      return Scalar(0);
    };
    return svgp_moment_utility<Scalar>(model, *factor, X, fn, nullptr, nullptr, grad);
  };
}

template <typename Scalar = double>
struct WarmStart {
  SvgpModel<Scalar> model;
  EulboQuery<Scalar> query;
  AscentResult<Scalar> fit;
  Scalar acquisition_value = Scalar(0);
};

/// Conventional acquisition maximization on a fitted model, inside `bounds`.
template <typename Scalar>
std::pair<EulboQuery<Scalar>, Scalar> acquire_query(const SvgpModel<Scalar>& model, const Dataset<Scalar>& data,
                                                    const EulboConfig<Scalar>& cfg, UtilityKind kind,
                                                    const BaseSamples<Scalar>* samples, const Bounds<Scalar>& bounds,
                                                    std::uint64_t seed, std::uint64_t iteration) {
  if (kind != UtilityKind::sei && !samples) throw InvalidArgument("acquire_query: base samples required");
  const Index q = samples ? samples->width() : 1;
  const Index rows = is_kg(kind) ? q + samples->count() : q;
  const auto acq = warm_start_acquisition<Scalar>(model, kind, data.best_target(), samples);
  const auto best = maximize_acquisition<Scalar>(acq, bounds, rows, cfg.acq_options(seed, 2 * iteration));
  EulboQuery<Scalar> query;
  query.x = best.x.topRows(q);
  if (is_kg(kind)) query.fantasies = best.x.bottomRows(rows - q);
  return {query, best.value};
}

/// ELBO fit followed by conventional acquisition maximization, inside `tr_bounds` when given.
template <typename Scalar>
WarmStart<Scalar> warm_start(const SvgpModel<Scalar>& model, const Dataset<Scalar>& data, const EulboConfig<Scalar>& cfg,
                             UtilityKind kind, const BaseSamples<Scalar>* samples, const Bounds<Scalar>* tr_bounds,
                             std::uint64_t seed, std::uint64_t iteration, const RefinementMask& fit_mask = {}) {
  if (data.size() < 1) throw InvalidArgument("warm_start: empty dataset");
  if (kind != UtilityKind::sei && !samples) throw InvalidArgument("warm_start: base samples required");
  WarmStart<Scalar> out;
  out.fit = fit_elbo(model, data, cfg, seed, iteration, fit_mask);
  out.model = out.fit.model;
  auto [query, value] =
      acquire_query(out.model, data, cfg, kind, samples, tr_bounds ? *tr_bounds : data.bounds, seed, iteration);
  out.query = std::move(query);
  out.acquisition_value = value;
  return out;
}

/// EULBO maximization from a warm start; returns the best-EULBO iterate.
template <typename Scalar>
AscentResult<Scalar> maximize_eulbo(const SvgpModel<Scalar>& model, const EulboQuery<Scalar>& query,
                                    const Dataset<Scalar>& data, const EulboConfig<Scalar>& cfg,
                                    const RefinementMask& mask, UtilityKind kind, const BaseSamples<Scalar>* samples,
                                    const Bounds<Scalar>* tr_bounds, std::uint64_t seed, std::uint64_t iteration) {
  const auto u = make_utility_config(cfg, kind, data);
  return block_ascent<Scalar>(model, query, &u, samples, data, cfg, mask, tr_bounds ? *tr_bounds : data.bounds,
                              make_rng(seed, RngStream::minibatch, 2 * iteration + 1));
}

}  // namespace eulbo
