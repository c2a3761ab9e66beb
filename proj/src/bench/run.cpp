#include "eulbo/bench/run.hpp"

#include "eulbo/exact_gp.hpp"
#include "eulbo/inducing_init.hpp"
#include "eulbo/turbo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#ifndef EULBO_VERSION
#define EULBO_VERSION "0.0.0"
#endif
#ifndef EULBO_GIT_REV
#define EULBO_GIT_REV "unknown"
#endif

namespace eulbo::bench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInitialTheta = 0.693;  // softplus(0)

std::string digest(const Matrix<double>& X) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      const double v = X(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Matrix<double> uniform_design(std::uint64_t seed, std::uint64_t sub, Index n, Index d) {
  auto rng = make_rng(seed, RngStream::initial_design, sub);
  Matrix<double> X(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) X(i, j) = rng.uniform();
  return X;
}

/// Targets shifted to zero mean and scaled to unit standard deviation.
Dataset<double> standardized(const Matrix<double>& X, const std::vector<double>& y) {
  const Index n = static_cast<Index>(y.size());
  Vector<double> t = Eigen::Map<const Vector<double>>(y.data(), n);
  const double mean = t.mean();
  const double sd = n > 1 ? std::sqrt((t.array() - mean).square().sum() / double(n - 1)) : 0.0;
  t = (t.array() - mean) / (sd > 1e-12 ? sd : 1.0);
  return Dataset<double>{X.topRows(n), t, Bounds<double>::unit(X.cols())};
}

UtilityKind utility_kind(Method m, Index q) {
  if (m == Method::eulbo_kg) return q == 1 ? UtilityKind::one_shot_skg : UtilityKind::q_skg;
  return q == 1 ? UtilityKind::sei : UtilityKind::q_sei;
}

AcqFunction<double> exact_acquisition(const ExactGpPosterior<double>& gp, double incumbent,
                                      const BaseSamples<double>* samples) {
  return [&gp, incumbent, samples](const Matrix<double>& X, Matrix<double>* grad) {
    const auto joint = gp.joint(X);
    auto g = MomentGrad<double>::zero(X.rows());
    MomentGrad<double>* gp_grad = grad ? &g : nullptr;
    const double v = samples ? moments::q_ei(joint.mean, joint.cov, incumbent, samples->eps, gp_grad)
                             : moments::ei(joint.mean, joint.cov, incumbent, gp_grad);
    if (grad) gp.joint_backward(joint, g.mean, g.cov, *grad);
    return v;
  };
}

int get_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
  return v.get<int>();
}

double get_double(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::exact_ei: return "exact-ei";
    case Method::elbo_ei: return "elbo-ei";
    case Method::moss_elbo_ei: return "moss-elbo-ei";
    case Method::eulbo_ei: return "eulbo-ei";
    case Method::eulbo_kg: return "eulbo-kg";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::exact_ei, Method::elbo_ei, Method::moss_elbo_ei, Method::eulbo_ei, Method::eulbo_kg}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::string_view method_label(Method m) {
  switch (m) {
    case Method::exact_ei: return "exact GP, EI";
    case Method::elbo_ei: return "ELBO-SVGP, EI";
    case Method::moss_elbo_ei: return kMossStyleLabel;
    case Method::eulbo_ei: return "EULBO-SVGP, EI";
    case Method::eulbo_kg: return "EULBO-SVGP, KG";
  }
  return "unknown";
}

void RunConfig::validate() const {
  eulbo.validate();
  if (q < 1) throw InvalidArgument("run config: q must be at least 1");
  if (eulbo.q != q) throw InvalidArgument("run config: engine q does not match q");
  if (budget < eulbo.init_size) throw InvalidArgument("run config: budget must be at least n0");
  if (!(noise_sd >= 0) || !std::isfinite(noise_sd)) throw InvalidArgument("run config: noise_sd must be >= 0");
  make_objective(task);
}

RunConfig apply_overrides(RunConfig cfg, const nlohmann::json& flat) {
  if (!flat.is_object()) throw ConfigError("config: expected a flat JSON object");
  for (const auto& [key, v] : flat.items()) {
    if (v.is_object() || v.is_array()) throw ConfigError("config: '" + key + "' must be a scalar");
    if (key == "task") {
      if (!v.is_string()) throw ConfigError("config: 'task' must be a string");
      cfg.task = v.get<std::string>();
    } else if (key == "method") {
      if (!v.is_string()) throw ConfigError("config: 'method' must be a string");
      cfg.method = parse_method(v.get<std::string>());
    } else if (key == "turbo") {
      if (!v.is_boolean()) throw ConfigError("config: 'turbo' must be a boolean");
      cfg.turbo = v.get<bool>();
    } else if (key == "record_timing") {
      if (!v.is_boolean()) throw ConfigError("config: 'record_timing' must be a boolean");
      cfg.record_timing = v.get<bool>();
    } else if (key == "kernel") {
      if (!v.is_string()) throw ConfigError("config: 'kernel' must be a string");
      const auto name = v.get<std::string>();
      if (name == "matern52") {
        cfg.family = KernelFamily::matern52;
      } else if (name == "rbf") {
        cfg.family = KernelFamily::rbf;
      } else {
        throw ConfigError("config: unknown kernel '" + name + "'");
      }
    } else if (key == "out") {
      if (!v.is_string()) throw ConfigError("config: 'out' must be a string");
      cfg.out = v.get<std::string>();
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError("config: 'seed' must be a nonnegative integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "q") {
      cfg.q = cfg.eulbo.q = get_int(v, key);
    } else if (key == "budget") {
      cfg.budget = get_int(v, key);
    } else if (key == "m") {
      cfg.eulbo.num_inducing = get_int(v, key);
    } else if (key == "n0") {
      cfg.eulbo.init_size = get_int(v, key);
    } else if (key == "noise_sd") {
      cfg.noise_sd = get_double(v, key);
    } else if (key == "step_x") {
      cfg.eulbo.step_x = get_double(v, key);
    } else if (key == "step_w") {
      cfg.eulbo.step_w = get_double(v, key);
    } else if (key == "batch_size") {
      cfg.eulbo.batch_size = get_int(v, key);
    } else if (key == "clip") {
      cfg.eulbo.clip = get_double(v, key);
    } else if (key == "max_epochs") {
      cfg.eulbo.max_epochs = get_int(v, key);
    } else if (key == "fail_limit") {
      cfg.eulbo.fail_limit = get_int(v, key);
    } else if (key == "acq_restarts") {
      cfg.eulbo.acq_restarts = get_int(v, key);
    } else if (key == "acq_raw_samples") {
      cfg.eulbo.acq_raw_samples = get_int(v, key);
    } else if (key == "acq_max_steps") {
      cfg.eulbo.acq_max_steps = get_int(v, key);
    } else if (key == "quad_points") {
      cfg.eulbo.quad_points = get_int(v, key);
    } else if (key == "mc_samples") {
      cfg.eulbo.mc_samples = get_int(v, key);
    } else if (key == "progress_tol") {
      cfg.eulbo.progress_tol = get_double(v, key);
    } else if (key == "threads") {
      cfg.eulbo.threads = get_int(v, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["task"] = cfg.task;
  j["method"] = to_string(cfg.method);
  j["method_label"] = method_label(cfg.method);
  j["turbo"] = cfg.turbo;
  j["q"] = cfg.q;
  j["budget"] = cfg.budget;
  j["seed"] = cfg.seed;
  j["noise_sd"] = cfg.noise_sd;
  j["record_timing"] = cfg.record_timing;
  j["kernel"] = cfg.family == KernelFamily::rbf ? "rbf" : "matern52";
  j["out"] = cfg.out;
  j["m"] = cfg.eulbo.num_inducing;
  j["n0"] = cfg.eulbo.init_size;
  j["step_x"] = cfg.eulbo.step_x;
  j["step_w"] = cfg.eulbo.step_w;
  j["batch_size"] = cfg.eulbo.batch_size;
  j["clip"] = cfg.eulbo.clip;
  j["max_epochs"] = cfg.eulbo.max_epochs;
  j["fail_limit"] = cfg.eulbo.fail_limit;
  j["acq_restarts"] = cfg.eulbo.acq_restarts;
  j["acq_raw_samples"] = cfg.eulbo.acq_raw_samples;
  j["acq_max_steps"] = cfg.eulbo.acq_max_steps;
  j["quad_points"] = cfg.eulbo.quad_points;
  j["mc_samples"] = cfg.eulbo.mc_samples;
  j["progress_tol"] = cfg.eulbo.progress_tol;
  j["threads"] = cfg.eulbo.threads;
  return j;
}

std::string_view error_class_of(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid-argument";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const StaleContext*>(&e)) return "stale-context";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  return "internal";
}

RunRecord run_bo(const RunConfig& cfg) {
  cfg.validate();
  RunRecord rec;
  rec.config = cfg;
  rec.version = std::string(EULBO_VERSION) + "+" + EULBO_GIT_REV;

  const ObjectiveSpec obj = make_objective(cfg.task);
  const Index d = obj.dim, n0 = cfg.eulbo.init_size, q = cfg.q;
  const Vector<double> lower = obj.bounds.lower, width = obj.bounds.upper - obj.bounds.lower;
  const Bounds<double> unit = Bounds<double>::unit(d);
  auto noise_rng = make_rng(cfg.seed, RngStream::objective_noise);

  Matrix<double> X(cfg.budget, d);
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(cfg.budget));
  double best = -std::numeric_limits<double>::infinity();
  auto evaluate = [&](const Matrix<double>& batch) {
    Index arg = -1;
    double batch_best = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < batch.rows(); ++i) {
      const Vector<double> u = batch.row(i).transpose().cwiseMax(0.0).cwiseMin(1.0);
      double v = obj.evaluate(Vector<double>(lower + u.cwiseProduct(width)));
      if (cfg.noise_sd > 0) v += cfg.noise_sd * noise_rng.normal();
      if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
      const Index row = static_cast<Index>(y.size());
      X.row(row) = u.transpose();
      y.push_back(v);
      best = std::max(best, v);
      if (v > batch_best) batch_best = v, arg = row;
    }
    return std::pair<double, Index>{batch_best, arg};
  };
  auto elapsed_ms = [&](std::chrono::steady_clock::time_point start) {
    if (!cfg.record_timing) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  auto turbo = TrustRegionState<double>::initial(TurboConfig<double>::defaults(d, q));
  const bool svgp = cfg.method != Method::exact_ei;
  const UtilityKind kind = utility_kind(cfg.method, q);
  const bool eulbo_method = cfg.method == Method::eulbo_ei || cfg.method == Method::eulbo_kg;
  Hyperparams<double> theta = Hyperparams<double>::isotropic(d, kInitialTheta, kInitialTheta, kInitialTheta);
  SvgpModel<double> model;
  Index restarts = 0;

  try {
    auto start = std::chrono::steady_clock::now();
    const Matrix<double> init = uniform_design(cfg.seed, 0, n0, d);
    const auto [init_best, init_arg] = evaluate(init);
    const Vector<double> init_x = X.row(init_arg).transpose();
    turbo = tr_update(turbo, init_best, &init_x);
    rec.rows.push_back(RunRow{0, n0, best, kNaN, kNaN, cfg.turbo ? turbo.length : kNaN, elapsed_ms(start), 0,
                              digest(init)});
    if (svgp) {
      const Index m = std::min<Index>(cfg.eulbo.num_inducing, n0);
      model = SvgpModel<double>::from_prior(greedy_maxdet_select<double>(init, theta, cfg.family, m), theta,
                                            cfg.family);
    }

    for (std::uint64_t t = 0; static_cast<Index>(y.size()) + q <= cfg.budget; ++t) {
      start = std::chrono::steady_clock::now();
      const Dataset<double> data = standardized(X, y);
      RunRow row{static_cast<Index>(t) + 1, 0, 0.0, kNaN, kNaN, kNaN, 0.0, 0, ""};
      Matrix<double> proposal;
      if (!svgp) {
        theta = fit_exact_hyperparams(data, theta, cfg.family, cfg.eulbo.hyper_box);
        const ExactGpPosterior<double> gp(data, theta, cfg.family);
        const Bounds<double> region = cfg.turbo ? tr_bounds(turbo, theta.lengthscales, unit) : unit;
        std::optional<BaseSamples<double>> samples;
        if (q > 1) samples = BaseSamples<double>::draw(cfg.eulbo.mc_samples, q, cfg.seed, t);
        const auto acq = exact_acquisition(gp, data.best_target(), samples ? &*samples : nullptr);
        proposal = maximize_acquisition<double>(acq, region, q, cfg.eulbo.acq_options(cfg.seed, 2 * t)).x;
      } else {
        RefinementMask fit_mask;
        if (cfg.method == Method::moss_elbo_ei) {
          model = relocate_inducing(
              model, greedy_maxdet_select<double>(data.inputs, model.hypers, cfg.family, model.num_inducing()));
          fit_mask.refine_inducing = false;
        }
        const auto samples = make_base_samples(cfg.eulbo, kind, cfg.seed, t);
        const BaseSamples<double>* sp = samples ? &*samples : nullptr;
        const auto fit = fit_elbo(model, data, cfg.eulbo, cfg.seed, t, fit_mask);
        model = fit.model;
        row.elbo = fit.best_value;
        const Bounds<double> region = cfg.turbo ? tr_bounds(turbo, model.hypers.lengthscales, unit) : unit;
        auto [query, value] = acquire_query(model, data, cfg.eulbo, kind, sp, region, cfg.seed, t);
        if (eulbo_method) {
          const auto res = maximize_eulbo(model, query, data, cfg.eulbo, RefinementMask{}, kind, sp, &region, cfg.seed, t);
          model = res.model;
          query = res.query;
          row.eulbo = res.best_value;
        }
        proposal = query.x;
      }
      row.x_digest = digest(proposal);
      const auto [batch_best, batch_arg] = evaluate(proposal);
      if (cfg.turbo) {
        const Vector<double> bx = X.row(batch_arg).transpose();
        turbo = tr_update(turbo, batch_best, &bx);
        if (turbo.restart) {
          const Index k = std::min<Index>(n0, cfg.budget - static_cast<Index>(y.size()));
          if (k > 0) {
            const Matrix<double> reseed = uniform_design(cfg.seed, ++restarts, k, d);
            const Index first = static_cast<Index>(y.size());
            evaluate(reseed);
            Dataset<double> batch{X.middleRows(first, k), Vector<double>(k), unit};
            for (Index i = 0; i < k; ++i) batch.targets(i) = y[static_cast<std::size_t>(first + i)];
            turbo = tr_restart(turbo, batch);
            row.reseed_calls = k;
          }
        }
        row.tr_length = turbo.length;
      }
      row.oracle_calls = static_cast<Index>(y.size());
      row.best_value = best;
      row.wall_ms = elapsed_ms(start);
      rec.rows.push_back(row);
    }
  } catch (const std::exception& e) {
    rec.status = "aborted";
    rec.error_class = error_class_of(e);
    rec.error_message = e.what();
  }
  return rec;
}

}  // namespace eulbo::bench
