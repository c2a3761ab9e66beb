#include "eulbo/bench/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kNumerical = 4,
  kOutput = 5,
};

int exit_code_for(std::string_view error_class) {
  if (error_class == "invalid-argument") return kUsage;
  if (error_class == "config") return kConfig;
  if (error_class == "numerical" || error_class == "stale-context") return kNumerical;
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace eulbo::bench;
  CLI::App app{"Bayesian optimization with approximation-aware sparse GPs"};
  std::string task, method, config_path, out;
  bool turbo = false;
  int q = 0, m = 0;
  long budget = 0;
  std::uint64_t seed = 0;
  app.add_option("--task", task, "hartmann6, ackley<d>, levy<d> or rastrigin<d>");
  app.add_option("--method", method, "exact-ei, elbo-ei, moss-elbo-ei, eulbo-ei or eulbo-kg");
  auto* turbo_flag = app.add_flag("--turbo", turbo, "restrict acquisition to a trust region");
  auto* q_opt = app.add_option("--q", q, "batch size")->check(CLI::PositiveNumber);
  auto* budget_opt = app.add_option("--budget", budget, "total oracle calls")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "run seed");
  auto* m_opt = app.add_option("--m", m, "number of inducing points")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output prefix for <out>.csv and <out>.json (CSV to stdout if omitted)");
  app.add_option("--config", config_path, "flat JSON file of overrides")->check(CLI::ExistingFile);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read " + config_path);
      nlohmann::json flat;
      try {
        flat = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      cfg = apply_overrides(cfg, flat);
    }
    if (!task.empty()) cfg.task = task;
    if (!method.empty()) cfg.method = parse_method(method);
    if (*turbo_flag) cfg.turbo = turbo;
    if (*q_opt) cfg.q = cfg.eulbo.q = q;
    if (*budget_opt) cfg.budget = budget;
    if (*seed_opt) cfg.seed = seed;
    if (*m_opt) cfg.eulbo.num_inducing = m;
    if (!out.empty()) cfg.out = out;
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsage;
  }

  const RunRecord rec = run_bo(cfg);
  try {
    if (cfg.out.empty()) {
      write_csv(rec, std::cout);
    } else {
      write_outputs(rec, cfg.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kOutput;
  }
  if (!rec.ok()) {
    std::cerr << "run aborted (" << rec.error_class << "): " << rec.error_message << '\n';
    return exit_code_for(rec.error_class);
  }
  return kOk;
}
