#pragma once

#include "eulbo/bench/objectives.hpp"
#include "eulbo/eulbo_engine.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eulbo::bench {

/// Malformed or unreadable run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { exact_ei, elbo_ei, moss_elbo_ei, eulbo_ei, eulbo_kg };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
/// Human-readable label written to records.
std::string_view method_label(Method m);

struct RunConfig {
  std::string task = "hartmann6";
  Method method = Method::eulbo_ei;
  bool turbo = false;
  Index q = 1;
  Index budget = 300;
  std::uint64_t seed = 0;
  double noise_sd = 0.0;
  bool record_timing = true;  // false writes wall_ms = 0 so records are byte-stable
  KernelFamily family = KernelFamily::matern52;
  std::string out;
  EulboConfig<double> eulbo;  // m = num_inducing, n0 = init_size

  void validate() const;
};

/// Applies a flat key-value JSON object on top of `base`; unknown keys are rejected.
RunConfig apply_overrides(RunConfig base, const nlohmann::json& flat);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

struct RunRow {
  Index iter = 0;
  Index oracle_calls = 0;
  double best_value = 0.0;
  double elbo = 0.0;       // NaN where not applicable
  double eulbo = 0.0;      // NaN where not applicable
  double tr_length = 0.0;  // NaN without a trust region
  double wall_ms = 0.0;
  Index reseed_calls = 0;  // trust-region re-seed evaluations charged in this iteration
  std::string x_digest;    // hash of the proposed batch
};

struct RunRecord {
  RunConfig config;
  std::string version;
  std::vector<RunRow> rows;
  std::string status = "ok";  // "ok" or "aborted"
  std::string error_class;
  std::string error_message;

  bool ok() const { return status == "ok"; }
  Index total_calls() const { return rows.empty() ? 0 : rows.back().oracle_calls; }
};

/// Error class name used in records and exit codes.
std::string_view error_class_of(const std::exception& e);

/// Initial design, then per iteration: refit, select, evaluate, update the trust region.
RunRecord run_bo(const RunConfig& cfg);

}  // namespace eulbo::bench
