#pragma once

#include "eulbo/bench/run.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace eulbo::bench {

inline constexpr const char* kCsvHeader = "iter,oracle_calls,best_value,elbo,eulbo,tr_length,wall_ms";

void write_csv(const RunRecord& rec, std::ostream& os);
std::string to_csv(const RunRecord& rec);

nlohmann::ordered_json to_json(const RunRecord& rec);
/// Inverse of `to_json`.
RunRecord record_from_json(const nlohmann::json& j);

/// Writes `<prefix>.csv` and `<prefix>.json`; throws std::runtime_error on I/O failure.
void write_outputs(const RunRecord& rec, const std::string& prefix);

struct SummaryRow {
  std::string method;
  Index oracle_calls = 0;
  Index count = 0;
  double mean = 0.0;
  double se = 0.0;  // sample standard deviation / √count; 0 for a single record
};

/// Per method, mean and standard error of best_value at every oracle-call count seen in
/// that method's records. Each record contributes its last row at or before the checkpoint.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

}  // namespace eulbo::bench
