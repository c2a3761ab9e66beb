#include "eulbo/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace eulbo::bench {

namespace {

std::string number(double v, const char* fmt = "%.17g") {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

nlohmann::ordered_json nullable(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nullptr; }

double from_nullable(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

}  // namespace

void write_csv(const RunRecord& rec, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const auto& r : rec.rows) {
    os << r.iter << ',' << r.oracle_calls << ',' << number(r.best_value) << ',' << number(r.elbo) << ','
       << number(r.eulbo) << ',' << number(r.tr_length) << ',' << number(r.wall_ms, "%.3f") << '\n';
  }
}

std::string to_csv(const RunRecord& rec) {
  std::ostringstream os;
  write_csv(rec, os);
  return os.str();
}

nlohmann::ordered_json to_json(const RunRecord& rec) {
  nlohmann::ordered_json j;
  j["version"] = rec.version;
  j["seed"] = rec.config.seed;
  j["config"] = config_to_json(rec.config);
  j["status"] = rec.status;
  j["error_class"] = rec.error_class;
  j["error_message"] = rec.error_message;
  auto column = [&](auto get) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& r : rec.rows) a.push_back(get(r));
    return a;
  };
  nlohmann::ordered_json it;
  it["iter"] = column([](const RunRow& r) { return nlohmann::ordered_json(r.iter); });
  it["oracle_calls"] = column([](const RunRow& r) { return nlohmann::ordered_json(r.oracle_calls); });
  it["best_value"] = column([](const RunRow& r) { return nullable(r.best_value); });
  it["elbo"] = column([](const RunRow& r) { return nullable(r.elbo); });
  it["eulbo"] = column([](const RunRow& r) { return nullable(r.eulbo); });
  it["tr_length"] = column([](const RunRow& r) { return nullable(r.tr_length); });
  it["wall_ms"] = column([](const RunRow& r) { return nullable(r.wall_ms); });
  it["reseed_calls"] = column([](const RunRow& r) { return nlohmann::ordered_json(r.reseed_calls); });
  it["x_digest"] = column([](const RunRow& r) { return nlohmann::ordered_json(r.x_digest); });
  j["iterations"] = it;
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord rec;
  rec.version = j.at("version").get<std::string>();
  nlohmann::json flat = j.at("config");
  flat.erase("method_label");
  rec.config = apply_overrides(RunConfig{}, flat);
  rec.status = j.at("status").get<std::string>();
  rec.error_class = j.at("error_class").get<std::string>();
  rec.error_message = j.at("error_message").get<std::string>();
  const auto& it = j.at("iterations");
  const std::size_t n = it.at("iter").size();
  rec.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rec.rows[i];
    r.iter = it.at("iter")[i].get<Index>();
    r.oracle_calls = it.at("oracle_calls")[i].get<Index>();
    r.best_value = from_nullable(it.at("best_value")[i]);
    r.elbo = from_nullable(it.at("elbo")[i]);
    r.eulbo = from_nullable(it.at("eulbo")[i]);
    r.tr_length = from_nullable(it.at("tr_length")[i]);
    r.wall_ms = from_nullable(it.at("wall_ms")[i]);
    r.reseed_calls = it.at("reseed_calls")[i].get<Index>();
    r.x_digest = it.at("x_digest")[i].get<std::string>();
  }
  return rec;
}

void write_outputs(const RunRecord& rec, const std::string& prefix) {
  std::ofstream csv(prefix + ".csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open " + prefix + ".csv for writing");
  write_csv(rec, csv);
  std::ofstream js(prefix + ".json", std::ios::binary);
  if (!js) throw std::runtime_error("cannot open " + prefix + ".json for writing");
  js << to_json(rec).dump(2) << '\n';
  if (!csv.good() || !js.good()) throw std::runtime_error("write failed for " + prefix);
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[std::string(to_string(r.config.method))].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [method, recs] : groups) {
    std::set<Index> checkpoints;
    for (const auto* r : recs)
      for (const auto& row : r->rows) checkpoints.insert(row.oracle_calls);
    for (Index c : checkpoints) {
      std::vector<double> values;
      for (const auto* r : recs) {
        const RunRow* last = nullptr;
        for (const auto& row : r->rows) {
          if (row.oracle_calls <= c) last = &row;
        }
        if (last) values.push_back(last->best_value);
      }
      if (values.empty()) continue;
      SummaryRow s{method, c, static_cast<Index>(values.size()), 0.0, 0.0};
      for (double v : values) s.mean += v;
      s.mean /= double(values.size());
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / double(values.size() - 1)) / std::sqrt(double(values.size()));
      }
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace eulbo::bench
