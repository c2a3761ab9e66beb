#include "eulbo/bench/report.hpp"
#include "eulbo/lbfgs.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace eulbo;
using namespace eulbo::bench;
using namespace eulbo::testing;

namespace {

// Second transcription of the Hartmann-6 table, written column-major.
double hartmann6_reference(const Vec& x) {
  Eigen::Matrix<double, 6, 4> A, P;
  A << 10, 0.05, 3, 17, 3, 10, 3.5, 8, 17, 17, 1.7, 0.05, 3.5, 0.1, 10, 10, 1.7, 8, 17, 0.1, 8, 14, 8, 14;
  P << 0.1312, 0.2329, 0.2348, 0.4047, 0.1696, 0.4135, 0.1451, 0.8828, 0.5569, 0.8307, 0.3522, 0.8732, 0.0124,
      0.3736, 0.2883, 0.5743, 0.8283, 0.1004, 0.3047, 0.1091, 0.5886, 0.9991, 0.6650, 0.0381;
  const Eigen::Vector4d alpha(1.0, 1.2, 3.0, 3.2);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec diff = x - P.col(i);
    s += alpha(i) * std::exp(-(A.col(i).array() * diff.array().square()).sum());
  }
  return s;
}

double ackley_reference(const Vec& x) {
  double a = 0, b = 0;
  for (Index i = 0; i < x.size(); ++i) {
    a += x(i) * x(i);
    b += std::cos(2 * M_PI * x(i));
  }
  const double n = double(x.size());
  return 20 * std::exp(-0.2 * std::sqrt(a / n)) + std::exp(b / n) - 20 - std::exp(1.0);
}

double levy_reference(const Vec& x) {
  const Index d = x.size();
  auto w = [&](Index i) { return 1 + (x(i) - 1) / 4; };
  double s = std::sin(M_PI * w(0)) * std::sin(M_PI * w(0));
  for (Index i = 0; i < d - 1; ++i) {
    const double t = std::sin(M_PI * w(i) + 1);
    s += (w(i) - 1) * (w(i) - 1) * (1 + 10 * t * t);
  }
  const double t = std::sin(2 * M_PI * w(d - 1));
  return -(s + (w(d - 1) - 1) * (w(d - 1) - 1) * (1 + t * t));
}

double rastrigin_reference(const Vec& x) {
  double s = 0;
  for (Index i = 0; i < x.size(); ++i) s += 10 + x(i) * x(i) - 10 * std::cos(2 * M_PI * x(i));
  return -s;
}

RunConfig tiny_config(Method method, std::uint64_t seed = 5) {
  RunConfig cfg;
  cfg.task = "hartmann6";
  cfg.method = method;
  cfg.seed = seed;
  cfg.budget = 14;
  cfg.record_timing = false;
  cfg.eulbo.init_size = 10;
  cfg.eulbo.num_inducing = 6;
  cfg.eulbo.max_epochs = 4;
  cfg.eulbo.acq_raw_samples = 32;
  cfg.eulbo.acq_restarts = 2;
  cfg.eulbo.acq_max_steps = 30;
  cfg.eulbo.mc_samples = 6;
  return cfg;
}

void check_accounting(const RunRecord& rec) {
  REQUIRE(rec.ok());
  REQUIRE(!rec.rows.empty());
  const Index q = rec.config.q;
  CHECK(rec.rows[0].oracle_calls == rec.config.eulbo.init_size);
  Index reseeds = 0;
  for (std::size_t i = 1; i < rec.rows.size(); ++i) {
    const auto& r = rec.rows[i];
    CHECK(r.iter == Index(i));
    CHECK(r.oracle_calls == rec.rows[i - 1].oracle_calls + q + r.reseed_calls);
    CHECK(r.best_value >= rec.rows[i - 1].best_value);
    reseeds += r.reseed_calls;
  }
  const Index iterations = Index(rec.rows.size()) - 1;
  CHECK(rec.total_calls() == rec.config.eulbo.init_size + q * iterations + reseeds);
  CHECK(rec.total_calls() <= rec.config.budget);
  CHECK(rec.total_calls() + q > rec.config.budget);
}

}  // namespace

TEST_CASE("hartmann6 at the published maximizer and against a second transcription") {
  CHECK(std::abs(hartmann6(hartmann6_argmax()) - 3.32237) < 1e-4);
  const Vec zero = Vec::Zero(6);
  CHECK(std::abs(hartmann6(zero) - hartmann6_reference(zero)) < 1e-12);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec x = random_uniform(rng, 1, 6).row(0).transpose();
    CHECK(std::abs(hartmann6(x) - hartmann6_reference(x)) < 1e-12);
  }
  Vec swapped = hartmann6_argmax();
  std::swap(swapped(0), swapped(1));
  CHECK(std::abs(hartmann6(swapped) - hartmann6(hartmann6_argmax())) > 1e-3);
  CHECK_THROWS_AS(hartmann6(Vec::Constant(6, 1.5)), InvalidArgument);
  CHECK_THROWS_AS(hartmann6(Vec::Zero(5)), InvalidArgument);
}

TEST_CASE("hartmann6 maximum found by multi-start gradient ascent") {
  std::mt19937_64 rng(2);
  auto objective = [](const Vec& x, Vec& grad) {
    grad.resize(6);
    for (Index k = 0; k < 6; ++k) {
      Vec hi = x, lo = x;
      const double h = 1e-6;
      hi(k) = std::min(1.0, x(k) + h);
      lo(k) = std::max(0.0, x(k) - h);
      grad(k) = (hartmann6_reference(hi) - hartmann6_reference(lo)) / (hi(k) - lo(k));
    }
    return hartmann6_reference(x);
  };
  double best = -1;
  Vec arg;
  for (int s = 0; s < 30; ++s) {
    const Vec x0 = random_uniform(rng, 1, 6).row(0).transpose();
    const auto res = lbfgs_maximize<double>(objective, x0, Vec::Zero(6), Vec::Ones(6));
    if (res.value > best) best = res.value, arg = res.x;
  }
  MESSAGE("multi-start maximum " << best);
  CHECK(std::abs(best - 3.32237) < 1e-4);
  CHECK((arg - hartmann6_argmax()).norm() < 1e-3);
  CHECK(hartmann6(arg) <= 3.32237 + 1e-4);
}

TEST_CASE("synthetic suite optima and second transcriptions") {
  CHECK(std::abs(ackley(Vec::Zero(7))) < 1e-14);
  CHECK(std::abs(levy(Vec::Ones(5))) < 1e-14);
  CHECK(std::abs(rastrigin(Vec::Zero(9))) < 1e-14);
  std::mt19937_64 rng(3);
  for (const std::string name : {"ackley", "levy", "rastrigin"}) {
    const auto spec = synthetic_suite(name, 12);
    CHECK(spec.optimum == 0.0);
    CHECK(spec.dim == 12);
    for (int i = 0; i < 20; ++i) {
      const Vec u = random_uniform(rng, 1, 12).row(0).transpose();
      const Vec x = spec.bounds.lower + u.cwiseProduct(spec.bounds.upper - spec.bounds.lower);
      const double ref = name == "ackley" ? ackley_reference(x) : name == "levy" ? levy_reference(x) : rastrigin_reference(x);
      CHECK(std::abs(spec.evaluate(x) - ref) < 1e-12);
      CHECK(spec.evaluate(x) <= 1e-12);
    }
    CHECK_THROWS_AS(spec.evaluate(Vec::Constant(12, 100.0)), InvalidArgument);
  }
  CHECK(make_objective("ackley50").dim == 50);
  CHECK(make_objective("hartmann6").optimum == 3.32237);
  CHECK_THROWS_AS(make_objective("sphere3"), InvalidArgument);
  CHECK_THROWS_AS(make_objective("ackley"), InvalidArgument);
}

TEST_CASE("budget equal to the initial design") {
  auto cfg = tiny_config(Method::elbo_ei);
  cfg.budget = cfg.eulbo.init_size;
  const auto rec = run_bo(cfg);
  REQUIRE(rec.ok());
  REQUIRE(rec.rows.size() == 1);
  auto rng = make_rng(cfg.seed, RngStream::initial_design, 0);
  double best = -1e300;
  for (Index i = 0; i < cfg.eulbo.init_size; ++i) {
    Vec x(6);
    for (Index j = 0; j < 6; ++j) x(j) = rng.uniform();
    best = std::max(best, hartmann6_reference(x));
  }
  CHECK(rec.rows[0].best_value == doctest::Approx(best).epsilon(1e-14));
  CHECK(to_csv(rec) == std::string(kCsvHeader) + "\n0,10," + [&] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", rec.rows[0].best_value);
    return std::string(buf);
  }() + ",nan,nan,nan,0.000\n");
}

TEST_CASE("every method runs, keeps exact accounting and is byte-reproducible") {
  for (Method m : {Method::exact_ei, Method::elbo_ei, Method::moss_elbo_ei, Method::eulbo_ei, Method::eulbo_kg}) {
    CAPTURE(to_string(m));
    const auto cfg = tiny_config(m);
    const auto a = run_bo(cfg);
    check_accounting(a);
    CHECK(a.rows.size() == 5);
    const auto b = run_bo(cfg);
    CHECK(to_csv(a) == to_csv(b));
    CHECK(to_json(a).dump() == to_json(b).dump());
    const bool svgp = m != Method::exact_ei;
    const bool eulbo = m == Method::eulbo_ei || m == Method::eulbo_kg;
    CHECK(std::isfinite(a.rows[1].elbo) == svgp);
    CHECK(std::isfinite(a.rows[1].eulbo) == eulbo);
    CHECK(std::isnan(a.rows[1].tr_length));
  }
}

TEST_CASE("batch and trust-region runs") {
  auto cfg = tiny_config(Method::eulbo_ei, 9);
  cfg.q = cfg.eulbo.q = 2;
  cfg.budget = 15;
  const auto batch = run_bo(cfg);
  check_accounting(batch);
  CHECK(batch.rows.size() == 3);

  auto tr = tiny_config(Method::elbo_ei, 4);
  tr.task = "ackley8";
  tr.turbo = true;
  tr.budget = 16;
  const auto rec = run_bo(tr);
  check_accounting(rec);
  for (const auto& r : rec.rows) {
    CHECK(r.tr_length >= std::pow(0.5, 7));
    CHECK(r.tr_length <= 1.6);
  }
  CHECK(rec.rows[0].tr_length == 0.8);
}

TEST_CASE("different seeds give different runs") {
  const auto a = run_bo(tiny_config(Method::exact_ei, 1));
  const auto b = run_bo(tiny_config(Method::exact_ei, 2));
  CHECK(to_csv(a) != to_csv(b));
}

TEST_CASE("csv and json emission") {
  const auto rec = run_bo(tiny_config(Method::eulbo_kg));
  const std::string csv = to_csv(rec);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "iter,oracle_calls,best_value,elbo,eulbo,tr_length,wall_ms");
  std::size_t lines = 1;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == rec.rows.size() + 1);

  const auto j = to_json(rec);
  CHECK(j.at("config").at("method") == "eulbo-kg");
  CHECK(j.at("config").at("m") == 6);
  CHECK(j.at("iterations").at("best_value").size() == rec.rows.size());
  const auto back = record_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_csv(back) == csv);
  CHECK(to_json(back).dump() == j.dump());
  CHECK(back.rows.back().x_digest == rec.rows.back().x_digest);

  auto moss = tiny_config(Method::moss_elbo_ei);
  CHECK(config_to_json(moss).at("method_label") == "greedy-maxdet (Moss-style)");
}

TEST_CASE("config overrides") {
  const auto flat = nlohmann::json::parse(R"({"task": "levy4", "method": "eulbo-kg", "turbo": true, "q": 3,
                                              "budget": 500, "seed": 11, "m": 50, "step_w": 0.02})");
  const auto cfg = apply_overrides(RunConfig{}, flat);
  CHECK(cfg.task == "levy4");
  CHECK(cfg.method == Method::eulbo_kg);
  CHECK(cfg.turbo);
  CHECK(cfg.q == 3);
  CHECK(cfg.eulbo.q == 3);
  CHECK(cfg.budget == 500);
  CHECK(cfg.seed == 11);
  CHECK(cfg.eulbo.num_inducing == 50);
  CHECK(cfg.eulbo.step_w == 0.02);
  CHECK_NOTHROW(cfg.validate());
  CHECK_THROWS_AS(apply_overrides(RunConfig{}, nlohmann::json::parse(R"({"bogus": 1})")), ConfigError);
  CHECK_THROWS_AS(apply_overrides(RunConfig{}, nlohmann::json::parse(R"({"q": "two"})")), ConfigError);
  CHECK_THROWS_AS(apply_overrides(RunConfig{}, nlohmann::json::parse(R"({"nested": {"a": 1}})")), ConfigError);
  CHECK_THROWS_AS(apply_overrides(RunConfig{}, nlohmann::json::parse(R"({"method": "ucb"})")), InvalidArgument);
  RunConfig small;
  small.budget = 50;
  CHECK_THROWS_AS(small.validate(), InvalidArgument);
  CHECK(error_class_of(NumericalError("x")) == "numerical");
  CHECK(error_class_of(InvalidArgument("x")) == "invalid-argument");
  CHECK(error_class_of(ConfigError("x")) == "config");
}

TEST_CASE("summarize") {
  RunRecord a;
  a.config.method = Method::elbo_ei;
  a.rows = {RunRow{0, 10, 1.0}, RunRow{1, 11, 2.0}, RunRow{2, 12, 4.0}};
  const auto single = summarize({a});
  REQUIRE(single.size() == 3);
  for (const auto& s : single) CHECK(s.se == 0.0);
  CHECK(single[2].mean == 4.0);
  const auto twin = summarize({a, a});
  for (const auto& s : twin) CHECK(s.se == 0.0);

  RunRecord b = a, c = a;
  b.rows[2].best_value = 6.0;
  c.rows[2].best_value = 11.0;
  RunRecord other;
  other.config.method = Method::eulbo_ei;
  other.rows = {RunRow{0, 10, 0.5}};
  const auto s = summarize({a, b, c, other});
  // values 4, 6, 11: mean 7, sample sd sqrt(13), se sqrt(13/3)
  const auto it = std::find_if(s.begin(), s.end(), [](const SummaryRow& r) { return r.method == "elbo-ei" && r.oracle_calls == 12; });
  REQUIRE(it != s.end());
  CHECK(it->count == 3);
  CHECK(it->mean == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(it->se == doctest::Approx(std::sqrt(13.0 / 3.0)).epsilon(1e-14));
  const auto e = std::find_if(s.begin(), s.end(), [](const SummaryRow& r) { return r.method == "eulbo-ei"; });
  REQUIRE(e != s.end());
  CHECK(e->mean == 0.5);
}
