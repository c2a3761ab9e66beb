#include "eulbo/bench/objectives.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

namespace eulbo::bench {

namespace {

constexpr double kAlpha[4] = {1.0, 1.2, 3.0, 3.2};
constexpr double kA[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                             {0.05, 10, 17, 0.1, 8, 14},
                             {3, 3.5, 1.7, 10, 17, 8},
                             {17, 8, 0.05, 10, 0.1, 14}};
constexpr double kP[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                             {2329, 4135, 8307, 3736, 1004, 9991},
                             {2348, 1451, 3522, 2883, 3047, 6650},
                             {4047, 8828, 8732, 5743, 1091, 381}};

void require_box(const Vector<double>& x, const Bounds<double>& b, const char* who) {
  if (!b.contains(x, 1e-12)) throw InvalidArgument(std::string(who) + ": input outside the domain");
}

}  // namespace

double hartmann6(const Vector<double>& x) {
  if (x.size() != 6) throw InvalidArgument("hartmann6: input must have 6 coordinates");
  require_box(x, Bounds<double>::unit(6), "hartmann6");
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double diff = x(j) - 1e-4 * kP[i][j];
      inner += kA[i][j] * diff * diff;
    }
    total += kAlpha[i] * std::exp(-inner);
  }
  return total;
}

Vector<double> hartmann6_argmax() {
  Vector<double> x(6);
  x << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
  return x;
}

double ackley(const Vector<double>& x) {
  const double d = static_cast<double>(x.size());
  const double sq = x.squaredNorm() / d;
  const double cs = (2.0 * std::numbers::pi * x.array()).cos().sum() / d;
  return -(-20.0 * std::exp(-0.2 * std::sqrt(sq)) - std::exp(cs) + 20.0 + std::numbers::e);
}

double levy(const Vector<double>& x) {
  const Index d = x.size();
  const Eigen::ArrayXd w = 1.0 + (x.array() - 1.0) / 4.0;
  const double pi = std::numbers::pi;
  double f = std::pow(std::sin(pi * w(0)), 2);
  for (Index i = 0; i + 1 < d; ++i) {
    f += (w(i) - 1.0) * (w(i) - 1.0) * (1.0 + 10.0 * std::pow(std::sin(pi * w(i) + 1.0), 2));
  }
  f += (w(d - 1) - 1.0) * (w(d - 1) - 1.0) * (1.0 + std::pow(std::sin(2.0 * pi * w(d - 1)), 2));
  return -f;
}

double rastrigin(const Vector<double>& x) {
  const double d = static_cast<double>(x.size());
  return -(10.0 * d + (x.array().square() - 10.0 * (2.0 * std::numbers::pi * x.array()).cos()).sum());
}

ObjectiveSpec synthetic_suite(const std::string& name, Index d) {
  if (d < 1) throw InvalidArgument("synthetic_suite: dimension must be positive");
  double half = 0.0;
  double (*fn)(const Vector<double>&) = nullptr;
  if (name == "ackley") {
    half = 32.768;
    fn = &ackley;
  } else if (name == "levy") {
    half = 10.0;
    fn = &levy;
  } else if (name == "rastrigin") {
    half = 5.12;
    fn = &rastrigin;
  } else {
    throw InvalidArgument("synthetic_suite: unknown function '" + name + "'");
  }
  ObjectiveSpec spec;
  spec.name = name + std::to_string(d);
  spec.dim = d;
  spec.bounds = Bounds<double>{Vector<double>::Constant(d, -half), Vector<double>::Constant(d, half)};
  spec.optimum = 0.0;
  const Bounds<double> box = spec.bounds;
  const std::string who = spec.name;
  spec.evaluate = [fn, box, who, d](const Vector<double>& x) {
    if (x.size() != d) throw InvalidArgument(who + ": wrong input dimension");
    require_box(x, box, who.c_str());
    return fn(x);
  };
  return spec;
}

ObjectiveSpec make_objective(const std::string& task) {
  if (task == "hartmann6") {
    ObjectiveSpec spec;
    spec.name = task;
    spec.dim = 6;
    spec.bounds = Bounds<double>::unit(6);
    spec.evaluate = &hartmann6;
    spec.optimum = 3.32237;
    return spec;
  }
  std::size_t split = task.size();
  while (split > 0 && std::isdigit(static_cast<unsigned char>(task[split - 1]))) --split;
  if (split == 0 || split == task.size()) throw InvalidArgument("make_objective: unknown task '" + task + "'");
  const long d = std::stol(task.substr(split));
  return synthetic_suite(task.substr(0, split), static_cast<Index>(d));
}

}  // namespace eulbo::bench
