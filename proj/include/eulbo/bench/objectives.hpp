#pragma once

#include "eulbo/types.hpp"

#include <functional>
#include <string>

namespace eulbo::bench {

/// Black-box test function in the maximization convention.
struct ObjectiveSpec {
  std::string name;
  Index dim = 0;
  Bounds<double> bounds;
  std::function<double(const Vector<double>&)> evaluate;  // throws InvalidArgument outside `bounds`
  double optimum = 0.0;                                   // known global maximum
};

double hartmann6(const Vector<double>& x);
double ackley(const Vector<double>& x);
double levy(const Vector<double>& x);
double rastrigin(const Vector<double>& x);

/// Maximizer of hartmann6 as published.
Vector<double> hartmann6_argmax();

/// Negated synthetic function by name ("ackley", "levy" or "rastrigin") in dimension d.
ObjectiveSpec synthetic_suite(const std::string& name, Index d);

/// Task registry: "hartmann6" or a synthetic name followed by its dimension ("ackley50").
ObjectiveSpec make_objective(const std::string& task);

}  // namespace eulbo::bench
