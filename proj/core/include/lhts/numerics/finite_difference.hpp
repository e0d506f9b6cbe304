#pragma once

#include <functional>
#include <span>
#include <vector>

namespace lhts::numerics {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + e_i h) - f(x - e_i h)) / 2h for every coordinate.
std::vector<double> central_difference(const ScalarFunction& f, std::span<const double> x,
                                       double step = 1e-5);

/// ||a - b|| / max(||a||, ||b||); 0 when both norms are below `floor`.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-10);

struct GradientCheck {
  double relative_error = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
  bool passed(double tolerance) const { return relative_error <= tolerance; }
};

GradientCheck check_gradient(const ScalarFunction& f, std::span<const double> analytic,
                             std::span<const double> x, double step = 1e-5);

}  // namespace lhts::numerics
