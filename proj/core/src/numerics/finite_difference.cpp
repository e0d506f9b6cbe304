#include "lhts/numerics/finite_difference.hpp"

#include <algorithm>
#include <cmath>

#include "lhts/numerics/optimizer.hpp"

namespace lhts::numerics {

std::vector<double> central_difference(const ScalarFunction& f, std::span<const double> x,
                                       double step) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + step;
    const double up = f(point);
    point[i] = saved - step;
    const double down = f(point);
    point[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double scale = std::max(l2_norm(a), l2_norm(b));
  if (scale < floor) return 0.0;
  return std::sqrt(diff) / scale;
}

GradientCheck check_gradient(const ScalarFunction& f, std::span<const double> analytic,
                             std::span<const double> x, double step) {
  GradientCheck check;
  check.analytic.assign(analytic.begin(), analytic.end());
  check.numeric = central_difference(f, x, step);
  check.relative_error = relative_error(check.analytic, check.numeric);
  return check;
}

}  // namespace lhts::numerics
