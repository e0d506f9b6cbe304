#include "lhts/numerics/log_space.hpp"

#include <algorithm>
#include <stdexcept>

namespace lhts::numerics {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::domain_error("log_sum_exp: empty support");
  if (values.size() == 1) {
    if (values[0] == kNegInf) throw std::domain_error("log_sum_exp: empty support");
    return values[0];
  }
  const double m = *std::max_element(values.begin(), values.end());
  if (m == kNegInf) throw std::domain_error("log_sum_exp: empty support");
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> rev_cum_sum(std::span<const double> u) {
  std::vector<double> s(u.size());
  double acc = 0.0;
  for (std::size_t i = u.size(); i-- > 0;) {
    acc += u[i];
    s[i] = acc;
  }
  return s;
}

std::vector<double> rescale_log_probs(std::span<const double> log_probs, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("rescale_log_probs: temperature must be > 0");
  std::vector<double> scaled(log_probs.size());
  for (std::size_t k = 0; k < log_probs.size(); ++k) scaled[k] = log_probs[k] / temperature;
  const double lse = log_sum_exp(scaled);
  for (double& v : scaled) v -= lse;
  return scaled;
}

}  // namespace lhts::numerics
