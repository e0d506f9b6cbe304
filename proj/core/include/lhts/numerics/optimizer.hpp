#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lhts::numerics {

double l2_norm(std::span<const double> v);

/// Rescales `grad` in place so its L2 norm is at most `max_norm` (no-op when
/// max_norm <= 0). Returns the norm before clipping.
double clip_gradient_norm(std::span<double> grad, double max_norm);

/// params -= learning_rate * grad
void gradient_descent_step(std::span<double> params, std::span<const double> grad,
                           double learning_rate);

class Adam {
 public:
  explicit Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t iterations() const { return t_; }
  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double learning_rate) { learning_rate_ = learning_rate; }

 private:
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace lhts::numerics
