#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace lhts::numerics {

class Tape;

/// Scalar handle into a Tape. A Var without a tape is a detached constant:
/// arithmetic with it records nothing and it receives no gradient.
class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

  double value() const { return value_; }
  bool attached() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }

 private:
  friend class Tape;
  Var(double value, Tape* tape, std::uint32_t index)
      : value_(value), tape_(tape), index_(index) {}

  double value_ = 0.0;
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

/// Reverse-mode recording of scalar operations.
///
/// Nodes are appended in evaluation order, so every parent index is smaller
/// than its child's index and a single reverse sweep visits each node once.
/// Each node stores its local partial derivatives with respect to its
/// parents; n-ary nodes (sums, dot products, log-sum-exp) keep edge counts
/// proportional to the real fan-in.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a trainable leaf. Parameter ids are assigned in call order.
  Var parameter(double value);

  /// Appends a node with the given parents and local partials.
  Var push(double value, std::span<const Var> parents, std::span<const double> partials);

  Var unary(double value, const Var& a, double da);
  Var binary(double value, const Var& a, double da, const Var& b, double db);

  /// d(loss)/d(parameter) for every registered parameter, indexed by id.
  /// Parameters the loss does not depend on get 0. Throws if `loss` is not a
  /// node recorded on this tape.
  std::vector<double> gradient(const Var& loss) const;

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_parameters() const { return parameter_nodes_.size(); }
  std::size_t num_edges() const { return edge_parent_.size(); }

  /// Drops all nodes and parameters but keeps allocated capacity.
  void clear();

 private:
  struct Node {
    std::uint32_t first_edge;
    std::uint32_t num_edges;
  };

  Var append(double value);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::vector<std::uint32_t> parameter_nodes_;
};

/// Value of a scalar regardless of whether it is recorded.
inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var square(const Var& a);
inline double square(double a) { return a * a; }

/// Σ coefficients[i] * terms[i] as one node.
Var weighted_sum(std::span<const Var> terms, std::span<const double> coefficients);
Var sum(std::span<const Var> terms);
inline double sum(std::span<const double> terms) {
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}
inline double weighted_sum(std::span<const double> terms, std::span<const double> coefficients) {
  double s = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) s += coefficients[i] * terms[i];
  return s;
}

/// Σ weights[i] * inputs[i] with constant inputs.
Var dot(std::span<const Var> weights, std::span<const double> inputs);
/// Σ a[i] * b[i] with both sides recorded.
Var dot(std::span<const Var> a, std::span<const Var> b);
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Var log_sum_exp(std::span<const Var> values);

}  // namespace lhts::numerics
