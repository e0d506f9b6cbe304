#include "lhts/numerics/tape.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <stdexcept>
#include <string>

namespace lhts::numerics {

Var Tape::append(double value) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({static_cast<std::uint32_t>(edge_parent_.size()), 0});
  return Var(value, this, index);
}

Var Tape::parameter(double value) {
  Var v = append(value);
  parameter_nodes_.push_back(v.index());
  return v;
}

Var Tape::push(double value, std::span<const Var> parents, std::span<const double> partials) {
  assert(parents.size() == partials.size());
  Var out = append(value);
  Node& node = nodes_.back();
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const Var& p = parents[i];
    if (!p.attached()) continue;
    if (p.tape() != this) throw std::invalid_argument("Tape::push: parent recorded on another tape");
    assert(p.index() < out.index());
    edge_parent_.push_back(p.index());
    edge_partial_.push_back(partials[i]);
    ++node.num_edges;
  }
  return out;
}

Var Tape::unary(double value, const Var& a, double da) {
  const Var parents[1] = {a};
  const double partials[1] = {da};
  return push(value, parents, partials);
}

Var Tape::binary(double value, const Var& a, double da, const Var& b, double db) {
  const Var parents[2] = {a, b};
  const double partials[2] = {da, db};
  return push(value, parents, partials);
}

std::vector<double> Tape::gradient(const Var& loss) const {
  if (loss.tape() != this || loss.index() >= nodes_.size()) {
    throw std::invalid_argument("Tape::gradient: loss is not a scalar node on this tape");
  }
  std::vector<double> adjoint(loss.index() + 1, 0.0);
  adjoint[loss.index()] = 1.0;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    const Node& node = nodes_[i];
    const std::uint32_t end = node.first_edge + node.num_edges;
    for (std::uint32_t e = node.first_edge; e < end; ++e) {
      adjoint[edge_parent_[e]] += a * edge_partial_[e];
    }
  }
  std::vector<double> grad(parameter_nodes_.size(), 0.0);
  for (std::size_t p = 0; p < parameter_nodes_.size(); ++p) {
    const std::uint32_t node = parameter_nodes_[p];
    if (node <= loss.index()) grad[p] = adjoint[node];
  }
  return grad;
}

void Tape::clear() {
  nodes_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
  parameter_nodes_.clear();
}

namespace {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.attached() && b.attached() && a.tape() != b.tape()) {
    throw std::invalid_argument("operands recorded on different tapes");
  }
  return a.attached() ? a.tape() : b.tape();
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  const double v = a.value() + b.value();
  Tape* t = common_tape(a, b);
  return t ? t->binary(v, a, 1.0, b, 1.0) : Var(v);
}

Var operator-(const Var& a, const Var& b) {
  const double v = a.value() - b.value();
  Tape* t = common_tape(a, b);
  return t ? t->binary(v, a, 1.0, b, -1.0) : Var(v);
}

Var operator*(const Var& a, const Var& b) {
  const double v = a.value() * b.value();
  Tape* t = common_tape(a, b);
  return t ? t->binary(v, a, b.value(), b, a.value()) : Var(v);
}

Var operator/(const Var& a, const Var& b) {
  const double v = a.value() / b.value();
  Tape* t = common_tape(a, b);
  return t ? t->binary(v, a, 1.0 / b.value(), b, -v / b.value()) : Var(v);
}

Var operator-(const Var& a) {
  return a.attached() ? a.tape()->unary(-a.value(), a, -1.0) : Var(-a.value());
}

Var exp(const Var& a) {
  const double v = std::exp(a.value());
  return a.attached() ? a.tape()->unary(v, a, v) : Var(v);
}

Var log(const Var& a) {
  const double v = std::log(a.value());
  return a.attached() ? a.tape()->unary(v, a, 1.0 / a.value()) : Var(v);
}

Var tanh(const Var& a) {
  const double v = std::tanh(a.value());
  return a.attached() ? a.tape()->unary(v, a, 1.0 - v * v) : Var(v);
}

Var square(const Var& a) {
  const double v = a.value() * a.value();
  return a.attached() ? a.tape()->unary(v, a, 2.0 * a.value()) : Var(v);
}

namespace {

Tape* first_tape(std::span<const Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.attached()) continue;
    if (tape && v.tape() != tape) throw std::invalid_argument("operands recorded on different tapes");
    tape = v.tape();
  }
  return tape;
}

}  // namespace

Var weighted_sum(std::span<const Var> terms, std::span<const double> coefficients) {
  if (terms.size() != coefficients.size()) {
    throw std::invalid_argument("weighted_sum: size mismatch");
  }
  double v = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) v += coefficients[i] * terms[i].value();
  Tape* t = first_tape(terms);
  return t ? t->push(v, terms, coefficients) : Var(v);
}

Var sum(std::span<const Var> terms) {
  const std::vector<double> ones(terms.size(), 1.0);
  return weighted_sum(terms, ones);
}

Var dot(std::span<const Var> weights, std::span<const double> inputs) {
  return weighted_sum(weights, inputs);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  std::vector<Var> parents;
  std::vector<double> partials;
  parents.reserve(2 * a.size());
  partials.reserve(2 * a.size());
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    v += a[i].value() * b[i].value();
    parents.push_back(a[i]);
    partials.push_back(b[i].value());
    parents.push_back(b[i]);
    partials.push_back(a[i].value());
  }
  Tape* t = first_tape(parents);
  return t ? t->push(v, parents, partials) : Var(v);
}

Var log_sum_exp(std::span<const Var> values) {
  if (values.empty()) throw std::domain_error("log_sum_exp: empty support");
  double m = -std::numeric_limits<double>::infinity();
  for (const Var& v : values) m = std::max(m, v.value());
  if (m == -std::numeric_limits<double>::infinity()) {
    throw std::domain_error("log_sum_exp: empty support");
  }
  double s = 0.0;
  for (const Var& v : values) s += std::exp(v.value() - m);
  const double out = m + std::log(s);
  std::vector<double> partials(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) partials[i] = std::exp(values[i].value() - out);
  Tape* t = first_tape(values);
  return t ? t->push(out, values, partials) : Var(out);
}

}  // namespace lhts::numerics
