#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lhts/numerics/tape.hpp"

namespace lhts::numerics {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log Σ exp(values[i]) with max-subtraction. Throws std::domain_error
/// ("empty support") for an empty list or one where every entry is -inf.
double log_sum_exp(std::span<const double> values);

/// s[i] = Σ_{j >= i} u[j].
std::vector<double> rev_cum_sum(std::span<const double> u);

/// out[k] = logits[k] - log_sum_exp(logits). Works for double and Var.
template <class S>
void log_softmax(std::span<const S> logits, std::span<S> out) {
  const S lse = log_sum_exp(logits);
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lse;
}

template <class S>
std::vector<S> log_softmax(std::span<const S> logits) {
  std::vector<S> out(logits.size());
  log_softmax<S>(logits, std::span<S>(out));
  return out;
}

/// Normalized log-probabilities of `log_probs / temperature`. Temperature
/// must be positive; zero means argmax and is handled by callers.
std::vector<double> rescale_log_probs(std::span<const double> log_probs, double temperature);

/// KL(p || q) between two categorical distributions given in log space.
/// Entries where p has no mass contribute nothing.
template <class S>
S categorical_kl(std::span<const double> log_p, std::span<const S> log_q) {
  std::vector<S> terms;
  std::vector<double> coeffs;
  terms.reserve(log_p.size());
  coeffs.reserve(log_p.size());
  double constant = 0.0;
  for (std::size_t k = 0; k < log_p.size(); ++k) {
    if (log_p[k] == kNegInf) continue;
    const double pk = std::exp(log_p[k]);
    constant += pk * log_p[k];
    terms.push_back(log_q[k]);
    coeffs.push_back(-pk);
  }
  return weighted_sum(std::span<const S>(terms), std::span<const double>(coeffs)) + S(constant);
}

}  // namespace lhts::numerics
