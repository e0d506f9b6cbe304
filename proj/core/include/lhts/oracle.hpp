#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lhts/ar_model.hpp"
#include "lhts/numerics/rng.hpp"

namespace lhts::oracle {

using ar::Sequence;
using ar::Token;

/// Default cap on V^L for every enumeration.
inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;

/// All V^L sequences of a fixed length in lexicographic order (first token
/// most significant).
class SequenceSpace {
 public:
  SequenceSpace(int vocab_size, int length, std::size_t cap = kDefaultEnumerationCap);

  int vocab_size() const { return vocab_size_; }
  int length() const { return length_; }
  std::size_t size() const { return size_; }

  Sequence sequence(std::size_t index) const;
  std::size_t index(std::span<const Token> x) const;

 private:
  int vocab_size_;
  int length_;
  std::size_t size_;
};

/// Explicit log-probabilities for every sequence of a SequenceSpace.
/// `log_partition` records the log normalizer that was subtracted when the
/// table was produced by temperature scaling (0 otherwise).
struct CategoricalTable {
  int vocab_size = 0;
  int length = 0;
  std::vector<double> log_probs;
  double log_partition = 0.0;

  SequenceSpace space(std::size_t cap = kDefaultEnumerationCap) const {
    return SequenceSpace(vocab_size, length, cap);
  }
  std::size_t size() const { return log_probs.size(); }
  double prob(std::size_t index) const;
  double log_prob(std::span<const Token> x) const;
  /// log Σ exp(log_probs); 0 for a normalized table.
  double log_total() const;

  /// Builds a table from unnormalized log weights, normalizing them.
  static CategoricalTable from_log_weights(int vocab_size, int length, std::vector<double> log_weights);
};

/// Table entry for x = Σ_i log p(x_i | x_{<i}) under the model.
CategoricalTable enumerate_joint(const ar::Model& model, int length, std::optional<double> t_cond = {},
                                 std::size_t cap = kDefaultEnumerationCap);

/// log p_T(x) = log p(x) / T - log Z. T = 1 returns the input unchanged.
CategoricalTable temperature_scale_exact(const CategoricalTable& table, double temperature);

/// Chain-rule joint of per-position conditionals rescaled by 1/T.
/// T = 1 equals enumerate_joint exactly; T = 0 is the greedy argmax path.
CategoricalTable myopic_scale_joint(const ar::Model& model, double temperature,
                                    std::optional<double> t_cond = {},
                                    std::size_t cap = kDefaultEnumerationCap);

struct KlResult {
  double value = 0.0;
  /// First sequence (lexicographic) where p > 0 but q = 0, if any.
  std::optional<Sequence> support_violation;
  std::string diagnostic() const;
};

/// KL(p || q) = Σ p(x) (log p(x) - log q(x)); +inf on a support violation.
KlResult kl_divergence(const CategoricalTable& p, const CategoricalTable& q);

double entropy(const CategoricalTable& table);

/// Most probable sequence; the lexicographically smallest on exact ties.
Sequence argmax_joint(const CategoricalTable& table);

double total_variation(const CategoricalTable& p, const CategoricalTable& q);

/// Empirical distribution of full-length samples as a table (zeros → -inf).
CategoricalTable empirical_table(int vocab_size, int length, std::span<const Sequence> samples);

/// Inverse-CDF draws from a table.
std::vector<Sequence> sample_table(const CategoricalTable& table, std::size_t n, numerics::Rng& rng);

/// TABULAR model whose conditionals reproduce the table exactly (prefixes
/// with no mass get uniform conditionals).
ar::Model tabular_model_from_table(const CategoricalTable& table);

std::string to_json(const CategoricalTable& table);
CategoricalTable table_from_json(std::string_view json);

}  // namespace lhts::oracle
