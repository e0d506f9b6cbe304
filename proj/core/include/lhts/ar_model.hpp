#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lhts/numerics/log_space.hpp"
#include "lhts/numerics/rng.hpp"
#include "lhts/numerics/tape.hpp"

namespace lhts::ar {

using Token = std::int32_t;
using Sequence = std::vector<Token>;

enum class Parameterization { tabular, linear };

std::string_view to_string(Parameterization p);
Parameterization parameterization_from_string(std::string_view name);

/// Autoregressive model over sequences of at most `max_length` tokens from a
/// vocabulary of `vocab_size`.
///
/// TABULAR keeps one logit row per prefix (all V^i prefixes for every
/// position i < L), so any joint over V^L sequences is representable.
/// LINEAR computes logits as W * features + bias where the features are the
/// one-hot encodings of the last `window` tokens (a pad symbol stands in
/// before the start) and of the position.
///
/// An optional temperature embedding appends r(T) = slope * T + intercept
/// (width E) to the features; its output weights live with the embedding.
/// The embedding starts at r = 0, so enabling it leaves every conditional
/// unchanged.
class Model {
 public:
  static Model tabular(int vocab_size, int max_length);
  static Model linear(int vocab_size, int max_length, int window = 3);

  /// Appends an embedding of width `width`. slope and intercept start at
  /// zero; the output weights start at N(0, init_scale^2) drawn from `seed`.
  void enable_temperature_embedding(int width = 4, std::uint64_t seed = 0, double init_scale = 0.05);

  Parameterization parameterization() const { return parameterization_; }
  int vocab_size() const { return vocab_size_; }
  int max_length() const { return max_length_; }
  int window() const { return window_; }
  bool temperature_conditioned() const { return embedding_width_ > 0; }
  int embedding_width() const { return embedding_width_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t num_parameters() const { return params_.size(); }
  /// Parameters excluding the temperature embedding.
  std::size_t num_core_parameters() const { return core_size_; }

  /// Conditional logits for the next token after `prefix`, evaluated with an
  /// external parameter vector (double for evaluation, Var for training).
  template <class S>
  void logits(std::span<const S> params, std::span<const Token> prefix,
              std::optional<double> t_cond, std::span<S> out) const;

  template <class S>
  std::vector<S> conditional_log_probs(std::span<const S> params, std::span<const Token> prefix,
                                       std::optional<double> t_cond) const {
    std::vector<S> raw(static_cast<std::size_t>(vocab_size_));
    logits<S>(params, prefix, t_cond, raw);
    return numerics::log_softmax<S>(std::span<const S>(raw));
  }

  std::vector<double> conditional_log_probs(std::span<const Token> prefix,
                                            std::optional<double> t_cond = {}) const {
    return conditional_log_probs<double>(params_, prefix, t_cond);
  }

  /// u[i] = log p(x_i | x_{<i}) for every position of x.
  std::vector<double> token_log_probs(std::span<const Token> x, std::optional<double> t_cond = {}) const;

  /// Σ_i log p(x_i | x_{<i}).
  double sequence_log_prob(std::span<const Token> x, std::optional<double> t_cond = {}) const;

  /// Row of the tabular logit table that holds the conditional after `prefix`.
  std::size_t prefix_row(std::span<const Token> prefix) const;
  /// Overwrites the tabular conditional after `prefix` with `logits`.
  void set_conditional_logits(std::span<const Token> prefix, std::span<const double> logits);

  void validate_sequence(std::span<const Token> x) const;

  bool operator==(const Model& other) const = default;

 private:
  Model() = default;

  void check_prefix(std::span<const Token> prefix, const std::optional<double>& t_cond) const;
  std::size_t linear_feature_count() const {
    return static_cast<std::size_t>(window_ * (vocab_size_ + 1) + max_length_);
  }

  Parameterization parameterization_ = Parameterization::tabular;
  int vocab_size_ = 0;
  int max_length_ = 0;
  int window_ = 0;
  int embedding_width_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t core_size_ = 0;
  std::vector<double> params_;

  friend Model model_from_json(std::string_view json);
};

/// Maximum number of parameters a TABULAR model may allocate.
inline constexpr std::size_t kMaxTabularParameters = 10'000'000;

template <class S>
void Model::logits(std::span<const S> params, std::span<const Token> prefix,
                   std::optional<double> t_cond, std::span<S> out) const {
  check_prefix(prefix, t_cond);
  const auto V = static_cast<std::size_t>(vocab_size_);
  if (parameterization_ == Parameterization::tabular) {
    const std::size_t base = prefix_row(prefix) * V;
    for (std::size_t k = 0; k < V; ++k) out[k] = params[base + k];
  } else {
    const std::size_t F = linear_feature_count();
    const std::size_t i = prefix.size();
    std::vector<std::size_t> active;
    active.reserve(static_cast<std::size_t>(window_) + 1);
    for (int s = 0; s < window_; ++s) {
      const auto pos = static_cast<std::ptrdiff_t>(i) - 1 - s;
      const std::size_t tok = pos >= 0 ? static_cast<std::size_t>(prefix[static_cast<std::size_t>(pos)]) : V;
      active.push_back(static_cast<std::size_t>(s) * (V + 1) + tok);
    }
    active.push_back(static_cast<std::size_t>(window_) * (V + 1) + i);
    std::vector<S> parts;
    parts.reserve(active.size() + 2);
    for (std::size_t k = 0; k < V; ++k) {
      parts.clear();
      parts.push_back(params[V * F + k]);
      for (std::size_t f : active) parts.push_back(params[k * F + f]);
      out[k] = numerics::sum(std::span<const S>(parts));
    }
  }
  if (embedding_width_ > 0) {
    const auto E = static_cast<std::size_t>(embedding_width_);
    const std::size_t w_r = core_size_;
    const std::size_t slope = w_r + V * E;
    const std::size_t intercept = slope + E;
    const double coeffs[2] = {*t_cond, 1.0};
    std::vector<S> r(E);
    for (std::size_t e = 0; e < E; ++e) {
      const S pair[2] = {params[slope + e], params[intercept + e]};
      r[e] = numerics::weighted_sum(std::span<const S>(pair, 2), std::span<const double>(coeffs, 2));
    }
    for (std::size_t k = 0; k < V; ++k) {
      out[k] = out[k] + numerics::dot(params.subspan(w_r + k * E, E), std::span<const S>(r));
    }
  }
}

/// Generated sequences plus their log-probability under the sampling
/// distribution actually used (myopic rescaling included; 0 for argmax).
struct SampleBatch {
  std::vector<Sequence> sequences;
  std::vector<double> log_probs;
  double myopic_temperature = 1.0;
  std::optional<double> long_horizon_temperature;
};

/// Ancestral left-to-right sampling of full-length sequences. myopic_T = 0
/// selects the per-position argmax (smallest token on ties).
SampleBatch sample(const Model& model, std::size_t n, double myopic_temperature,
                   std::optional<double> t_cond, numerics::Rng& rng);

/// Σ_i KL(p(.|x_{<i}) || q(.|x_{<i})) over the positions of x. The base model
/// p is never temperature conditioned.
double kl_to_base_per_position(const Model& base, const Model& model, std::span<const Token> x,
                               std::optional<double> t_cond = {});

/// Per-position conditional after myopic rescaling (argmax one-hot at T = 0).
std::vector<double> myopic_conditional(std::span<const double> log_probs, double myopic_temperature);

std::string to_json(const Model& model);
Model model_from_json(std::string_view json);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace lhts::ar
