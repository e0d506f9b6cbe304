#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhts/ar_model.hpp"
#include "lhts/error.hpp"
#include "lhts/numerics/rng.hpp"
#include "lhts/numerics/tape.hpp"
#include "lhts/oracle.hpp"

namespace lhts::train {

using ar::Sequence;
using ar::Token;

inline constexpr double kNoClip = std::numeric_limits<double>::infinity();

/// (1 - T) / T, the factor applied to log-likelihoods in every weight exponent.
double temperature_factor(double temperature);

/// A training sequence and its share of the batch average. Masses in a batch
/// are normalized to sum to one before use.
struct Example {
  Sequence tokens;
  double mass = 1.0;
};

struct WeightStats {
  double mean = 0.0;
  double variance = 0.0;
  double max = 0.0;
  double clip_rate = 0.0;
};

/// Importance weights exp(min(exponent, clip)). Joint-form batches have one
/// column per example; autoregressive batches one column per index.
struct WeightBatch {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> exponents;
  double clip = kNoClip;
  double temperature = 1.0;

  /// Unweighted statistics over every entry.
  WeightStats stats() const;
};

/// Running means of the data statistics that define the baselines.
///
/// Sums are kept in raw log-likelihood units so one instance can serve every
/// temperature of a multi-temperature run; the (1 - T) / T factor is applied
/// when a baseline is read.
class StreamingBaseline {
 public:
  void observe_joint(double log_p, double mass = 1.0);
  void observe_suffix(std::span<const double> suffix, double mass = 1.0);

  /// Mean log p(x) seen so far; 0 before the first observation.
  double joint_mean() const { return joint_count_ > 0 ? joint_sum_ / joint_count_ : 0.0; }
  /// Per-index mean of the (horizon-limited) suffix log-likelihoods; 0 at
  /// indices not yet observed.
  std::vector<double> suffix_mean(std::size_t length) const;

  /// b = (1 - T)/T * mean log p(x)
  double joint_baseline(double temperature) const { return temperature_factor(temperature) * joint_mean(); }

  double joint_count() const { return joint_count_; }
  double suffix_count(std::size_t index) const {
    return index < suffix_count_.size() ? suffix_count_[index] : 0.0;
  }

 private:
  double joint_count_ = 0.0;
  double joint_sum_ = 0.0;
  std::vector<double> suffix_count_;
  std::vector<double> suffix_sum_;
};

/// Per-temperature running mean of the detached loss used to rescale updates.
class LossNormalizer {
 public:
  explicit LossNormalizer(std::size_t temperatures = 1) : sum_(temperatures, 0.0), count_(temperatures, 0) {}

  /// Adds `detached_loss` to temperature j and returns the updated mean.
  double update(std::size_t j, double detached_loss);
  double mean(std::size_t j) const { return count_.at(j) ? sum_.at(j) / static_cast<double>(count_.at(j)) : 0.0; }
  std::size_t count(std::size_t j) const { return count_.at(j); }

 private:
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
};

/// w_i = exp(min((1 - T)/T * log p(x_i) - baseline, clip)). `baseline` is in
/// exponent units. Throws NumericalError naming the first non-finite log p.
WeightBatch joint_weights(std::span<const double> log_p, double temperature, double baseline,
                          double clip = kNoClip);

/// v_i = log p(x_{>=i} | x_{<i}), the reverse cumulative sum of the base
/// model's per-token conditionals.
std::vector<double> suffix_log_liks(const ar::Model& base, std::span<const Token> x);

/// out_i = v_i - v_{i+h} (v past the end counts as 0): the log-likelihood of
/// at most h tokens starting at i. Requires h >= 1.
std::vector<double> apply_horizon(std::span<const double> suffix, std::size_t horizon);

/// w(i) = exp(min((1 - T)/T * (v_i - mean_i), clip)) per example and index,
/// with `suffix_mean` in raw log-likelihood units.
WeightBatch ar_weights(std::span<const std::vector<double>> horizon_suffixes, double temperature,
                       std::span<const double> suffix_mean, double clip = kNoClip);

enum class DataMode {
  dataset,      // minibatches drawn from the training set
  exact,        // every sequence, weighted by p(x) (enumerable spaces only)
  sample_base,  // minibatches sampled from p
};

enum class Objective {
  autoregressive,  // index-weighted loss with suffix baselines
  joint,           // one weight per sequence
};

struct LhtsConfig {
  std::vector<double> temperatures{1.0};
  /// Suffix horizon h; 0 means the full sequence.
  std::size_t horizon = 0;
  double clip = 3.0;
  double kl_weight = 0.0;
  double learning_rate = 0.1;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  std::size_t steps = 1000;
  std::size_t batch_size = 32;
  DataMode data_mode = DataMode::dataset;
  Objective objective = Objective::autoregressive;
  bool normalize_loss = true;
  /// Exact KL(p_T || q) is computed every `eval_every` steps (and on the last
  /// step) when the space is enumerable; 0 disables.
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;
};

/// Throws ConfigError with the offending field name.
void validate(const LhtsConfig& config);

std::string_view to_string(DataMode mode);
DataMode data_mode_from_string(std::string_view name);
std::string_view to_string(Objective objective);
Objective objective_from_string(std::string_view name);

struct LossGradient {
  double loss = 0.0;   // weighted log loss L
  double kl = 0.0;     // KL anchor K
  double total = 0.0;  // L + beta K
  std::vector<double> gradient;
};

/// Detached values of the two objective terms.
struct ObjectiveParts {
  double loss = 0.0;
  double kl = 0.0;
};

/// -Σ_x m_x Σ_i w_i(x) log q(x_i | x_{<i}) + beta Σ_x m_x Σ_i KL(p(.|x_{<i}) || q(.|x_{<i})).
/// `weights` null means all ones (plain maximum likelihood). Works with
/// double or Var parameters. When `parts` is given the KL term is evaluated
/// (detached) even if beta = 0.
template <class S>
S ar_objective(const ar::Model& base, const ar::Model& model, std::span<const S> params,
               std::span<const Example> batch, const WeightBatch* weights, double kl_weight,
               std::optional<double> t_cond, ObjectiveParts* parts = nullptr);

/// -Σ_x m_x w(x) log q(x), one weight per sequence.
template <class S>
S joint_objective(const ar::Model& model, std::span<const S> params, std::span<const Example> batch,
                  const WeightBatch& weights, std::optional<double> t_cond);

LossGradient ar_loss_gradient(const ar::Model& base, const ar::Model& model,
                              std::span<const Example> batch, const WeightBatch* weights,
                              double kl_weight, std::optional<double> t_cond, numerics::Tape& tape);
LossGradient joint_loss_gradient(const ar::Model& model, std::span<const Example> batch,
                                 const WeightBatch& weights, std::optional<double> t_cond,
                                 numerics::Tape& tape);
LossGradient mle_loss_gradient(const ar::Model& model, std::span<const Example> batch, numerics::Tape& tape);

struct StepMetrics {
  std::size_t step = 0;
  double temperature = 1.0;
  double loss = 0.0;
  double kl_to_base = 0.0;
  double total = 0.0;
  double normalizer = 1.0;
  double grad_norm = 0.0;
  WeightStats weights;
  std::optional<double> kl_to_target;
};

/// State carried between finetuning steps. The base model is never modified.
class TrainState {
 public:
  /// q starts as an exact copy of `base`.
  TrainState(ar::Model base, LhtsConfig config);
  TrainState(ar::Model base, ar::Model student, LhtsConfig config);

  const ar::Model& base() const { return base_; }
  const ar::Model& student() const { return student_; }
  ar::Model& student() { return student_; }
  const LhtsConfig& config() const { return config_; }
  const StreamingBaseline& baseline() const { return baseline_; }
  const LossNormalizer& normalizer() const { return normalizer_; }
  std::size_t step() const { return step_; }

  /// Conditioning value passed to q for temperature T (empty when q has no
  /// temperature embedding).
  std::optional<double> condition(double temperature) const;

  /// Importance weights for `batch` at temperature index j from the
  /// statistics of previous batches only.
  WeightBatch weights_for(std::span<const Example> batch, std::size_t j) const;

 private:
  friend StepMetrics lhts_step(TrainState& state, std::span<const Example> batch, std::size_t j);

  ar::Model base_;
  ar::Model student_;
  LhtsConfig config_;
  StreamingBaseline baseline_;
  LossNormalizer normalizer_;
  std::size_t step_ = 0;
  numerics::Tape tape_;
};

/// One update at temperature index j: weights from previous statistics, loss
/// L + beta K, normalized gradient step on q, then the statistics absorb
/// this batch. Throws NumericalError on a non-finite loss.
StepMetrics lhts_step(TrainState& state, std::span<const Example> batch, std::size_t j);

struct TrainResult {
  ar::Model model;
  std::vector<StepMetrics> metrics;
  /// Final exact KL(p_T || q_T) per temperature when enumerable.
  std::vector<std::optional<double>> final_kl;
};

using MetricsCallback = std::function<void(const StepMetrics&)>;

/// Runs config.steps LHTS updates starting from q = `student`. Deterministic
/// given config.seed.
TrainResult train(const ar::Model& base, const ar::Model& student, std::span<const Sequence> dataset,
                  const LhtsConfig& config, const MetricsCallback& on_step = {});

struct MleConfig {
  std::size_t steps = 200;
  double learning_rate = 1.0;
  std::size_t batch_size = 0;  // 0: full batch
  double grad_clip = 0.0;
  std::uint64_t seed = 0;
};

/// Plain maximum-likelihood training of a base model by gradient descent.
ar::Model train_mle(ar::Model model, std::span<const Sequence> dataset, const MleConfig& config,
                    const std::function<void(std::size_t, double)>& on_step = {});

/// Exact expected AR loss over p (no sampling): every sequence weighted by
/// p(x), baselines at their exact expectations.
double exact_ar_loss(const ar::Model& base, const ar::Model& model, double temperature,
                     std::size_t horizon = 0, double clip = kNoClip, std::optional<double> t_cond = {});

struct JointLoss {
  double loss = 0.0;
  /// b = (1 - T)/T * E_p[log p(x)]
  double baseline = 0.0;
};

/// Exact joint-form loss -E_p[w_T(x) log q(x)] over two tables.
JointLoss exact_joint_loss(const oracle::CategoricalTable& base, const oracle::CategoricalTable& model,
                           double temperature);

/// Empirical variance, per index, of the weight exponents (1-T)/T * (v_i - mean_i)
/// over `samples` with horizon h (0 = full).
std::vector<double> exponent_variance_by_index(const ar::Model& base, std::span<const Sequence> samples,
                                               double temperature, std::size_t horizon = 0);

/// Every sequence of the space with mass p(x) (zero-mass sequences skipped).
std::vector<Example> enumerate_examples(const ar::Model& base);

}  // namespace lhts::train
