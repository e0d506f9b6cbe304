#include "lhts/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lhts/numerics/log_space.hpp"
#include "lhts/numerics/optimizer.hpp"

namespace lhts::train {

using numerics::Tape;
using numerics::Var;

double temperature_factor(double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  return (1.0 - temperature) / temperature;
}

WeightStats WeightBatch::stats() const {
  WeightStats s;
  std::size_t n = 0;
  std::size_t clipped = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < weights.size(); ++r) {
    for (std::size_t c = 0; c < weights[r].size(); ++c) {
      const double w = weights[r][c];
      sum += w;
      sum_sq += w * w;
      s.max = std::max(s.max, w);
      if (exponents[r][c] > clip) ++clipped;
      ++n;
    }
  }
  if (n == 0) return s;
  s.mean = sum / static_cast<double>(n);
  s.variance = std::max(0.0, sum_sq / static_cast<double>(n) - s.mean * s.mean);
  s.clip_rate = static_cast<double>(clipped) / static_cast<double>(n);
  return s;
}

void StreamingBaseline::observe_joint(double log_p, double mass) {
  joint_count_ += mass;
  joint_sum_ += mass * log_p;
}

void StreamingBaseline::observe_suffix(std::span<const double> suffix, double mass) {
  if (suffix.size() > suffix_sum_.size()) {
    suffix_sum_.resize(suffix.size(), 0.0);
    suffix_count_.resize(suffix.size(), 0.0);
  }
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    suffix_sum_[i] += mass * suffix[i];
    suffix_count_[i] += mass;
  }
}

std::vector<double> StreamingBaseline::suffix_mean(std::size_t length) const {
  std::vector<double> mean(length, 0.0);
  for (std::size_t i = 0; i < std::min(length, suffix_sum_.size()); ++i) {
    if (suffix_count_[i] > 0) mean[i] = suffix_sum_[i] / suffix_count_[i];
  }
  return mean;
}

double LossNormalizer::update(std::size_t j, double detached_loss) {
  sum_.at(j) += detached_loss;
  ++count_.at(j);
  return mean(j);
}

WeightBatch joint_weights(std::span<const double> log_p, double temperature, double baseline,
                          double clip) {
  const double a = temperature_factor(temperature);
  if (!std::isfinite(baseline)) throw NumericalError("joint_weights: baseline is not finite");
  WeightBatch batch;
  batch.clip = clip;
  batch.temperature = temperature;
  batch.weights.reserve(log_p.size());
  batch.exponents.reserve(log_p.size());
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    if (!std::isfinite(log_p[i])) {
      throw NumericalError("joint_weights: example " + std::to_string(i) + " has non-finite log p");
    }
    const double e = a * log_p[i] - baseline;
    batch.exponents.push_back({e});
    batch.weights.push_back({std::exp(std::min(e, clip))});
  }
  return batch;
}

std::vector<double> suffix_log_liks(const ar::Model& base, std::span<const Token> x) {
  if (x.empty()) throw std::invalid_argument("suffix_log_liks: empty sequence");
  return numerics::rev_cum_sum(base.token_log_probs(x));
}

std::vector<double> apply_horizon(std::span<const double> suffix, std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("apply_horizon: horizon must be >= 1");
  std::vector<double> out(suffix.begin(), suffix.end());
  for (std::size_t i = 0; i + horizon < suffix.size(); ++i) out[i] -= suffix[i + horizon];
  return out;
}

WeightBatch ar_weights(std::span<const std::vector<double>> horizon_suffixes, double temperature,
                       std::span<const double> suffix_mean, double clip) {
  const double a = temperature_factor(temperature);
  WeightBatch batch;
  batch.clip = clip;
  batch.temperature = temperature;
  batch.weights.reserve(horizon_suffixes.size());
  batch.exponents.reserve(horizon_suffixes.size());
  for (std::size_t r = 0; r < horizon_suffixes.size(); ++r) {
    const auto& v = horizon_suffixes[r];
    if (v.size() > suffix_mean.size()) throw std::invalid_argument("ar_weights: baseline shorter than sequence");
    std::vector<double> e(v.size());
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || !std::isfinite(suffix_mean[i])) {
        throw NumericalError("ar_weights: example " + std::to_string(r) + " index " + std::to_string(i) +
                             " has a non-finite suffix log-likelihood or baseline");
      }
      e[i] = a * (v[i] - suffix_mean[i]);
      w[i] = std::exp(std::min(e[i], clip));
    }
    batch.exponents.push_back(std::move(e));
    batch.weights.push_back(std::move(w));
  }
  return batch;
}

void validate(const LhtsConfig& c) {
  if (c.temperatures.empty()) throw ConfigError("lhts.temperatures: must list at least one temperature");
  for (std::size_t j = 0; j < c.temperatures.size(); ++j) {
    if (!(c.temperatures[j] > 0.0) || !std::isfinite(c.temperatures[j])) {
      throw ConfigError("lhts.temperatures[" + std::to_string(j) + "]: must be a finite value > 0");
    }
  }
  if (!(c.clip > 0.0) && !std::isinf(c.clip)) throw ConfigError("lhts.clip: must be > 0 (or null for no clipping)");
  if (!(c.kl_weight >= 0.0)) throw ConfigError("lhts.kl_weight: must be >= 0");
  if (!(c.learning_rate > 0.0)) throw ConfigError("lhts.learning_rate: must be > 0");
  if (!(c.grad_clip >= 0.0)) throw ConfigError("lhts.grad_clip: must be >= 0");
  if (c.batch_size < 1 && c.data_mode != DataMode::exact) throw ConfigError("lhts.batch_size: must be >= 1");
  if (c.objective == Objective::joint && c.kl_weight > 0.0) {
    throw ConfigError("lhts.kl_weight: the KL anchor requires the autoregressive objective");
  }
}

std::string_view to_string(DataMode mode) {
  switch (mode) {
    case DataMode::dataset: return "dataset";
    case DataMode::exact: return "exact";
    case DataMode::sample_base: return "sample_base";
  }
  return "dataset";
}

DataMode data_mode_from_string(std::string_view name) {
  if (name == "dataset") return DataMode::dataset;
  if (name == "exact") return DataMode::exact;
  if (name == "sample_base") return DataMode::sample_base;
  throw ConfigError("lhts.data_mode: expected one of dataset, exact, sample_base");
}

std::string_view to_string(Objective objective) {
  return objective == Objective::joint ? "joint" : "autoregressive";
}

Objective objective_from_string(std::string_view name) {
  if (name == "autoregressive") return Objective::autoregressive;
  if (name == "joint") return Objective::joint;
  throw ConfigError("lhts.objective: expected autoregressive or joint");
}

namespace {

double total_mass(std::span<const Example> batch) {
  double m = 0.0;
  for (const auto& ex : batch) m += ex.mass;
  if (!(m > 0.0)) throw std::invalid_argument("batch has no mass");
  return m;
}

// log q(x_i | prefix) as logit[x_i] - lse(logits); also returns the detached
// normalized conditional in `values` when requested.
template <class S>
S token_log_prob(const ar::Model& model, std::span<const S> params, std::span<const Token> prefix,
                 Token token, std::optional<double> t_cond, std::vector<S>& logits,
                 std::vector<double>* values) {
  model.logits<S>(params, prefix, t_cond, logits);
  const S lse = numerics::log_sum_exp(std::span<const S>(logits));
  if (values) {
    values->resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) (*values)[k] = numerics::value_of(logits[k]) - numerics::value_of(lse);
  }
  return logits[static_cast<std::size_t>(token)] - lse;
}

}  // namespace

template <class S>
S ar_objective(const ar::Model& base, const ar::Model& model, std::span<const S> params,
               std::span<const Example> batch, const WeightBatch* weights, double kl_weight,
               std::optional<double> t_cond, ObjectiveParts* parts) {
  const double mass = total_mass(batch);
  const auto V = static_cast<std::size_t>(model.vocab_size());
  std::vector<S> terms;
  std::vector<double> coeffs;
  std::vector<S> kl_terms;
  std::vector<double> kl_coeffs;
  std::vector<S> logits(V);
  std::vector<double> q_values;
  double kl_detached = 0.0;
  const bool want_kl = kl_weight > 0.0 || parts != nullptr;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& x = batch[b].tokens;
    model.validate_sequence(x);
    if (weights && weights->weights.at(b).size() != x.size()) {
      throw std::invalid_argument("ar_objective: weight row does not match sequence length");
    }
    const double m = batch[b].mass / mass;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::span<const Token> prefix(x.data(), i);
      const S lq = token_log_prob<S>(model, params, prefix, x[i], t_cond, logits, want_kl ? &q_values : nullptr);
      const double w = weights ? weights->weights[b][i] : 1.0;
      terms.push_back(lq);
      coeffs.push_back(-m * w);
      if (want_kl) {
        const auto lp = base.conditional_log_probs(prefix);
        kl_detached += m * numerics::categorical_kl<double>(lp, q_values);
        if (kl_weight > 0.0) {
          const auto lq_all = numerics::log_softmax<S>(std::span<const S>(logits));
          kl_terms.push_back(numerics::categorical_kl<S>(lp, std::span<const S>(lq_all)));
          kl_coeffs.push_back(m);
        }
      }
    }
  }
  const S loss = numerics::weighted_sum(std::span<const S>(terms), std::span<const double>(coeffs));
  if (parts) {
    parts->loss = numerics::value_of(loss);
    parts->kl = kl_detached;
  }
  if (kl_weight <= 0.0) return loss;
  const S kl = numerics::weighted_sum(std::span<const S>(kl_terms), std::span<const double>(kl_coeffs));
  const S pair[2] = {loss, kl};
  const double pair_coeffs[2] = {1.0, kl_weight};
  return numerics::weighted_sum(std::span<const S>(pair, 2), std::span<const double>(pair_coeffs, 2));
}

template <class S>
S joint_objective(const ar::Model& model, std::span<const S> params, std::span<const Example> batch,
                  const WeightBatch& weights, std::optional<double> t_cond) {
  const double mass = total_mass(batch);
  std::vector<S> terms;
  std::vector<double> coeffs;
  std::vector<S> logits(static_cast<std::size_t>(model.vocab_size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& x = batch[b].tokens;
    model.validate_sequence(x);
    const double c = -(batch[b].mass / mass) * weights.weights.at(b).at(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      terms.push_back(token_log_prob<S>(model, params, std::span<const Token>(x.data(), i), x[i], t_cond, logits, nullptr));
      coeffs.push_back(c);
    }
  }
  return numerics::weighted_sum(std::span<const S>(terms), std::span<const double>(coeffs));
}

template double ar_objective<double>(const ar::Model&, const ar::Model&, std::span<const double>,
                                     std::span<const Example>, const WeightBatch*, double,
                                     std::optional<double>, ObjectiveParts*);
template Var ar_objective<Var>(const ar::Model&, const ar::Model&, std::span<const Var>,
                               std::span<const Example>, const WeightBatch*, double,
                               std::optional<double>, ObjectiveParts*);
template double joint_objective<double>(const ar::Model&, std::span<const double>, std::span<const Example>,
                                        const WeightBatch&, std::optional<double>);
template Var joint_objective<Var>(const ar::Model&, std::span<const Var>, std::span<const Example>,
                                  const WeightBatch&, std::optional<double>);

namespace {

std::vector<Var> record_parameters(const ar::Model& model, Tape& tape) {
  tape.clear();
  std::vector<Var> params;
  params.reserve(model.num_parameters());
  for (double p : model.parameters()) params.push_back(tape.parameter(p));
  return params;
}

std::vector<double> gradient_of(const Var& total, const Tape& tape) {
  if (!total.attached()) return std::vector<double>(tape.num_parameters(), 0.0);
  return tape.gradient(total);
}

}  // namespace

LossGradient ar_loss_gradient(const ar::Model& base, const ar::Model& model,
                              std::span<const Example> batch, const WeightBatch* weights,
                              double kl_weight, std::optional<double> t_cond, Tape& tape) {
  const auto params = record_parameters(model, tape);
  ObjectiveParts parts;
  const Var total = ar_objective<Var>(base, model, params, batch, weights, kl_weight, t_cond, &parts);
  return {parts.loss, parts.kl, total.value(), gradient_of(total, tape)};
}

LossGradient joint_loss_gradient(const ar::Model& model, std::span<const Example> batch,
                                 const WeightBatch& weights, std::optional<double> t_cond, Tape& tape) {
  const auto params = record_parameters(model, tape);
  const Var total = joint_objective<Var>(model, params, batch, weights, t_cond);
  return {total.value(), 0.0, total.value(), gradient_of(total, tape)};
}

LossGradient mle_loss_gradient(const ar::Model& model, std::span<const Example> batch, Tape& tape) {
  const auto params = record_parameters(model, tape);
  const std::optional<double> t_cond = model.temperature_conditioned() ? std::optional<double>(1.0) : std::nullopt;
  const Var total = ar_objective<Var>(model, model, params, batch, nullptr, 0.0, t_cond);
  return {total.value(), 0.0, total.value(), gradient_of(total, tape)};
}

TrainState::TrainState(ar::Model base, LhtsConfig config)
    : TrainState(base, base, std::move(config)) {}

TrainState::TrainState(ar::Model base, ar::Model student, LhtsConfig config)
    : base_(std::move(base)),
      student_(std::move(student)),
      config_(std::move(config)),
      normalizer_(config_.temperatures.size()) {
  validate(config_);
  if (base_.temperature_conditioned()) throw std::invalid_argument("base model must not be temperature conditioned");
  if (base_.vocab_size() != student_.vocab_size() || base_.max_length() != student_.max_length()) {
    throw std::invalid_argument("base and student models disagree on vocab size or length");
  }
}

std::optional<double> TrainState::condition(double temperature) const {
  return student_.temperature_conditioned() ? std::optional<double>(temperature) : std::nullopt;
}

namespace {

struct PreparedBatch {
  WeightBatch weights;
  std::vector<std::vector<double>> suffixes;  // horizon-limited, AR objective
  std::vector<double> log_p;                  // joint objective
};

PreparedBatch prepare(const ar::Model& base, const LhtsConfig& config, const StreamingBaseline& baseline,
                      std::span<const Example> batch, double temperature) {
  PreparedBatch prepared;
  if (config.objective == Objective::joint) {
    for (const auto& ex : batch) prepared.log_p.push_back(base.sequence_log_prob(ex.tokens));
    prepared.weights = joint_weights(prepared.log_p, temperature, baseline.joint_baseline(temperature), config.clip);
    return prepared;
  }
  std::size_t longest = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& x = batch[b].tokens;
    const auto v = suffix_log_liks(base, x);
    for (double s : v) {
      if (!std::isfinite(s)) {
        throw NumericalError("example " + std::to_string(b) + " has a non-finite log-likelihood under the base model");
      }
    }
    const std::size_t h = config.horizon == 0 ? std::max<std::size_t>(v.size(), 1) : config.horizon;
    prepared.suffixes.push_back(apply_horizon(v, h));
    longest = std::max(longest, v.size());
  }
  prepared.weights = ar_weights(prepared.suffixes, temperature, baseline.suffix_mean(longest), config.clip);
  return prepared;
}

std::string describe(const StepMetrics& m) {
  std::ostringstream os;
  os << "{step: " << m.step << ", T: " << m.temperature << ", loss: " << m.loss << ", kl_to_base: " << m.kl_to_base
     << ", total: " << m.total << ", weight_mean: " << m.weights.mean << ", weight_var: " << m.weights.variance
     << ", weight_max: " << m.weights.max << ", clip_rate: " << m.weights.clip_rate << "}";
  return os.str();
}

}  // namespace

WeightBatch TrainState::weights_for(std::span<const Example> batch, std::size_t j) const {
  return prepare(base_, config_, baseline_, batch, config_.temperatures.at(j)).weights;
}

StepMetrics lhts_step(TrainState& state, std::span<const Example> batch, std::size_t j) {
  const auto& config = state.config_;
  const double temperature = config.temperatures.at(j);
  const auto t_cond = state.condition(temperature);

  PreparedBatch prepared = prepare(state.base_, config, state.baseline_, batch, temperature);

  LossGradient lg = config.objective == Objective::joint
                        ? joint_loss_gradient(state.student_, batch, prepared.weights, t_cond, state.tape_)
                        : ar_loss_gradient(state.base_, state.student_, batch, &prepared.weights,
                                           config.kl_weight, t_cond, state.tape_);

  StepMetrics metrics;
  metrics.step = state.step_;
  metrics.temperature = temperature;
  metrics.loss = lg.loss;
  metrics.kl_to_base = lg.kl;
  metrics.total = lg.total;
  metrics.weights = prepared.weights.stats();
  if (!std::isfinite(lg.total)) throw NumericalError("non-finite loss: " + describe(metrics));

  const double m = state.normalizer_.update(j, lg.total);
  metrics.normalizer = m;
  const double scale = config.normalize_loss && m > 0.0 ? 1.0 / m : 1.0;
  for (double& g : lg.gradient) g *= scale;
  metrics.grad_norm = numerics::clip_gradient_norm(lg.gradient, config.grad_clip);
  if (!std::isfinite(metrics.grad_norm)) throw NumericalError("non-finite gradient: " + describe(metrics));
  numerics::gradient_descent_step(state.student_.parameters(), lg.gradient, config.learning_rate);

  const double mass = total_mass(batch);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (config.objective == Objective::joint) {
      state.baseline_.observe_joint(prepared.log_p[b], batch[b].mass / mass);
    } else {
      state.baseline_.observe_suffix(prepared.suffixes[b], batch[b].mass / mass);
    }
  }
  ++state.step_;
  return metrics;
}

std::vector<Example> enumerate_examples(const ar::Model& base) {
  const auto table = oracle::enumerate_joint(base, base.max_length());
  const auto space = table.space();
  std::vector<Example> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double p = table.prob(i);
    if (p > 0.0) out.push_back({space.sequence(i), p});
  }
  return out;
}

namespace {

bool is_enumerable(const ar::Model& model) {
  try {
    oracle::SequenceSpace space(model.vocab_size(), model.max_length());
    return true;
  } catch (const std::length_error&) {
    return false;
  }
}

std::vector<Example> draw_batch(const LhtsConfig& config, std::span<const Sequence> dataset,
                                const ar::Model& base, std::size_t step) {
  numerics::Rng rng = numerics::Rng::derive(config.seed, "lhts-batch", step);
  std::vector<Example> batch;
  batch.reserve(config.batch_size);
  const double mass = 1.0 / static_cast<double>(config.batch_size);
  if (config.data_mode == DataMode::sample_base) {
    auto samples = ar::sample(base, config.batch_size, 1.0, std::nullopt, rng);
    for (auto& x : samples.sequences) batch.push_back({std::move(x), mass});
  } else {
    for (std::size_t b = 0; b < config.batch_size; ++b) batch.push_back({dataset[rng.index(dataset.size())], mass});
  }
  return batch;
}

}  // namespace

TrainResult train(const ar::Model& base, const ar::Model& student, std::span<const Sequence> dataset,
                  const LhtsConfig& config, const MetricsCallback& on_step) {
  TrainState state(base, student, config);
  const bool enumerable = is_enumerable(base);
  if (config.data_mode == DataMode::exact && !enumerable) {
    throw ConfigError("lhts.data_mode: exact mode needs an enumerable sequence space");
  }
  if (config.data_mode == DataMode::dataset && dataset.empty()) {
    throw ConfigError("data: dataset mode needs at least one training sequence");
  }

  std::vector<Example> exact_batch;
  if (config.data_mode == DataMode::exact) exact_batch = enumerate_examples(base);

  std::vector<std::optional<oracle::CategoricalTable>> targets(config.temperatures.size());
  std::optional<oracle::CategoricalTable> base_table;
  auto kl_to_target = [&](std::size_t j) {
    if (!base_table) base_table = oracle::enumerate_joint(base, base.max_length());
    if (!targets[j]) targets[j] = oracle::temperature_scale_exact(*base_table, config.temperatures[j]);
    const auto q = oracle::enumerate_joint(state.student(), base.max_length(), state.condition(config.temperatures[j]));
    return oracle::kl_divergence(*targets[j], q).value;
  };

  numerics::Rng temperature_rng = numerics::Rng::derive(config.seed, "lhts-temperature");
  TrainResult result{student, {}, {}};
  result.metrics.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::size_t j = config.temperatures.size() == 1 ? 0 : temperature_rng.index(config.temperatures.size());
    StepMetrics metrics = config.data_mode == DataMode::exact
                              ? lhts_step(state, exact_batch, j)
                              : lhts_step(state, draw_batch(config, dataset, base, step), j);
    const bool last = step + 1 == config.steps;
    if (enumerable && config.eval_every > 0 && ((step + 1) % config.eval_every == 0 || last)) {
      metrics.kl_to_target = kl_to_target(j);
    }
    if (on_step) on_step(metrics);
    result.metrics.push_back(metrics);
  }
  result.model = state.student();
  result.final_kl.resize(config.temperatures.size());
  if (enumerable) {
    for (std::size_t j = 0; j < config.temperatures.size(); ++j) result.final_kl[j] = kl_to_target(j);
  }
  return result;
}

ar::Model train_mle(ar::Model model, std::span<const Sequence> dataset, const MleConfig& config,
                    const std::function<void(std::size_t, double)>& on_step) {
  if (dataset.empty()) throw ConfigError("data: maximum-likelihood training needs at least one sequence");
  std::vector<Example> full;
  if (config.batch_size == 0) {
    full.reserve(dataset.size());
    for (const auto& x : dataset) full.push_back({x, 1.0});
  }
  Tape tape;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<Example> minibatch;
    if (config.batch_size > 0) {
      numerics::Rng rng = numerics::Rng::derive(config.seed, "mle-batch", step);
      for (std::size_t b = 0; b < config.batch_size; ++b) minibatch.push_back({dataset[rng.index(dataset.size())], 1.0});
    }
    auto lg = mle_loss_gradient(model, config.batch_size > 0 ? minibatch : full, tape);
    if (!std::isfinite(lg.total)) throw NumericalError("non-finite maximum-likelihood loss at step " + std::to_string(step));
    numerics::clip_gradient_norm(lg.gradient, config.grad_clip);
    numerics::gradient_descent_step(model.parameters(), lg.gradient, config.learning_rate);
    if (on_step) on_step(step, lg.total);
  }
  return model;
}

double exact_ar_loss(const ar::Model& base, const ar::Model& model, double temperature, std::size_t horizon,
                     double clip, std::optional<double> t_cond) {
  const auto examples = enumerate_examples(base);
  const auto L = static_cast<std::size_t>(base.max_length());
  std::vector<std::vector<double>> suffixes;
  suffixes.reserve(examples.size());
  std::vector<double> mean(L, 0.0);
  double mass = 0.0;
  for (const auto& ex : examples) {
    suffixes.push_back(apply_horizon(suffix_log_liks(base, ex.tokens), horizon == 0 ? L : horizon));
    for (std::size_t i = 0; i < L; ++i) mean[i] += ex.mass * suffixes.back()[i];
    mass += ex.mass;
  }
  for (double& m : mean) m /= mass;
  const auto weights = ar_weights(suffixes, temperature, mean, clip);
  return ar_objective<double>(base, model, model.parameters(), examples, &weights, 0.0, t_cond);
}

JointLoss exact_joint_loss(const oracle::CategoricalTable& base, const oracle::CategoricalTable& model,
                           double temperature) {
  if (base.size() != model.size()) throw std::invalid_argument("exact_joint_loss: table size mismatch");
  const double a = temperature_factor(temperature);
  JointLoss out;
  double mean = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base.log_probs[i] == numerics::kNegInf) continue;
    mean += std::exp(base.log_probs[i]) * base.log_probs[i];
  }
  out.baseline = a * mean;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double lp = base.log_probs[i];
    if (lp == numerics::kNegInf) continue;
    out.loss -= std::exp(lp) * std::exp(a * lp - out.baseline) * model.log_probs[i];
  }
  return out;
}

std::vector<double> exponent_variance_by_index(const ar::Model& base, std::span<const Sequence> samples,
                                               double temperature, std::size_t horizon) {
  if (samples.empty()) throw std::invalid_argument("exponent_variance_by_index: no samples");
  const double a = temperature_factor(temperature);
  const std::size_t L = samples.front().size();
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  std::vector<double> mean(L, 0.0);
  for (const auto& x : samples) {
    if (x.size() != L) throw std::invalid_argument("exponent_variance_by_index: ragged samples");
    rows.push_back(apply_horizon(suffix_log_liks(base, x), horizon == 0 ? L : horizon));
    for (std::size_t i = 0; i < L; ++i) mean[i] += rows.back()[i];
  }
  const double n = static_cast<double>(samples.size());
  for (double& m : mean) m /= n;
  std::vector<double> var(L, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < L; ++i) var[i] += numerics::square(a * (r[i] - mean[i]));
  }
  for (double& v : var) v /= n;
  return var;
}

}  // namespace lhts::train
