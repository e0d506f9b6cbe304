#include "lhts/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "lhts/error.hpp"

namespace lhts::eval {

double repetition_rate(std::span<const ar::Sequence> samples) {
  std::size_t pairs = 0;
  std::size_t repeats = 0;
  for (const auto& x : samples) {
    for (std::size_t i = 1; i < x.size(); ++i) {
      ++pairs;
      if (x[i] == x[i - 1]) ++repeats;
    }
  }
  return pairs ? static_cast<double>(repeats) / static_cast<double>(pairs) : 0.0;
}

double distinct_rate(std::span<const ar::Sequence> samples) {
  if (samples.empty()) return 0.0;
  const std::set<ar::Sequence> unique(samples.begin(), samples.end());
  return static_cast<double>(unique.size()) / static_cast<double>(samples.size());
}

MetricsRow eval_samples(std::span<const ar::Sequence> samples, const ar::Model& base,
                        const oracle::CategoricalTable* oracle) {
  if (samples.empty()) throw std::invalid_argument("eval_samples: empty sample batch");
  MetricsRow row;
  row.samples = samples.size();
  double total = 0.0;
  for (const auto& x : samples) total += base.sequence_log_prob(x);
  row.mean_log_likelihood = total / static_cast<double>(samples.size());
  row.distinct_rate = distinct_rate(samples);
  row.repetition_rate = repetition_rate(samples);
  if (oracle) {
    const auto empirical = oracle::empirical_table(oracle->vocab_size, oracle->length, samples);
    row.total_variation = oracle::total_variation(empirical, *oracle);
    row.kl_empirical_to_oracle = oracle::kl_divergence(empirical, *oracle).value;
  }
  return row;
}

namespace {

bool finite(const std::optional<double>& v) { return !v || std::isfinite(*v); }

}  // namespace

void finalize_report(std::vector<MetricsRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    if (a.long_horizon_temperature != b.long_horizon_temperature) {
      return a.long_horizon_temperature < b.long_horizon_temperature;
    }
    return a.myopic_temperature < b.myopic_temperature;
  });
  for (const auto& r : rows) {
    if (!std::isfinite(r.mean_log_likelihood) || !finite(r.total_variation) ||
        !finite(r.kl_empirical_to_oracle) || !finite(r.kl_to_oracle)) {
      throw NumericalError("metrics row at T = " + std::to_string(r.long_horizon_temperature) +
                           ", myopic T = " + std::to_string(r.myopic_temperature) + " has a non-finite value");
    }
  }
}

std::string csv_header() {
  return "long_horizon_T,myopic_T,samples,mean_log_likelihood,distinct_rate,repetition_rate,"
         "total_variation,kl_empirical_to_oracle,kl_to_oracle";
}

std::string shortest(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

std::string csv_row(const MetricsRow& r) {
  std::string line = shortest(r.long_horizon_temperature) + ',' + shortest(r.myopic_temperature) + ',' +
                     std::to_string(r.samples) + ',' + shortest(r.mean_log_likelihood) + ',' +
                     shortest(r.distinct_rate) + ',' + shortest(r.repetition_rate);
  for (const auto* v : {&r.total_variation, &r.kl_empirical_to_oracle, &r.kl_to_oracle}) {
    line += ',';
    if (*v) line += shortest(**v);
  }
  return line;
}

namespace {

nlohmann::ordered_json optional_value(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string json_line(const train::StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["temperature"] = m.temperature;
  j["loss"] = m.loss;
  j["kl_to_base"] = m.kl_to_base;
  j["total"] = m.total;
  j["normalizer"] = m.normalizer;
  j["grad_norm"] = m.grad_norm;
  j["weight_mean"] = m.weights.mean;
  j["weight_variance"] = m.weights.variance;
  j["weight_max"] = m.weights.max;
  j["clip_rate"] = m.weights.clip_rate;
  j["kl_to_target"] = optional_value(m.kl_to_target);
  return j.dump();
}

std::string json_line(const MetricsRow& row) {
  nlohmann::ordered_json j;
  j["long_horizon_T"] = row.long_horizon_temperature;
  j["myopic_T"] = row.myopic_temperature;
  j["samples"] = row.samples;
  j["mean_log_likelihood"] = row.mean_log_likelihood;
  j["distinct_rate"] = row.distinct_rate;
  j["repetition_rate"] = row.repetition_rate;
  j["total_variation"] = optional_value(row.total_variation);
  j["kl_empirical_to_oracle"] = optional_value(row.kl_empirical_to_oracle);
  j["kl_to_oracle"] = optional_value(row.kl_to_oracle);
  return j.dump();
}

}  // namespace lhts::eval
