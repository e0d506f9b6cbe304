#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhts/ar_model.hpp"
#include "lhts/oracle.hpp"
#include "lhts/trainer.hpp"

namespace lhts::eval {

/// One row of a metrics report.
struct MetricsRow {
  double long_horizon_temperature = 1.0;
  double myopic_temperature = 1.0;
  std::size_t samples = 0;
  double mean_log_likelihood = 0.0;  // under the base model p
  double distinct_rate = 0.0;        // unique sequences / n
  double repetition_rate = 0.0;      // adjacent equal tokens / adjacent pairs
  /// Against the oracle table, when one is supplied.
  std::optional<double> total_variation;
  std::optional<double> kl_empirical_to_oracle;
  /// Exact KL(p_T || q) of the sampling model, filled in by callers that can
  /// enumerate it.
  std::optional<double> kl_to_oracle;
};

/// Sample statistics of a batch. Throws on an empty batch.
MetricsRow eval_samples(std::span<const ar::Sequence> samples, const ar::Model& base,
                        const oracle::CategoricalTable* oracle = nullptr);

/// Fraction of adjacent positions holding the same token, pooled over samples.
double repetition_rate(std::span<const ar::Sequence> samples);
double distinct_rate(std::span<const ar::Sequence> samples);

/// Sorts rows by (long_horizon_T, myopic_T) and checks every value is finite.
void finalize_report(std::vector<MetricsRow>& rows);

/// Fixed summary CSV header and row formatting (shortest round-trip
/// decimals, empty cells for missing values).
std::string csv_header();
std::string csv_row(const MetricsRow& row);
/// Shortest decimal text that parses back to the same double.
std::string shortest(double value);

/// One JSON object per line, keys in a fixed order.
std::string json_line(const train::StepMetrics& metrics);
std::string json_line(const MetricsRow& row);

}  // namespace lhts::eval
