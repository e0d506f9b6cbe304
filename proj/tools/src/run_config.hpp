#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lhts/ar_model.hpp"
#include "lhts/trainer.hpp"

namespace lhts::cli {

inline constexpr std::array<std::string_view, 7> kTasks{"train-base", "train-lhts", "train-diffusion", "sample",
                                                        "eval-oracle", "sweep", "demo-figure1"};

struct ModelSpec {
  ar::Parameterization parameterization = ar::Parameterization::tabular;
  int vocab_size = 4;
  int length = 4;
  int window = 3;
  /// Width of the temperature embedding added to the finetuned model; 0 = none.
  int embedding_width = 0;
  double embedding_init_scale = 0.05;
  /// Base model p. Without it the synthetic teacher serves as p.
  std::optional<std::filesystem::path> checkpoint;
};

enum class Teacher { random_tabular, shared_prefix, iid };

struct DataSpec {
  /// Text file, one sequence per line, tokens separated by spaces.
  std::optional<std::filesystem::path> path;
  Teacher teacher = Teacher::random_tabular;
  double skew = 1.5;
  std::vector<double> marginal{0.5, 0.25, 0.15, 0.1};
  std::uint64_t teacher_seed = 1;
  std::size_t size = 10000;
};

struct SampleSpec {
  std::size_t count = 2000;
  std::vector<double> myopic_temperatures{1.0};
  std::optional<double> t_cond;
  /// Model to sample; defaults to the base model.
  std::optional<std::filesystem::path> checkpoint;
};

struct SweepSpec {
  std::vector<double> long_horizon_temperatures{0.5, 0.8, 1.0};
  std::vector<double> myopic_temperatures{0.5, 0.8, 1.0};
  std::size_t samples = 2000;
};

struct DemoSpec {
  /// relabel[k] is the token used for word k of the scenario.
  std::vector<ar::Token> relabel{0, 1, 2, 3};
  double myopic_temperature = 0.01;
  double long_horizon_temperature = 0.01;
  /// Temperature of the finetuned model; 0 skips finetuning.
  double train_temperature = 0.1;
};

struct DiffusionSpec {
  int dim = 2;
  double weight = 0.7;
  double separation = 3.0;
  double sd = 0.3;
  std::size_t data_size = 8000;
  int diffusion_steps = 50;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  int hidden = 64;
  int step_features = 16;
  std::size_t base_steps = 6000;
  std::size_t finetune_steps = 3000;
  std::size_t batch_size = 128;
  double learning_rate = 2e-3;
  double grad_clip = 1.0;
  double temperature = 0.5;
  double clip = 3.0;
  int elbo_samples = 4;
  std::size_t sample_count = 10000;
  std::vector<double> pseudo_temperatures{1.0};
};

struct RunConfig {
  std::string task;
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/lhts";
  ModelSpec model;
  DataSpec data;
  train::MleConfig mle;
  train::LhtsConfig lhts;
  SampleSpec sample;
  SweepSpec sweep;
  DemoSpec demo;
  DiffusionSpec diffusion;
};

/// Applies `key=value` overrides with dotted keys (`lhts.steps=200`). Values
/// are parsed as JSON and fall back to plain strings.
void apply_overrides(nlohmann::json& document, std::span<const std::string> overrides);

/// Parses and validates a config document. Unknown keys, wrong types and out
/// of range values throw ConfigError naming the field.
RunConfig parse_config(const nlohmann::json& document);

/// Fully resolved config, defaults included.
nlohmann::json to_json(const RunConfig& config);

std::string_view to_string(Teacher teacher);

}  // namespace lhts::cli
