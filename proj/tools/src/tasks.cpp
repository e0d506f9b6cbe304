#include "tasks.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "lhts/diffusion.hpp"
#include "lhts/error.hpp"
#include "lhts/eval.hpp"
#include "lhts/numerics/parallel.hpp"
#include "lhts/oracle.hpp"
#include "lhts/scenarios.hpp"

namespace lhts::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string label(double t) {
  std::ostringstream os;
  os << std::setprecision(6) << t;
  return os.str();
}

std::uint64_t seed_for(const RunConfig& c, std::string_view stream, std::uint64_t counter = 0) {
  return numerics::derive_seed(c.seed, stream, counter);
}

std::ofstream open_file(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

class Output {
 public:
  Output(const RunConfig& c, const std::string& config_text) : dir_(c.out) {
    std::filesystem::create_directories(dir_);
    open_file(dir_ / "config.json") << config_text;
    open_file(dir_ / "resolved_config.json") << to_json(c).dump(2) << '\n';
    metrics_ = open_file(dir_ / "metrics.jsonl");
  }

  std::filesystem::path operator/(std::string_view name) const { return dir_ / name; }
  std::ofstream& metrics() { return metrics_; }

  void summary(std::vector<eval::MetricsRow> rows) {
    eval::finalize_report(rows);
    auto out = open_file(dir_ / "summary.csv");
    out << eval::csv_header() << '\n';
    for (const auto& row : rows) out << eval::csv_row(row) << '\n';
  }

 private:
  std::filesystem::path dir_;
  std::ofstream metrics_;
};

bool enumerable(const ar::Model& m) {
  std::size_t size = 1;
  for (int i = 0; i < m.max_length(); ++i) {
    size *= static_cast<std::size_t>(m.vocab_size());
    if (size > kOracleLimit) return false;
  }
  return true;
}

ar::Model teacher(const RunConfig& c) {
  const int V = c.model.vocab_size;
  const int L = c.model.length;
  switch (c.data.teacher) {
    case Teacher::random_tabular:
      return scenarios::random_tabular(V, L, c.data.skew, c.data.teacher_seed);
    case Teacher::shared_prefix:
      if (V != 4 || L != 2) throw ConfigError("model.vocab_size: the shared_prefix teacher needs vocab_size 4 and length 2");
      return scenarios::shared_prefix::model();
    case Teacher::iid:
      if (c.data.marginal.size() != static_cast<std::size_t>(V)) {
        throw ConfigError("data.marginal: needs one entry per token (model.vocab_size)");
      }
      return scenarios::iid_model(c.data.marginal, L);
  }
  throw ConfigError("data.teacher: unknown teacher");
}

ar::Model load_checkpoint(const std::filesystem::path& path, const std::string& field) {
  try {
    return ar::load_model(path);
  } catch (const std::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

ar::Model base_model(const RunConfig& c) {
  return c.model.checkpoint ? load_checkpoint(*c.model.checkpoint, "model.checkpoint") : teacher(c);
}

std::vector<ar::Sequence> dataset(const RunConfig& c, const ar::Model& source) {
  if (c.data.path) return read_sequences(*c.data.path, source.vocab_size(), source.max_length());
  return scenarios::sample_dataset(source, c.data.size, seed_for(c, "data"));
}

ar::Model fresh_model(const RunConfig& c) {
  return c.model.parameterization == ar::Parameterization::tabular
             ? ar::Model::tabular(c.model.vocab_size, c.model.length)
             : ar::Model::linear(c.model.vocab_size, c.model.length, c.model.window);
}

struct RowSpec {
  double long_horizon = 1.0;
  double myopic = 1.0;
  std::optional<double> t_cond;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

// Samples `model`, scores the batch under `base` and against `target` when
// given. The exact KL is left empty where the sampler misses part of the
// target's support.
eval::MetricsRow sample_row(const ar::Model& model, const ar::Model& base, const RowSpec& spec,
                            const oracle::CategoricalTable* target, std::vector<ar::Sequence>* keep = nullptr) {
  numerics::Rng rng(spec.seed);
  auto batch = ar::sample(model, spec.count, spec.myopic, spec.t_cond, rng);
  auto row = eval::eval_samples(batch.sequences, base, target);
  row.long_horizon_temperature = spec.long_horizon;
  row.myopic_temperature = spec.myopic;
  if (target) {
    const auto q = oracle::myopic_scale_joint(model, spec.myopic, spec.t_cond);
    const auto kl = oracle::kl_divergence(*target, q);
    if (!kl.support_violation) row.kl_to_oracle = kl.value;
  }
  if (keep) *keep = std::move(batch.sequences);
  return row;
}

std::optional<oracle::CategoricalTable> tempered(const ar::Model& base, double T) {
  if (!enumerable(base)) return std::nullopt;
  return oracle::temperature_scale_exact(oracle::enumerate_joint(base, base.max_length()), T);
}

const oracle::CategoricalTable* ptr(const std::optional<oracle::CategoricalTable>& t) { return t ? &*t : nullptr; }

void train_base(const RunConfig& c, Output& out, std::ostream& report) {
  const auto source = teacher(c);
  const auto data = dataset(c, source);
  auto model = fresh_model(c);
  if (data.empty() && c.mle.steps > 0) throw ConfigError("data.size: training needs at least one sequence");
  model = train::train_mle(model, data, c.mle, [&](std::size_t step, double loss) {
    ordered_json j;
    j["step"] = step;
    j["loss"] = loss;
    out.metrics() << j.dump() << '\n';
  });
  ar::save_model(model, out / "base.json");

  std::vector<eval::MetricsRow> rows;
  const auto truth = enumerable(source) && !c.data.path ? std::optional(oracle::enumerate_joint(source, source.max_length()))
                                                        : std::nullopt;
  for (std::size_t k = 0; k < c.sample.myopic_temperatures.size(); ++k) {
    const double myopic = c.sample.myopic_temperatures[k];
    const auto target = myopic == 1.0 ? truth : std::nullopt;
    rows.push_back(sample_row(model, model, {1.0, myopic, std::nullopt, c.sample.count, seed_for(c, "samples", k)}, ptr(target)));
  }
  out.summary(rows);
  report << "trained base model on " << data.size() << " sequences; checkpoint " << (out / "base.json").string() << '\n';
  if (truth) report << "KL(teacher || base) = " << oracle::kl_divergence(*truth, oracle::enumerate_joint(model, model.max_length())).value << '\n';
}

ar::Model student_for(const RunConfig& c, const ar::Model& base) {
  auto student = base;
  if (c.model.embedding_width > 0) {
    student.enable_temperature_embedding(c.model.embedding_width, seed_for(c, "embedding"), c.model.embedding_init_scale);
  }
  return student;
}

void train_lhts(const RunConfig& c, Output& out, std::ostream& report) {
  if (c.lhts.temperatures.size() > 1 && c.model.embedding_width == 0) {
    throw ConfigError("lhts.temperatures: several temperatures need a temperature embedding (model.embedding_width > 0)");
  }
  const auto base = base_model(c);
  if (c.lhts.data_mode == train::DataMode::exact && !enumerable(base)) {
    throw ConfigError("lhts.data_mode: exact mode needs an enumerable sequence space");
  }
  const auto data = c.lhts.data_mode == train::DataMode::dataset ? dataset(c, base) : std::vector<ar::Sequence>{};
  const auto result = train::train(base, student_for(c, base), data, c.lhts,
                                   [&](const train::StepMetrics& m) { out.metrics() << eval::json_line(m) << '\n'; });
  ar::save_model(result.model, out / "student.json");

  std::vector<eval::MetricsRow> rows;
  std::uint64_t counter = 0;
  for (double T : c.lhts.temperatures) {
    const auto target = tempered(base, T);
    const auto t_cond = result.model.temperature_conditioned() ? std::optional(T) : std::nullopt;
    for (double myopic : c.sample.myopic_temperatures) {
      rows.push_back(sample_row(result.model, base, {T, myopic, t_cond, c.sample.count, seed_for(c, "samples", counter++)},
                                ptr(target)));
    }
  }
  out.summary(rows);
  report << "finetuned for " << c.lhts.steps << " steps; checkpoint " << (out / "student.json").string() << '\n';
  for (std::size_t j = 0; j < result.final_kl.size(); ++j) {
    if (result.final_kl[j]) report << "KL(p_T || q) at T = " << c.lhts.temperatures[j] << ": " << *result.final_kl[j] << '\n';
  }
}

void sample_task(const RunConfig& c, Output& out, std::ostream& report) {
  const auto base = base_model(c);
  const auto model = c.sample.checkpoint ? load_checkpoint(*c.sample.checkpoint, "sample.checkpoint") : base;
  if (model.temperature_conditioned() && !c.sample.t_cond) {
    throw ConfigError("sample.t_cond: required for a temperature-conditioned checkpoint");
  }
  if (!model.temperature_conditioned() && c.sample.t_cond) {
    throw ConfigError("sample.t_cond: the checkpoint has no temperature embedding");
  }
  const double T = c.sample.t_cond.value_or(1.0);
  const auto target = tempered(base, T);
  std::vector<eval::MetricsRow> rows;
  auto samples = open_file(out / "samples.jsonl");
  for (std::size_t k = 0; k < c.sample.myopic_temperatures.size(); ++k) {
    const double myopic = c.sample.myopic_temperatures[k];
    std::vector<ar::Sequence> kept;
    rows.push_back(sample_row(model, base, {T, myopic, c.sample.t_cond, c.sample.count, seed_for(c, "samples", k)}, ptr(target), &kept));
    for (const auto& x : kept) {
      ordered_json j;
      j["myopic_T"] = myopic;
      j["tokens"] = x;
      j["log_p"] = base.sequence_log_prob(x);
      samples << j.dump() << '\n';
    }
    out.metrics() << eval::json_line(rows.back()) << '\n';
  }
  out.summary(rows);
  report << "wrote " << c.sample.count * c.sample.myopic_temperatures.size() << " samples to "
         << (out / "samples.jsonl").string() << '\n';
}

void eval_oracle(const RunConfig& c, Output& out, std::ostream& report) {
  const auto base = base_model(c);
  if (!enumerable(base)) throw ConfigError("model: the sequence space is too large to enumerate");
  const auto p = oracle::enumerate_joint(base, base.max_length());
  std::vector<eval::MetricsRow> rows;
  std::uint64_t counter = 0;
  for (double T : c.lhts.temperatures) {
    const auto pT = oracle::temperature_scale_exact(p, T);
    open_file(out / ("oracle_T" + label(T) + ".json")) << oracle::to_json(pT) << '\n';

    numerics::Rng rng(seed_for(c, "samples", counter++));
    const auto exact = oracle::sample_table(pT, c.sample.count, rng);
    auto row = eval::eval_samples(exact, base, &pT);
    row.long_horizon_temperature = T;
    row.myopic_temperature = 1.0;
    row.kl_to_oracle = 0.0;
    rows.push_back(row);
    if (T != 1.0) {
      rows.push_back(sample_row(base, base, {T, T, std::nullopt, c.sample.count, seed_for(c, "samples", counter++)}, &pT));
      rows.back().long_horizon_temperature = T;
    }

    ordered_json j;
    j["temperature"] = T;
    j["entropy"] = oracle::entropy(pT);
    j["log_partition"] = pT.log_partition;
    j["kl_to_myopic"] = oracle::kl_divergence(pT, oracle::myopic_scale_joint(base, T)).value;
    const auto mode = oracle::argmax_joint(pT);
    j["argmax"] = mode;
    out.metrics() << j.dump() << '\n';
    report << "T = " << T << ": H(p_T) = " << j["entropy"].get<double>() << ", KL(p_T || myopic_T) = "
           << j["kl_to_myopic"].get<double>() << '\n';
  }
  out.summary(rows);
}

void sweep(const RunConfig& c, Output& out, std::ostream& report) {
  const auto base = base_model(c);
  if (c.lhts.data_mode == train::DataMode::exact && !enumerable(base)) {
    throw ConfigError("lhts.data_mode: exact mode needs an enumerable sequence space");
  }
  const auto data = c.lhts.data_mode == train::DataMode::dataset ? dataset(c, base) : std::vector<ar::Sequence>{};
  const auto& temps = c.sweep.long_horizon_temperatures;
  const auto& myopics = c.sweep.myopic_temperatures;

  std::vector<std::optional<ar::Model>> models(temps.size());
  std::vector<std::vector<train::StepMetrics>> metrics(temps.size());
  numerics::parallel_for(temps.size(), [&](std::size_t j) {
    auto lc = c.lhts;
    lc.temperatures = {temps[j]};
    lc.seed = seed_for(c, "sweep-train", j);
    auto result = train::train(base, student_for(c, base), data, lc);
    models[j] = std::move(result.model);
    metrics[j] = std::move(result.metrics);
  });
  for (std::size_t j = 0; j < temps.size(); ++j) {
    ar::save_model(*models[j], out / ("q_T" + label(temps[j]) + ".json"));
    for (const auto& m : metrics[j]) out.metrics() << eval::json_line(m) << '\n';
  }

  std::vector<std::optional<oracle::CategoricalTable>> targets(temps.size());
  for (std::size_t j = 0; j < temps.size(); ++j) targets[j] = tempered(base, temps[j]);
  std::vector<eval::MetricsRow> rows(temps.size() * myopics.size());
  numerics::parallel_for(rows.size(), [&](std::size_t cell) {
    const std::size_t j = cell / myopics.size();
    const std::size_t k = cell % myopics.size();
    const auto& q = *models[j];
    const auto t_cond = q.temperature_conditioned() ? std::optional(temps[j]) : std::nullopt;
    rows[cell] = sample_row(q, base, {temps[j], myopics[k], t_cond, c.sweep.samples, seed_for(c, "sweep-cell", cell)},
                            ptr(targets[j]));
  });
  out.summary(rows);
  report << "sweep: " << rows.size() << " cells written to " << (out / "summary.csv").string() << '\n';
}

void demo_figure1(const RunConfig& c, Output& out, std::ostream& report) {
  namespace sp = scenarios::shared_prefix;
  const auto& relabel = c.demo.relabel;
  const auto base = sp::model(relabel);
  std::vector<ar::Sequence> answers;
  for (const auto& a : sp::answers()) {
    ar::Sequence x;
    for (auto t : a) x.push_back(relabel[static_cast<std::size_t>(t)]);
    answers.push_back(x);
  }
  const ar::Token shared = relabel[static_cast<std::size_t>(sp::kTap)];
  auto word = [&](const ar::Sequence& x) {
    std::string s;
    for (auto t : x) {
      const auto k = static_cast<std::size_t>(std::find(relabel.begin(), relabel.end(), t) - relabel.begin());
      s += (s.empty() ? "" : " ") + std::string(sp::kWords[k]);
    }
    return s;
  };

  const auto myopic = oracle::myopic_scale_joint(base, c.demo.myopic_temperature);
  const auto exact = oracle::temperature_scale_exact(oracle::enumerate_joint(base, 2), c.demo.long_horizon_temperature);
  double subtree = 0.0;
  for (std::size_t i = 0; i < myopic.size(); ++i) {
    if (myopic.space().sequence(i)[0] == shared) subtree += myopic.prob(i);
  }

  ordered_json j;
  j["myopic_temperature"] = c.demo.myopic_temperature;
  j["long_horizon_temperature"] = c.demo.long_horizon_temperature;
  j["myopic_shared_prefix_mass"] = subtree;
  std::optional<oracle::CategoricalTable> trained;
  std::vector<eval::MetricsRow> rows;
  if (c.demo.train_temperature > 0.0) {
    auto lc = c.lhts;
    lc.temperatures = {c.demo.train_temperature};
    lc.data_mode = train::DataMode::exact;
    const auto result = train::train(base, base, {}, lc, [&](const train::StepMetrics& m) { out.metrics() << eval::json_line(m) << '\n'; });
    ar::save_model(result.model, out / "student.json");
    trained = oracle::enumerate_joint(result.model, 2);
    const auto target = tempered(base, c.demo.train_temperature);
    rows.push_back(sample_row(result.model, base, {c.demo.train_temperature, 1.0, std::nullopt, c.sample.count, seed_for(c, "samples", 2)}, ptr(target)));
  }
  report << "shared-prefix scenario (relabel";
  for (auto t : relabel) report << ' ' << t;
  report << ")\n  myopic T = " << c.demo.myopic_temperature << ": mass on the '" << sp::kWords[0]
         << "' subtree " << subtree << '\n';
  j["answers"] = ordered_json::array();
  double worst_exact = 0.0;
  for (const auto& a : answers) {
    ordered_json row;
    row["sequence"] = word(a);
    row["tokens"] = a;
    row["myopic_mass"] = std::exp(myopic.log_prob(a));
    row["exact_mass"] = std::exp(exact.log_prob(a));
    worst_exact = std::max(worst_exact, std::abs(row["exact_mass"].get<double>() - 1.0 / 3.0));
    if (trained) row["trained_mass"] = std::exp(trained->log_prob(a));
    report << "  " << std::left << std::setw(14) << word(a) << " myopic " << std::setw(12) << row["myopic_mass"].get<double>()
           << " exact " << std::setw(12) << row["exact_mass"].get<double>();
    if (trained) report << " trained " << row["trained_mass"].get<double>();
    report << '\n';
    j["answers"].push_back(row);
  }
  j["myopic_collapses"] = subtree >= 0.99;
  j["exact_splits_evenly"] = worst_exact <= 0.01;
  open_file(out / "report.json") << j.dump(2) << '\n';

  rows.push_back(sample_row(base, base, {c.demo.long_horizon_temperature, c.demo.myopic_temperature, std::nullopt, c.sample.count, seed_for(c, "samples", 0)}, &exact));
  numerics::Rng rng(seed_for(c, "samples", 1));
  auto row = eval::eval_samples(oracle::sample_table(exact, c.sample.count, rng), base, &exact);
  row.long_horizon_temperature = c.demo.long_horizon_temperature;
  row.myopic_temperature = 1.0;
  row.kl_to_oracle = 0.0;
  rows.push_back(row);
  out.summary(rows);
}

void train_diffusion(const RunConfig& c, Output& out, std::ostream& report) {
  using namespace diffusion;
  const auto& d = c.diffusion;
  const auto truth = MixtureGroundTruth::two_component(d.dim, d.weight, d.separation, d.sd);
  auto data_rng = numerics::Rng::derive(c.seed, "diffusion-data");
  const auto data = truth.sample(d.data_size, data_rng);
  write_points_csv(data, out / "data.csv");

  DdpmConfig dc;
  dc.steps = d.base_steps;
  dc.batch_size = d.batch_size;
  dc.learning_rate = d.learning_rate;
  dc.grad_clip = d.grad_clip;
  dc.seed = seed_for(c, "diffusion-base");
  auto log = [&](const char* phase) {
    return [&out, phase](std::size_t step, double loss) {
      ordered_json j;
      j["phase"] = phase;
      j["step"] = step;
      j["loss"] = loss;
      out.metrics() << j.dump() << '\n';
    };
  };
  const DiffusionModel init(d.dim, NoiseSchedule::linear(d.diffusion_steps, d.beta_start, d.beta_end), d.hidden,
                            d.step_features, seed_for(c, "diffusion-init"));
  const auto base = train_ddpm(init, data, dc, log("base"));
  save_diffusion(base, out / "base_diffusion.json");

  const auto weights = lhts_diffusion_weights(base, data, d.temperature, d.clip, seed_for(c, "diffusion-elbo"), d.elbo_samples);
  std::vector<double> w;
  for (const auto& row : weights.weights) w.push_back(row[0]);
  const auto stats = weights.stats();
  ordered_json wj;
  wj["phase"] = "weights";
  wj["temperature"] = d.temperature;
  wj["weight_mean"] = stats.mean;
  wj["weight_variance"] = stats.variance;
  wj["weight_max"] = stats.max;
  wj["clip_rate"] = stats.clip_rate;
  out.metrics() << wj.dump() << '\n';

  DdpmConfig fc = dc;
  fc.steps = d.finetune_steps;
  fc.seed = seed_for(c, "diffusion-finetune");
  const auto tuned = finetune_weighted(base, data, w, fc, log("finetune"));
  save_diffusion(tuned, out / "tuned_diffusion.json");

  auto summary = open_file(out / "summary.csv");
  summary << "model,pseudo_temperature,samples,high_weight_frequency,tempered_target,mean_log_density\n";
  const double target = truth.tempered_proportions(d.temperature)[0];
  std::uint64_t counter = 0;
  for (const auto* name : {"base", "tuned"}) {
    const auto& model = std::string_view(name) == "base" ? base : tuned;
    for (double t : d.pseudo_temperatures) {
      auto rng = numerics::Rng::derive(c.seed, "diffusion-samples", counter++);
      const auto pts = sample_ancestral(model, d.sample_count, t, rng);
      write_points_csv(pts, out / ("samples_" + std::string(name) + "_t" + label(t) + ".csv"));
      double ll = 0.0;
      for (const auto& x : pts) ll += truth.log_density(x);
      ll /= static_cast<double>(pts.size());
      const double freq = component_frequencies(truth, pts)[0];
      summary << name << ',' << eval::shortest(t) << ',' << pts.size() << ',' << eval::shortest(freq) << ','
              << eval::shortest(target) << ',' << eval::shortest(ll) << '\n';
      report << name << " t = " << t << ": high-weight component frequency " << freq << " (tempered target " << target
             << ", data weight " << d.weight << ")\n";
    }
  }
}

}  // namespace

std::vector<ar::Sequence> read_sequences(const std::filesystem::path& path, int vocab_size, int length) {
  std::ifstream in(path);
  if (!in) throw ConfigError("data.path: cannot read " + path.string());
  std::vector<ar::Sequence> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream fields(line);
    ar::Sequence x;
    long long t = 0;
    while (fields >> t) {
      if (t < 0 || t >= vocab_size) {
        throw ConfigError("data.path: line " + std::to_string(number) + ": token " + std::to_string(t) + " outside 0.." +
                          std::to_string(vocab_size - 1));
      }
      x.push_back(static_cast<ar::Token>(t));
    }
    if (!fields.eof()) throw ConfigError("data.path: line " + std::to_string(number) + ": expected integer tokens");
    if (x.empty()) continue;
    if (static_cast<int>(x.size()) != length) {
      throw ConfigError("data.path: line " + std::to_string(number) + ": expected " + std::to_string(length) + " tokens");
    }
    out.push_back(std::move(x));
  }
  return out;
}

void write_sequences(std::span<const ar::Sequence> sequences, const std::filesystem::path& path) {
  auto out = open_file(path);
  for (const auto& x : sequences) {
    for (std::size_t i = 0; i < x.size(); ++i) out << (i ? " " : "") << x[i];
    out << '\n';
  }
}

void run_task(const RunConfig& config, const std::string& config_text, std::ostream& report) {
  Output out(config, config_text);
  const auto& task = config.task;
  if (task == "train-base") {
    train_base(config, out, report);
  } else if (task == "train-lhts") {
    train_lhts(config, out, report);
  } else if (task == "train-diffusion") {
    train_diffusion(config, out, report);
  } else if (task == "sample") {
    sample_task(config, out, report);
  } else if (task == "eval-oracle") {
    eval_oracle(config, out, report);
  } else if (task == "sweep") {
    sweep(config, out, report);
  } else if (task == "demo-figure1") {
    demo_figure1(config, out, report);
  } else {
    throw ConfigError("task: unknown task '" + task + "'");
  }
}

}  // namespace lhts::cli
