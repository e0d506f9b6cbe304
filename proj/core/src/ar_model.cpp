#include "lhts/ar_model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lhts::ar {

using numerics::kNegInf;

std::string_view to_string(Parameterization p) {
  return p == Parameterization::tabular ? "tabular" : "linear";
}

Parameterization parameterization_from_string(std::string_view name) {
  if (name == "tabular") return Parameterization::tabular;
  if (name == "linear") return Parameterization::linear;
  throw std::invalid_argument("unknown parameterization '" + std::string(name) + "'");
}

namespace {

std::size_t tabular_rows(int vocab_size, int max_length) {
  // Σ_{i<L} V^i, with an early exit once the cap is exceeded.
  std::size_t rows = 0;
  std::size_t level = 1;
  for (int i = 0; i < max_length; ++i) {
    rows += level;
    if (rows * static_cast<std::size_t>(vocab_size) > kMaxTabularParameters) {
      throw std::length_error("tabular model needs more than " +
                              std::to_string(kMaxTabularParameters) + " parameters");
    }
    level *= static_cast<std::size_t>(vocab_size);
  }
  return rows;
}

void check_shape(int vocab_size, int max_length) {
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  if (max_length < 1) throw std::invalid_argument("max_length must be >= 1");
}

nlohmann::json encode_values(std::span<const double> values) {
  // -inf logits (zero-probability entries) are stored as null.
  auto arr = nlohmann::json::array();
  for (double v : values) arr.push_back(v == kNegInf ? nlohmann::json(nullptr) : nlohmann::json(v));
  return arr;
}

std::vector<double> decode_values(const nlohmann::json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.is_null() ? kNegInf : v.get<double>());
  return out;
}

}  // namespace

Model Model::tabular(int vocab_size, int max_length) {
  check_shape(vocab_size, max_length);
  Model m;
  m.parameterization_ = Parameterization::tabular;
  m.vocab_size_ = vocab_size;
  m.max_length_ = max_length;
  m.core_size_ = tabular_rows(vocab_size, max_length) * static_cast<std::size_t>(vocab_size);
  m.params_.assign(m.core_size_, 0.0);
  return m;
}

Model Model::linear(int vocab_size, int max_length, int window) {
  check_shape(vocab_size, max_length);
  if (window < 0) throw std::invalid_argument("window must be >= 0");
  Model m;
  m.parameterization_ = Parameterization::linear;
  m.vocab_size_ = vocab_size;
  m.max_length_ = max_length;
  m.window_ = window;
  const auto V = static_cast<std::size_t>(vocab_size);
  m.core_size_ = V * m.linear_feature_count() + V;
  m.params_.assign(m.core_size_, 0.0);
  return m;
}

void Model::enable_temperature_embedding(int width, std::uint64_t seed, double init_scale) {
  if (width < 1) throw std::invalid_argument("embedding width must be >= 1");
  if (embedding_width_ > 0) throw std::logic_error("temperature embedding already enabled");
  embedding_width_ = width;
  const auto V = static_cast<std::size_t>(vocab_size_);
  const auto E = static_cast<std::size_t>(width);
  params_.resize(core_size_ + V * E + 2 * E, 0.0);
  numerics::Rng rng = numerics::Rng::derive(seed, "temperature-embedding");
  for (std::size_t i = 0; i < V * E; ++i) params_[core_size_ + i] = init_scale * rng.normal();
}

void Model::check_prefix(std::span<const Token> prefix, const std::optional<double>& t_cond) const {
  if (prefix.size() >= static_cast<std::size_t>(max_length_)) {
    throw std::out_of_range("prefix of length " + std::to_string(prefix.size()) +
                            " is too long for max_length " + std::to_string(max_length_));
  }
  for (Token t : prefix) {
    if (t < 0 || t >= vocab_size_) throw std::out_of_range("token " + std::to_string(t) + " out of vocab");
  }
  if (temperature_conditioned() && !t_cond) {
    throw std::invalid_argument("temperature-conditioned model requires t_cond");
  }
  if (!temperature_conditioned() && t_cond) {
    throw std::invalid_argument("model has no temperature embedding; t_cond must be empty");
  }
}

std::size_t Model::prefix_row(std::span<const Token> prefix) const {
  if (parameterization_ != Parameterization::tabular) {
    throw std::logic_error("prefix_row is only defined for tabular models");
  }
  const auto V = static_cast<std::size_t>(vocab_size_);
  std::size_t offset = 0;
  std::size_t level = 1;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    offset += level;
    level *= V;
  }
  std::size_t lex = 0;
  for (Token t : prefix) lex = lex * V + static_cast<std::size_t>(t);
  return offset + lex;
}

void Model::set_conditional_logits(std::span<const Token> prefix, std::span<const double> logits) {
  if (logits.size() != static_cast<std::size_t>(vocab_size_)) {
    throw std::invalid_argument("set_conditional_logits: expected one logit per token");
  }
  check_prefix(prefix, temperature_conditioned() ? std::optional<double>(1.0) : std::nullopt);
  const std::size_t base = prefix_row(prefix) * static_cast<std::size_t>(vocab_size_);
  std::copy(logits.begin(), logits.end(), params_.begin() + static_cast<std::ptrdiff_t>(base));
}

void Model::validate_sequence(std::span<const Token> x) const {
  if (x.size() > static_cast<std::size_t>(max_length_)) {
    throw std::out_of_range("sequence longer than max_length");
  }
  for (Token t : x) {
    if (t < 0 || t >= vocab_size_) throw std::out_of_range("token " + std::to_string(t) + " out of vocab");
  }
}

std::vector<double> Model::token_log_probs(std::span<const Token> x, std::optional<double> t_cond) const {
  validate_sequence(x);
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto lp = conditional_log_probs(x.subspan(0, i), t_cond);
    u[i] = lp[static_cast<std::size_t>(x[i])];
  }
  return u;
}

double Model::sequence_log_prob(std::span<const Token> x, std::optional<double> t_cond) const {
  double total = 0.0;
  for (double u : token_log_probs(x, t_cond)) total += u;
  return total;
}

std::vector<double> myopic_conditional(std::span<const double> log_probs, double myopic_temperature) {
  if (myopic_temperature < 0.0) throw std::invalid_argument("myopic temperature must be >= 0");
  if (myopic_temperature > 0.0) return numerics::rescale_log_probs(log_probs, myopic_temperature);
  const auto best = std::max_element(log_probs.begin(), log_probs.end());
  std::vector<double> out(log_probs.size(), kNegInf);
  out[static_cast<std::size_t>(best - log_probs.begin())] = 0.0;
  return out;
}

SampleBatch sample(const Model& model, std::size_t n, double myopic_temperature,
                   std::optional<double> t_cond, numerics::Rng& rng) {
  SampleBatch batch;
  batch.myopic_temperature = myopic_temperature;
  batch.long_horizon_temperature = t_cond;
  batch.sequences.reserve(n);
  batch.log_probs.reserve(n);
  const auto L = static_cast<std::size_t>(model.max_length());
  for (std::size_t s = 0; s < n; ++s) {
    Sequence x;
    x.reserve(L);
    double log_prob = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      const auto cond = myopic_conditional(model.conditional_log_probs(x, t_cond), myopic_temperature);
      const std::size_t k = myopic_temperature == 0.0
                                ? static_cast<std::size_t>(std::max_element(cond.begin(), cond.end()) - cond.begin())
                                : rng.categorical_log(cond);
      log_prob += cond[k];
      x.push_back(static_cast<Token>(k));
    }
    batch.sequences.push_back(std::move(x));
    batch.log_probs.push_back(log_prob);
  }
  return batch;
}

double kl_to_base_per_position(const Model& base, const Model& model, std::span<const Token> x,
                               std::optional<double> t_cond) {
  if (base.vocab_size() != model.vocab_size()) throw std::invalid_argument("vocab size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto prefix = x.subspan(0, i);
    const auto lp = base.conditional_log_probs(prefix);
    const auto lq = model.conditional_log_probs(prefix, t_cond);
    total += numerics::categorical_kl<double>(lp, lq);
  }
  return total;
}

std::string to_json(const Model& model) {
  nlohmann::json j;
  j["parameterization"] = to_string(model.parameterization());
  j["vocab_size"] = model.vocab_size();
  j["max_length"] = model.max_length();
  j["window"] = model.window();
  const auto& p = model.parameters();
  const auto core = static_cast<std::ptrdiff_t>(model.num_core_parameters());
  j["parameters"] = encode_values(std::span(p).subspan(0, static_cast<std::size_t>(core)));
  nlohmann::json emb;
  emb["active"] = model.temperature_conditioned();
  emb["width"] = model.embedding_width();
  emb["parameters"] = encode_values(std::span(p).subspan(static_cast<std::size_t>(core)));
  j["embedding"] = emb;
  j["rng_seed"] = model.seed();
  return j.dump(2);
}

Model model_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  const auto kind = parameterization_from_string(j.at("parameterization").get<std::string>());
  const int V = j.at("vocab_size").get<int>();
  const int L = j.at("max_length").get<int>();
  Model m = kind == Parameterization::tabular ? Model::tabular(V, L)
                                              : Model::linear(V, L, j.at("window").get<int>());
  auto core = decode_values(j.at("parameters"));
  if (core.size() != m.core_size_) {
    throw std::invalid_argument("checkpoint has " + std::to_string(core.size()) +
                                " parameters, expected " + std::to_string(m.core_size_));
  }
  const auto& emb = j.at("embedding");
  std::vector<double> emb_params;
  if (emb.at("active").get<bool>()) {
    m.enable_temperature_embedding(emb.at("width").get<int>());
    emb_params = decode_values(emb.at("parameters"));
    if (emb_params.size() != m.params_.size() - m.core_size_) {
      throw std::invalid_argument("checkpoint embedding parameter count mismatch");
    }
  }
  std::copy(core.begin(), core.end(), m.params_.begin());
  std::copy(emb_params.begin(), emb_params.end(), m.params_.begin() + static_cast<std::ptrdiff_t>(m.core_size_));
  m.seed_ = j.value("rng_seed", std::uint64_t{0});
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(model) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace lhts::ar
