#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lhts/error.hpp"

namespace lhts::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw ConfigError(field + ": " + message);
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) fail(field, message);
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

double to_number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  const double x = v.get<double>();
  require(std::isfinite(x), field, "must be finite");
  return x;
}

std::uint64_t to_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(field, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

int to_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) fail(field, "expected an integer");
  const auto x = v.get<std::int64_t>();
  require(x >= -1'000'000'000 && x <= 1'000'000'000, field, "out of range");
  return static_cast<int>(x);
}

// Reads the keys of one JSON object and rejects any it does not know.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_null() && !j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  const json* find(std::string_view key) {
    known_.emplace(key);
    if (j_.is_null()) return nullptr;
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(std::string_view key) const { return join(path_, key); }

  void number(std::string_view key, double& out) {
    if (const auto* v = find(key)) out = to_number(*v, field(key));
  }
  void count(std::string_view key, std::size_t& out) {
    if (const auto* v = find(key)) out = static_cast<std::size_t>(to_count(*v, field(key)));
  }
  void seed(std::string_view key, std::uint64_t& out) {
    if (const auto* v = find(key)) out = to_count(*v, field(key));
  }
  void integer(std::string_view key, int& out) {
    if (const auto* v = find(key)) out = to_int(*v, field(key));
  }
  void boolean(std::string_view key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) fail(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void string(std::string_view key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) fail(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void path(std::string_view key, std::optional<std::filesystem::path>& out) {
    if (const auto* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_string() || v->get<std::string>().empty()) fail(field(key), "expected a non-empty path string");
      out = v->get<std::string>();
    }
  }
  void optional_number(std::string_view key, std::optional<double>& out) {
    if (const auto* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        out = to_number(*v, field(key));
      }
    }
  }
  void numbers(std::string_view key, std::vector<double>& out) {
    if (const auto* v = find(key)) {
      if (!v->is_array()) fail(field(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(to_number((*v)[i], field(key) + "[" + std::to_string(i) + "]"));
    }
  }
  void tokens(std::string_view key, std::vector<ar::Token>& out) {
    if (const auto* v = find(key)) {
      if (!v->is_array()) fail(field(key), "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(to_int((*v)[i], field(key) + "[" + std::to_string(i) + "]"));
    }
  }
  Section child(std::string_view key) {
    const auto* v = find(key);
    return Section(v ? *v : json(), field(key));
  }

  void finish() const {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!known_.contains(key)) fail(field(key), "unknown field");
    }
  }

 private:
  json j_;
  std::string path_;
  std::set<std::string, std::less<>> known_;
};

void check_temperatures(const std::vector<double>& ts, const std::string& field, bool allow_zero) {
  require(!ts.empty(), field, "needs at least one temperature");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const bool ok = allow_zero ? ts[i] >= 0.0 : ts[i] > 0.0;
    require(ok, field + "[" + std::to_string(i) + "]", allow_zero ? "must be >= 0" : "must be > 0");
  }
}

Teacher teacher_from_string(std::string_view name, const std::string& field) {
  if (name == "random_tabular") return Teacher::random_tabular;
  if (name == "shared_prefix") return Teacher::shared_prefix;
  if (name == "iid") return Teacher::iid;
  fail(field, "unknown teacher '" + std::string(name) + "' (random_tabular, shared_prefix, iid)");
}

template <class F>
auto wrap(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(field, e.what());
  }
}

}  // namespace

std::string_view to_string(Teacher teacher) {
  switch (teacher) {
    case Teacher::random_tabular: return "random_tabular";
    case Teacher::shared_prefix: return "shared_prefix";
    case Teacher::iid: return "iid";
  }
  return "?";
}

void apply_overrides(json& document, std::span<const std::string> overrides) {
  if (document.is_null()) document = json::object();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "': expected key=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &document;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override '" + o + "': empty key component");
      if (!node->is_object()) throw ConfigError(key.substr(0, start ? start - 1 : 0) + ": cannot override inside a non-object");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      if (node->is_null()) *node = json::object();
      start = dot + 1;
    }
  }
}

RunConfig parse_config(const json& document) {
  RunConfig c;
  Section root(document, "");
  root.string("task", c.task);
  if (!c.task.empty()) {
    require(std::find(kTasks.begin(), kTasks.end(), c.task) != kTasks.end(), "task", "unknown task '" + c.task + "'");
  }
  root.seed("seed", c.seed);
  std::optional<std::filesystem::path> out;
  root.path("out", out);
  if (out) c.out = *out;

  {
    auto s = root.child("model");
    std::string p = std::string(ar::to_string(c.model.parameterization));
    s.string("parameterization", p);
    c.model.parameterization = wrap(s.field("parameterization"), [&] { return ar::parameterization_from_string(p); });
    s.integer("vocab_size", c.model.vocab_size);
    s.integer("length", c.model.length);
    s.integer("window", c.model.window);
    s.integer("embedding_width", c.model.embedding_width);
    s.number("embedding_init_scale", c.model.embedding_init_scale);
    s.path("checkpoint", c.model.checkpoint);
    s.finish();
    require(c.model.vocab_size >= 2, "model.vocab_size", "must be >= 2");
    require(c.model.length >= 1, "model.length", "must be >= 1");
    require(c.model.window >= 0, "model.window", "must be >= 0");
    require(c.model.embedding_width >= 0, "model.embedding_width", "must be >= 0");
    require(c.model.embedding_init_scale >= 0.0, "model.embedding_init_scale", "must be >= 0");
  }
  {
    auto s = root.child("data");
    s.path("path", c.data.path);
    std::string teacher(to_string(c.data.teacher));
    s.string("teacher", teacher);
    c.data.teacher = teacher_from_string(teacher, s.field("teacher"));
    s.number("skew", c.data.skew);
    s.numbers("marginal", c.data.marginal);
    s.seed("teacher_seed", c.data.teacher_seed);
    s.count("size", c.data.size);
    s.finish();
    require(c.data.skew >= 0.0, "data.skew", "must be >= 0");
    double total = 0.0;
    for (std::size_t i = 0; i < c.data.marginal.size(); ++i) {
      require(c.data.marginal[i] > 0.0, "data.marginal[" + std::to_string(i) + "]", "must be > 0");
      total += c.data.marginal[i];
    }
    require(std::abs(total - 1.0) < 1e-9, "data.marginal", "must sum to 1");
  }
  {
    auto s = root.child("mle");
    s.count("steps", c.mle.steps);
    s.number("learning_rate", c.mle.learning_rate);
    s.count("batch_size", c.mle.batch_size);
    s.number("grad_clip", c.mle.grad_clip);
    s.finish();
    require(c.mle.learning_rate > 0.0, "mle.learning_rate", "must be > 0");
    require(c.mle.grad_clip >= 0.0, "mle.grad_clip", "must be >= 0");
  }
  {
    auto s = root.child("lhts");
    auto& l = c.lhts;
    s.numbers("temperatures", l.temperatures);
    s.count("horizon", l.horizon);
    std::optional<double> clip = l.clip;
    s.optional_number("clip", clip);
    l.clip = clip.value_or(train::kNoClip);
    s.number("kl_weight", l.kl_weight);
    s.number("learning_rate", l.learning_rate);
    s.number("grad_clip", l.grad_clip);
    s.count("steps", l.steps);
    s.count("batch_size", l.batch_size);
    std::string mode(train::to_string(l.data_mode));
    s.string("data_mode", mode);
    l.data_mode = wrap(s.field("data_mode"), [&] { return train::data_mode_from_string(mode); });
    std::string objective(train::to_string(l.objective));
    s.string("objective", objective);
    l.objective = wrap(s.field("objective"), [&] { return train::objective_from_string(objective); });
    s.boolean("normalize_loss", l.normalize_loss);
    s.count("eval_every", l.eval_every);
    s.finish();
    train::validate(l);
  }
  {
    auto s = root.child("sample");
    s.count("count", c.sample.count);
    s.numbers("myopic_temperatures", c.sample.myopic_temperatures);
    s.optional_number("t_cond", c.sample.t_cond);
    s.path("checkpoint", c.sample.checkpoint);
    s.finish();
    require(c.sample.count >= 1, "sample.count", "must be >= 1");
    check_temperatures(c.sample.myopic_temperatures, "sample.myopic_temperatures", true);
  }
  {
    auto s = root.child("sweep");
    s.numbers("long_horizon_temperatures", c.sweep.long_horizon_temperatures);
    s.numbers("myopic_temperatures", c.sweep.myopic_temperatures);
    s.count("samples", c.sweep.samples);
    s.finish();
    check_temperatures(c.sweep.long_horizon_temperatures, "sweep.long_horizon_temperatures", false);
    check_temperatures(c.sweep.myopic_temperatures, "sweep.myopic_temperatures", true);
    require(c.sweep.samples >= 1, "sweep.samples", "must be >= 1");
  }
  {
    auto s = root.child("demo");
    s.tokens("relabel", c.demo.relabel);
    s.number("myopic_temperature", c.demo.myopic_temperature);
    s.number("long_horizon_temperature", c.demo.long_horizon_temperature);
    s.number("train_temperature", c.demo.train_temperature);
    s.finish();
    auto sorted = c.demo.relabel;
    std::sort(sorted.begin(), sorted.end());
    require(sorted == std::vector<ar::Token>{0, 1, 2, 3}, "demo.relabel", "must be a permutation of 0 1 2 3");
    require(c.demo.myopic_temperature >= 0.0, "demo.myopic_temperature", "must be >= 0");
    require(c.demo.long_horizon_temperature > 0.0, "demo.long_horizon_temperature", "must be > 0");
    require(c.demo.train_temperature >= 0.0, "demo.train_temperature", "must be >= 0");
  }
  {
    auto s = root.child("diffusion");
    auto& d = c.diffusion;
    s.integer("dim", d.dim);
    s.number("weight", d.weight);
    s.number("separation", d.separation);
    s.number("sd", d.sd);
    s.count("data_size", d.data_size);
    s.integer("diffusion_steps", d.diffusion_steps);
    s.number("beta_start", d.beta_start);
    s.number("beta_end", d.beta_end);
    s.integer("hidden", d.hidden);
    s.integer("step_features", d.step_features);
    s.count("base_steps", d.base_steps);
    s.count("finetune_steps", d.finetune_steps);
    s.count("batch_size", d.batch_size);
    s.number("learning_rate", d.learning_rate);
    s.number("grad_clip", d.grad_clip);
    s.number("temperature", d.temperature);
    std::optional<double> clip = d.clip;
    s.optional_number("clip", clip);
    d.clip = clip.value_or(train::kNoClip);
    s.integer("elbo_samples", d.elbo_samples);
    s.count("sample_count", d.sample_count);
    s.numbers("pseudo_temperatures", d.pseudo_temperatures);
    s.finish();
    require(d.dim >= 1, "diffusion.dim", "must be >= 1");
    require(d.weight > 0.0 && d.weight < 1.0, "diffusion.weight", "must lie in (0, 1)");
    require(d.separation > 0.0, "diffusion.separation", "must be > 0");
    require(d.sd > 0.0, "diffusion.sd", "must be > 0");
    require(d.data_size >= 1, "diffusion.data_size", "must be >= 1");
    require(d.diffusion_steps >= 1, "diffusion.diffusion_steps", "must be >= 1");
    require(d.beta_start > 0.0 && d.beta_start <= d.beta_end && d.beta_end < 1.0, "diffusion.beta_start",
            "need 0 < beta_start <= beta_end < 1");
    require(d.hidden >= 1, "diffusion.hidden", "must be >= 1");
    require(d.step_features >= 0 && d.step_features % 2 == 0, "diffusion.step_features", "must be even and >= 0");
    require(d.batch_size >= 1, "diffusion.batch_size", "must be >= 1");
    require(d.learning_rate > 0.0, "diffusion.learning_rate", "must be > 0");
    require(d.grad_clip >= 0.0, "diffusion.grad_clip", "must be >= 0");
    require(d.temperature > 0.0, "diffusion.temperature", "must be > 0");
    require(d.clip > 0.0, "diffusion.clip", "must be > 0");
    require(d.elbo_samples >= 1, "diffusion.elbo_samples", "must be >= 1");
    require(d.sample_count >= 1, "diffusion.sample_count", "must be >= 1");
    check_temperatures(d.pseudo_temperatures, "diffusion.pseudo_temperatures", false);
    for (std::size_t i = 0; i < d.pseudo_temperatures.size(); ++i) {
      require(d.pseudo_temperatures[i] <= 1.0, "diffusion.pseudo_temperatures[" + std::to_string(i) + "]", "must be <= 1");
    }
  }
  root.finish();

  c.mle.seed = c.seed;
  c.lhts.seed = c.seed;
  return c;
}

json to_json(const RunConfig& c) {
  auto opt_path = [](const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); };
  auto opt_number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["task"] = c.task;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["model"] = {{"parameterization", ar::to_string(c.model.parameterization)},
                {"vocab_size", c.model.vocab_size},
                {"length", c.model.length},
                {"window", c.model.window},
                {"embedding_width", c.model.embedding_width},
                {"embedding_init_scale", c.model.embedding_init_scale},
                {"checkpoint", opt_path(c.model.checkpoint)}};
  j["data"] = {{"path", opt_path(c.data.path)},
               {"teacher", to_string(c.data.teacher)},
               {"skew", c.data.skew},
               {"marginal", c.data.marginal},
               {"teacher_seed", c.data.teacher_seed},
               {"size", c.data.size}};
  j["mle"] = {{"steps", c.mle.steps},
              {"learning_rate", c.mle.learning_rate},
              {"batch_size", c.mle.batch_size},
              {"grad_clip", c.mle.grad_clip}};
  const auto& l = c.lhts;
  j["lhts"] = {{"temperatures", l.temperatures},
               {"horizon", l.horizon},
               {"clip", opt_number(l.clip)},
               {"kl_weight", l.kl_weight},
               {"learning_rate", l.learning_rate},
               {"grad_clip", l.grad_clip},
               {"steps", l.steps},
               {"batch_size", l.batch_size},
               {"data_mode", train::to_string(l.data_mode)},
               {"objective", train::to_string(l.objective)},
               {"normalize_loss", l.normalize_loss},
               {"eval_every", l.eval_every}};
  j["sample"] = {{"count", c.sample.count},
                 {"myopic_temperatures", c.sample.myopic_temperatures},
                 {"t_cond", c.sample.t_cond ? json(*c.sample.t_cond) : json(nullptr)},
                 {"checkpoint", opt_path(c.sample.checkpoint)}};
  j["sweep"] = {{"long_horizon_temperatures", c.sweep.long_horizon_temperatures},
                {"myopic_temperatures", c.sweep.myopic_temperatures},
                {"samples", c.sweep.samples}};
  j["demo"] = {{"relabel", c.demo.relabel},
               {"myopic_temperature", c.demo.myopic_temperature},
               {"long_horizon_temperature", c.demo.long_horizon_temperature},
               {"train_temperature", c.demo.train_temperature}};
  const auto& d = c.diffusion;
  j["diffusion"] = {{"dim", d.dim},
                    {"weight", d.weight},
                    {"separation", d.separation},
                    {"sd", d.sd},
                    {"data_size", d.data_size},
                    {"diffusion_steps", d.diffusion_steps},
                    {"beta_start", d.beta_start},
                    {"beta_end", d.beta_end},
                    {"hidden", d.hidden},
                    {"step_features", d.step_features},
                    {"base_steps", d.base_steps},
                    {"finetune_steps", d.finetune_steps},
                    {"batch_size", d.batch_size},
                    {"learning_rate", d.learning_rate},
                    {"grad_clip", d.grad_clip},
                    {"temperature", d.temperature},
                    {"clip", opt_number(d.clip)},
                    {"elbo_samples", d.elbo_samples},
                    {"sample_count", d.sample_count},
                    {"pseudo_temperatures", d.pseudo_temperatures}};
  return j;
}

}  // namespace lhts::cli
