#include "lhts/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lhts/error.hpp"
#include "lhts/numerics/log_space.hpp"
#include "lhts/numerics/optimizer.hpp"
#include "lhts/numerics/parallel.hpp"

namespace lhts::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("noise schedule needs at least one step");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end) {
    throw std::invalid_argument("noise schedule requires 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.betas.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  s.alphas_bar.assign(static_cast<std::size_t>(steps) + 1, 1.0);
  for (int k = 1; k <= steps; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k - 1) / (steps - 1);
    s.betas[static_cast<std::size_t>(k)] = beta_start + frac * (beta_end - beta_start);
    s.alphas_bar[static_cast<std::size_t>(k)] =
        s.alphas_bar[static_cast<std::size_t>(k) - 1] * (1.0 - s.betas[static_cast<std::size_t>(k)]);
  }
  return s;
}

double NoiseSchedule::posterior_variance(int k) const {
  return (1.0 - alpha_bar(k - 1)) / (1.0 - alpha_bar(k)) * beta(k);
}

DiffusionModel::DiffusionModel(int dim, NoiseSchedule schedule, int hidden, int step_features, std::uint64_t seed)
    : dim_(dim), hidden_(hidden), step_features_(step_features), seed_(seed), schedule_(std::move(schedule)) {
  if (dim < 1 || hidden < 1 || step_features < 0 || step_features % 2 != 0) {
    throw std::invalid_argument("diffusion model needs dim >= 1, hidden >= 1 and an even feature count");
  }
  const auto d = static_cast<std::size_t>(dim);
  const auto H = static_cast<std::size_t>(hidden);
  const std::size_t in = d + static_cast<std::size_t>(step_features);
  params_.assign(H * in + H + d * H + d, 0.0);
  numerics::Rng rng = numerics::Rng::derive(seed, "denoiser-init");
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
  for (std::size_t i = 0; i < H * in; ++i) params_[i] = s1 * rng.normal();
  const std::size_t w2 = H * in + H;
  for (std::size_t i = 0; i < d * H; ++i) params_[w2 + i] = s2 * rng.normal();
}

std::vector<double> DiffusionModel::step_embedding(int k) const {
  const auto half = static_cast<std::size_t>(step_features_ / 2);
  std::vector<double> f(static_cast<std::size_t>(step_features_));
  for (std::size_t j = 0; j < half; ++j) {
    const double freq = std::pow(1000.0, -static_cast<double>(j) / static_cast<double>(half));
    f[j] = std::sin(k * freq);
    f[half + j] = std::cos(k * freq);
  }
  return f;
}

namespace {

struct Activations {
  std::vector<double> input;
  std::vector<double> hidden;
};

void forward(const DiffusionModel& m, std::span<const double> p, std::span<const double> x, int k,
             std::span<double> out, Activations& act) {
  const auto d = static_cast<std::size_t>(m.dim());
  const auto H = static_cast<std::size_t>(m.hidden());
  const auto emb = m.step_embedding(k);
  act.input.assign(x.begin(), x.end());
  act.input.insert(act.input.end(), emb.begin(), emb.end());
  const std::size_t in = act.input.size();
  act.hidden.resize(H);
  const std::size_t b1 = H * in;
  for (std::size_t h = 0; h < H; ++h) {
    double a = p[b1 + h];
    for (std::size_t i = 0; i < in; ++i) a += p[h * in + i] * act.input[i];
    act.hidden[h] = std::tanh(a);
  }
  const std::size_t w2 = b1 + H;
  const std::size_t b2 = w2 + d * H;
  for (std::size_t o = 0; o < d; ++o) {
    double a = p[b2 + o];
    for (std::size_t h = 0; h < H; ++h) a += p[w2 + o * H + h] * act.hidden[h];
    out[o] = a;
  }
}

void check_step(const NoiseSchedule& s, int k) {
  if (k < 1 || k > s.steps) throw std::out_of_range("diffusion step " + std::to_string(k) + " outside 1.." + std::to_string(s.steps));
}

}  // namespace

void DiffusionModel::predict(std::span<const double> params, std::span<const double> x, int k,
                             std::span<double> out) const {
  check_step(schedule_, k);
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("point dimension mismatch");
  Activations act;
  forward(*this, params, x, k, out, act);
}

Point DiffusionModel::predict(std::span<const double> x, int k) const {
  Point out(static_cast<std::size_t>(dim_));
  predict(params_, x, k, out);
  return out;
}

MixtureGroundTruth MixtureGroundTruth::two_component(int dim, double weight, double separation, double sd) {
  if (dim < 1) throw std::invalid_argument("mixture dimension must be >= 1");
  MixtureGroundTruth m;
  Point a(static_cast<std::size_t>(dim), 0.0);
  Point b = a;
  a[0] = separation / 2;
  b[0] = -separation / 2;
  m.means = {a, b};
  m.variances = {Point(static_cast<std::size_t>(dim), sd * sd), Point(static_cast<std::size_t>(dim), sd * sd)};
  m.weights = {weight, 1.0 - weight};
  m.validate();
  return m;
}

MixtureGroundTruth MixtureGroundTruth::standard_normal(int dim) {
  MixtureGroundTruth m;
  m.means = {Point(static_cast<std::size_t>(dim), 0.0)};
  m.variances = {Point(static_cast<std::size_t>(dim), 1.0)};
  m.weights = {1.0};
  m.validate();
  return m;
}

void MixtureGroundTruth::validate() const {
  if (means.empty() || means.size() != variances.size() || means.size() != weights.size()) {
    throw std::invalid_argument("mixture needs matching means, variances and weights");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (means[j].size() != means.front().size() || variances[j].size() != means.front().size()) {
      throw std::invalid_argument("mixture components disagree on dimension");
    }
    for (double v : variances[j]) {
      if (!(v > 0.0)) throw std::invalid_argument("mixture variances must be > 0");
    }
    if (!(weights[j] > 0.0)) throw std::invalid_argument("mixture weights must be > 0");
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
}

namespace {

double component_log_density(const MixtureGroundTruth& m, std::size_t j, std::span<const double> x) {
  double lp = std::log(m.weights[j]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = m.variances[j][i];
    const double r = x[i] - m.means[j][i];
    lp -= 0.5 * (std::log(2.0 * std::numbers::pi * v) + r * r / v);
  }
  return lp;
}

}  // namespace

double MixtureGroundTruth::log_density(std::span<const double> x) const {
  std::vector<double> terms(means.size());
  for (std::size_t j = 0; j < means.size(); ++j) terms[j] = component_log_density(*this, j, x);
  return numerics::log_sum_exp(terms);
}

std::size_t MixtureGroundTruth::component_of(std::span<const double> x) const {
  std::size_t best = 0;
  double best_lp = component_log_density(*this, 0, x);
  for (std::size_t j = 1; j < means.size(); ++j) {
    const double lp = component_log_density(*this, j, x);
    if (lp > best_lp) {
      best = j;
      best_lp = lp;
    }
  }
  return best;
}

std::vector<Point> MixtureGroundTruth::sample(std::size_t n, numerics::Rng& rng) const {
  std::vector<double> log_w(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) log_w[j] = std::log(weights[j]);
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t j = rng.categorical_log(log_w);
    Point x(means[j].size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(means[j][i], std::sqrt(variances[j][i]));
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<double> MixtureGroundTruth::tempered_proportions(double temperature) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  // ∫ N(x; mu, S)^a dx = (2 pi)^{d(1-a)/2} |S|^{(1-a)/2} a^{-d/2}; only |S| varies by component.
  const double a = 1.0 / temperature;
  std::vector<double> log_mass(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    double log_det = 0.0;
    for (double v : variances[j]) log_det += std::log(v);
    log_mass[j] = a * std::log(weights[j]) + 0.5 * (1.0 - a) * log_det;
  }
  const double lse = numerics::log_sum_exp(log_mass);
  for (double& v : log_mass) v = std::exp(v - lse);
  return log_mass;
}

double gaussian_kl(std::span<const double> mu1, double var1, std::span<const double> mu2, double var2) {
  if (mu1.size() != mu2.size()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
  if (!(var1 > 0.0) || !(var2 > 0.0)) throw std::invalid_argument("gaussian_kl: variances must be > 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < mu1.size(); ++i) sq += (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]);
  const auto d = static_cast<double>(mu1.size());
  return 0.5 * (d * (var1 / var2 - 1.0 + std::log(var2 / var1)) + sq / var2);
}

double elbo(const NoiseSchedule& s, const NoisePredictor& predictor, std::span<const double> x0,
            numerics::Rng& rng, int n_mc) {
  if (n_mc < 1) throw std::invalid_argument("elbo: n_mc must be >= 1");
  const std::size_t d = x0.size();
  Point xk(d), eps(d), mean(d), post(d);
  auto model_mean = [&](int k) {
    predictor(xk, k, eps);
    const double c = s.beta(k) / std::sqrt(1.0 - s.alpha_bar(k));
    const double r = 1.0 / std::sqrt(s.alpha(k));
    for (std::size_t i = 0; i < d; ++i) mean[i] = r * (xk[i] - c * eps[i]);
  };
  auto noise = [&](int k) {
    const double a = std::sqrt(s.alpha_bar(k));
    const double b = std::sqrt(1.0 - s.alpha_bar(k));
    for (std::size_t i = 0; i < d; ++i) xk[i] = a * x0[i] + b * rng.normal();
  };
  double total = 0.0;
  for (int m = 0; m < n_mc; ++m) {
    double bound = 0.0;
    noise(1);
    model_mean(1);
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) sq += (x0[i] - mean[i]) * (x0[i] - mean[i]);
    bound += -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * s.beta(1)) - sq / (2.0 * s.beta(1));
    for (int k = 2; k <= s.steps; ++k) {
      noise(k);
      model_mean(k);
      const double ab_prev = s.alpha_bar(k - 1);
      const double c0 = std::sqrt(ab_prev) * s.beta(k) / (1.0 - s.alpha_bar(k));
      const double ck = std::sqrt(s.alpha(k)) * (1.0 - ab_prev) / (1.0 - s.alpha_bar(k));
      for (std::size_t i = 0; i < d; ++i) post[i] = c0 * x0[i] + ck * xk[i];
      bound -= gaussian_kl(post, s.posterior_variance(k), mean, s.beta(k));
    }
    const double aK = std::sqrt(s.alpha_bar(s.steps));
    for (std::size_t i = 0; i < d; ++i) post[i] = aK * x0[i];
    const Point zero(d, 0.0);
    bound -= gaussian_kl(post, 1.0 - s.alpha_bar(s.steps), zero, 1.0);
    total += bound;
  }
  return total / n_mc;
}

double elbo(const DiffusionModel& model, std::span<const double> x0, numerics::Rng& rng, int n_mc) {
  return elbo(
      model.schedule(), [&](std::span<const double> x, int k, std::span<double> out) { model.predict(model.parameters(), x, k, out); },
      x0, rng, n_mc);
}

std::vector<double> elbo_all(const DiffusionModel& model, std::span<const Point> data, std::uint64_t seed, int n_mc) {
  std::vector<double> out(data.size());
  numerics::parallel_for(data.size(), [&](std::size_t i) {
    numerics::Rng rng = numerics::Rng::derive(seed, "elbo", i);
    out[i] = elbo(model, data[i], rng, n_mc);
  });
  return out;
}

train::WeightBatch lhts_diffusion_weights(std::span<const double> elbos, double temperature, double clip) {
  if (elbos.empty()) throw std::invalid_argument("lhts_diffusion_weights: no ELBOs");
  double mean = 0.0;
  for (double e : elbos) mean += e;
  mean /= static_cast<double>(elbos.size());
  return train::joint_weights(elbos, temperature, train::temperature_factor(temperature) * mean, clip);
}

train::WeightBatch lhts_diffusion_weights(const DiffusionModel& base, std::span<const Point> data, double temperature,
                                          double clip, std::uint64_t seed, int n_mc) {
  return lhts_diffusion_weights(elbo_all(base, data, seed, n_mc), temperature, clip);
}

namespace {

void check_terms(const DiffusionModel& model, std::span<const Point> data, std::span<const DenoiseTerm> terms) {
  if (terms.empty()) throw std::invalid_argument("denoising loss needs at least one term");
  for (const auto& t : terms) {
    if (t.index >= data.size()) throw std::out_of_range("denoising term refers to a missing data point");
    check_step(model.schedule(), t.step);
    if (t.noise.size() != static_cast<std::size_t>(model.dim()) || data[t.index].size() != t.noise.size()) {
      throw std::invalid_argument("denoising term dimension mismatch");
    }
  }
}

// Loss of one term; accumulates scale * dloss/dparams into grad when given.
double term_loss(const DiffusionModel& m, std::span<const double> p, std::span<const double> x0,
                 const DenoiseTerm& t, double scale, Activations& act, std::vector<double>* grad) {
  const auto d = static_cast<std::size_t>(m.dim());
  const auto H = static_cast<std::size_t>(m.hidden());
  const double ab = m.schedule().alpha_bar(t.step);
  Point xk(d), out(d);
  for (std::size_t i = 0; i < d; ++i) xk[i] = std::sqrt(ab) * x0[i] + std::sqrt(1.0 - ab) * t.noise[i];
  forward(m, p, xk, t.step, out, act);
  double loss = 0.0;
  Point dout(d);
  for (std::size_t o = 0; o < d; ++o) {
    const double r = out[o] - t.noise[o];
    loss += r * r;
    dout[o] = 2.0 * r * scale;
  }
  if (!grad) return loss;
  auto& g = *grad;
  const std::size_t in = act.input.size();
  const std::size_t b1 = H * in;
  const std::size_t w2 = b1 + H;
  const std::size_t b2 = w2 + d * H;
  for (std::size_t h = 0; h < H; ++h) {
    double dh = 0.0;
    for (std::size_t o = 0; o < d; ++o) {
      g[w2 + o * H + h] += dout[o] * act.hidden[h];
      dh += p[w2 + o * H + h] * dout[o];
    }
    const double da = dh * (1.0 - act.hidden[h] * act.hidden[h]);
    g[b1 + h] += da;
    for (std::size_t i = 0; i < in; ++i) g[h * in + i] += da * act.input[i];
  }
  for (std::size_t o = 0; o < d; ++o) g[b2 + o] += dout[o];
  return loss;
}

}  // namespace

double weighted_loss(const DiffusionModel& model, std::span<const double> params, std::span<const Point> data,
                     std::span<const DenoiseTerm> terms) {
  check_terms(model, data, terms);
  Activations act;
  double total = 0.0;
  for (const auto& t : terms) total += t.weight * term_loss(model, params, data[t.index], t, 0.0, act, nullptr);
  return total / static_cast<double>(terms.size());
}

double weighted_loss_gradient(const DiffusionModel& model, std::span<const double> params,
                              std::span<const Point> data, std::span<const DenoiseTerm> terms,
                              std::vector<double>& grad) {
  check_terms(model, data, terms);
  grad.assign(params.size(), 0.0);
  Activations act;
  const double n = static_cast<double>(terms.size());
  double total = 0.0;
  for (const auto& t : terms) total += t.weight * term_loss(model, params, data[t.index], t, t.weight / n, act, &grad);
  return total / n;
}

std::vector<DenoiseTerm> draw_terms(const DiffusionModel& model, std::span<const Point> data,
                                    std::span<const double> weights, std::size_t batch_size, numerics::Rng& rng) {
  if (data.empty()) throw std::invalid_argument("no training points");
  if (!weights.empty() && weights.size() != data.size()) throw std::invalid_argument("one weight per point required");
  double mean_weight = 1.0;
  if (!weights.empty()) {
    mean_weight = 0.0;
    for (double w : weights) mean_weight += w;
    mean_weight /= static_cast<double>(weights.size());
    if (!(mean_weight > 0.0) || !std::isfinite(mean_weight)) throw NumericalError("diffusion weights have no usable mass");
  }
  std::vector<DenoiseTerm> terms(batch_size);
  for (auto& t : terms) {
    t.index = rng.index(data.size());
    t.step = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(model.schedule().steps)));
    t.noise.resize(static_cast<std::size_t>(model.dim()));
    for (double& e : t.noise) e = rng.normal();
    t.weight = weights.empty() ? 1.0 : weights[t.index] / mean_weight;
  }
  return terms;
}

DiffusionModel finetune_weighted(DiffusionModel model, std::span<const Point> data, std::span<const double> weights,
                                 const DdpmConfig& config, const LossCallback& on_step) {
  if (config.batch_size < 1) throw ConfigError("diffusion.batch_size: must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("diffusion.learning_rate: must be > 0");
  numerics::Adam adam(model.num_parameters(), config.learning_rate);
  std::vector<double> grad;
  for (std::size_t step = 0; step < config.steps; ++step) {
    numerics::Rng rng = numerics::Rng::derive(config.seed, "ddpm-batch", step);
    const auto terms = draw_terms(model, data, weights, config.batch_size, rng);
    const double loss = weighted_loss_gradient(model, model.parameters(), data, terms, grad);
    if (!std::isfinite(loss)) throw NumericalError("non-finite denoising loss at step " + std::to_string(step));
    numerics::clip_gradient_norm(grad, config.grad_clip);
    if (config.cosine_decay) {
      const double progress = static_cast<double>(step) / static_cast<double>(config.steps);
      adam.set_learning_rate(config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    }
    adam.step(model.parameters(), grad);
    if (on_step) on_step(step, loss);
  }
  return model;
}

DiffusionModel train_ddpm(DiffusionModel model, std::span<const Point> data, const DdpmConfig& config,
                          const LossCallback& on_step) {
  return finetune_weighted(std::move(model), data, {}, config, on_step);
}

std::vector<Point> sample_ancestral(const DiffusionModel& model, std::size_t n, double t, numerics::Rng& rng) {
  if (!(t > 0.0) || t > 1.0) throw std::invalid_argument("pseudo-temperature must be in (0, 1]");
  const std::uint64_t base = rng.engine()();
  const auto d = static_cast<std::size_t>(model.dim());
  const auto& s = model.schedule();
  std::vector<Point> out(n);
  numerics::parallel_for(n, [&](std::size_t c) {
    numerics::Rng chain = numerics::Rng::derive(base, "chain", c);
    Point x(d), eps(d);
    for (double& v : x) v = chain.normal();
    for (int k = s.steps; k >= 1; --k) {
      model.predict(model.parameters(), x, k, eps);
      const double coef = s.beta(k) / std::sqrt(1.0 - s.alpha_bar(k));
      const double r = 1.0 / std::sqrt(s.alpha(k));
      const double sd = k > 1 ? t * std::sqrt(s.beta(k)) : 0.0;
      for (std::size_t i = 0; i < d; ++i) x[i] = r * (x[i] - coef * eps[i]) + (k > 1 ? sd * chain.normal() : 0.0);
    }
    out[c] = std::move(x);
  });
  return out;
}

std::vector<double> component_frequencies(const MixtureGroundTruth& truth, std::span<const Point> points) {
  std::vector<double> freq(truth.weights.size(), 0.0);
  if (points.empty()) return freq;
  for (const auto& x : points) freq[truth.component_of(x)] += 1.0;
  for (double& f : freq) f /= static_cast<double>(points.size());
  return freq;
}

std::string to_json(const DiffusionModel& model) {
  nlohmann::json j;
  j["dim"] = model.dim();
  j["hidden"] = model.hidden();
  j["step_features"] = model.step_features();
  j["rng_seed"] = model.seed();
  j["schedule"] = {{"steps", model.schedule().steps}, {"betas", model.schedule().betas}};
  j["parameters"] = model.parameters();
  return j.dump(2);
}

DiffusionModel diffusion_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  NoiseSchedule s;
  s.steps = j.at("schedule").at("steps").get<int>();
  s.betas = j.at("schedule").at("betas").get<std::vector<double>>();
  if (s.betas.size() != static_cast<std::size_t>(s.steps) + 1) throw std::invalid_argument("checkpoint schedule length mismatch");
  s.alphas_bar.assign(s.betas.size(), 1.0);
  for (std::size_t k = 1; k < s.betas.size(); ++k) s.alphas_bar[k] = s.alphas_bar[k - 1] * (1.0 - s.betas[k]);
  DiffusionModel m(j.at("dim").get<int>(), s, j.at("hidden").get<int>(), j.at("step_features").get<int>(),
                   j.value("rng_seed", std::uint64_t{0}));
  auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != m.params_.size()) throw std::invalid_argument("checkpoint parameter count mismatch");
  m.params_ = std::move(params);
  return m;
}

void save_diffusion(const DiffusionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(model) << '\n';
}

DiffusionModel load_diffusion(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return diffusion_from_json(buffer.str());
}

void write_points_csv(std::span<const Point> points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t d = points.empty() ? 0 : points.front().size();
  for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << 'x' << i;
  out << '\n' << std::setprecision(17);
  for (const auto& p : points) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? "," : "") << p[i];
    out << '\n';
  }
}

std::vector<Point> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Point> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.find_first_of("0123456789") != 0 && line[0] != '-' && line[0] != '.') continue;
    Point p;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        p.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (!points.empty() && p.size() != points.front().size()) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": inconsistent dimension");
    }
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace lhts::diffusion
