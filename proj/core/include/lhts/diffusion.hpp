#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lhts/numerics/rng.hpp"
#include "lhts/trainer.hpp"

namespace lhts::diffusion {

using Point = std::vector<double>;

/// Forward-process variances. Step indices run 1..K; alphas_bar[0] = 1.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;       // [1..K], betas[0] unused (0)
  std::vector<double> alphas_bar;  // [0..K]

  static NoiseSchedule linear(int steps = 50, double beta_start = 1e-3, double beta_end = 0.2);

  double beta(int k) const { return betas.at(static_cast<std::size_t>(k)); }
  double alpha(int k) const { return 1.0 - beta(k); }
  double alpha_bar(int k) const { return alphas_bar.at(static_cast<std::size_t>(k)); }
  /// Variance of q(x_{k-1} | x_k, x_0).
  double posterior_variance(int k) const;

  bool operator==(const NoiseSchedule& other) const = default;
};

/// Noise predictor eps(x_k, k): one tanh hidden layer over the noised point
/// and sinusoidal features of the step index.
///
/// Parameter layout: W1 (H x (d + F)), b1 (H), W2 (d x H), b2 (d).
class DiffusionModel {
 public:
  DiffusionModel() = default;
  DiffusionModel(int dim, NoiseSchedule schedule, int hidden = 64, int step_features = 16, std::uint64_t seed = 0);

  int dim() const { return dim_; }
  int hidden() const { return hidden_; }
  int step_features() const { return step_features_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t num_parameters() const { return params_.size(); }

  /// Writes the predicted noise for x at step k (1..K) into `out`.
  void predict(std::span<const double> params, std::span<const double> x, int k, std::span<double> out) const;
  Point predict(std::span<const double> x, int k) const;

  /// Sinusoidal step features, length F.
  std::vector<double> step_embedding(int k) const;

  bool operator==(const DiffusionModel& other) const = default;

 private:
  friend DiffusionModel diffusion_from_json(std::string_view json);

  int dim_ = 0;
  int hidden_ = 0;
  int step_features_ = 0;
  std::uint64_t seed_ = 0;
  NoiseSchedule schedule_;
  std::vector<double> params_;
};

/// Data distribution of the toy experiments: a mixture of axis-aligned
/// Gaussians.
struct MixtureGroundTruth {
  std::vector<Point> means;
  std::vector<Point> variances;  // diagonal
  std::vector<double> weights;

  /// Two components at (+-separation/2, 0, ...) with isotropic sd.
  static MixtureGroundTruth two_component(int dim, double weight, double separation, double sd);
  static MixtureGroundTruth standard_normal(int dim);

  int dim() const { return static_cast<int>(means.front().size()); }
  void validate() const;
  double log_density(std::span<const double> x) const;
  /// Component with the largest responsibility.
  std::size_t component_of(std::span<const double> x) const;
  std::vector<Point> sample(std::size_t n, numerics::Rng& rng) const;
  /// Component proportions of the density proportional to p^{1/T}, ignoring
  /// overlap between components.
  std::vector<double> tempered_proportions(double temperature) const;
};

/// KL(N(mu1, var1 I) || N(mu2, var2 I)) in d = mu1.size() dimensions.
double gaussian_kl(std::span<const double> mu1, double var1, std::span<const double> mu2, double var2);

using NoisePredictor = std::function<void(std::span<const double> x, int k, std::span<double> eps)>;

/// DDPM variational lower bound on log p(x0), summed over dimensions:
/// reconstruction at k = 1, closed-form Gaussian KLs for k = 2..K (reverse
/// variance beta_k) and the prior term, averaged over n_mc noise draws.
double elbo(const NoiseSchedule& schedule, const NoisePredictor& predictor, std::span<const double> x0,
            numerics::Rng& rng, int n_mc);
double elbo(const DiffusionModel& model, std::span<const double> x0, numerics::Rng& rng, int n_mc);

/// ELBO of every point, each with its own stream derived from `seed`;
/// computed in parallel, identical for any worker count.
std::vector<double> elbo_all(const DiffusionModel& model, std::span<const Point> data, std::uint64_t seed,
                             int n_mc);

/// w_i = exp(min((1 - T)/T * elbo_i - b, c)) with b the mean exponent.
train::WeightBatch lhts_diffusion_weights(std::span<const double> elbos, double temperature,
                                          double clip = train::kNoClip);
train::WeightBatch lhts_diffusion_weights(const DiffusionModel& base, std::span<const Point> data,
                                          double temperature, double clip, std::uint64_t seed, int n_mc);

/// One term of the denoising objective: x0, step and the noise draw.
struct DenoiseTerm {
  std::size_t index = 0;
  int step = 1;
  Point noise;
  double weight = 1.0;
};

/// Mean over terms of weight * ||eps - eps_q(sqrt(ab) x0 + sqrt(1 - ab) eps, k)||^2.
double weighted_loss(const DiffusionModel& model, std::span<const double> params, std::span<const Point> data,
                     std::span<const DenoiseTerm> terms);
/// Same loss with its gradient (written to `grad`, resized as needed).
double weighted_loss_gradient(const DiffusionModel& model, std::span<const double> params,
                              std::span<const Point> data, std::span<const DenoiseTerm> terms,
                              std::vector<double>& grad);

/// Uniform data indices, uniform steps, standard normal noise. Term weights
/// are weights[i] / mean(weights), or 1 without weights.
std::vector<DenoiseTerm> draw_terms(const DiffusionModel& model, std::span<const Point> data,
                                    std::span<const double> weights, std::size_t batch_size, numerics::Rng& rng);

struct DdpmConfig {
  std::size_t steps = 4000;
  std::size_t batch_size = 128;
  double learning_rate = 2e-3;
  double grad_clip = 1.0;
  /// Cosine decay of the learning rate to zero over `steps`.
  bool cosine_decay = true;
  std::uint64_t seed = 0;
};

using LossCallback = std::function<void(std::size_t step, double loss)>;

/// Adam on the weighted denoising loss. Empty `weights` is standard DDPM
/// training; all-ones weights give the same trajectory bit for bit.
DiffusionModel finetune_weighted(DiffusionModel model, std::span<const Point> data, std::span<const double> weights,
                                 const DdpmConfig& config, const LossCallback& on_step = {});
DiffusionModel train_ddpm(DiffusionModel model, std::span<const Point> data, const DdpmConfig& config,
                          const LossCallback& on_step = {});

/// Reverse-process sampling with per-step noise sd scaled by t in (0, 1].
/// x_K ~ N(0, I); the final step returns the mean. Chains run in parallel
/// with streams derived from one draw of `rng`.
std::vector<Point> sample_ancestral(const DiffusionModel& model, std::size_t n, double pseudo_temperature,
                                    numerics::Rng& rng);

/// Fraction of points assigned to each mixture component.
std::vector<double> component_frequencies(const MixtureGroundTruth& truth, std::span<const Point> points);

std::string to_json(const DiffusionModel& model);
DiffusionModel diffusion_from_json(std::string_view json);
void save_diffusion(const DiffusionModel& model, const std::filesystem::path& path);
DiffusionModel load_diffusion(const std::filesystem::path& path);

void write_points_csv(std::span<const Point> points, const std::filesystem::path& path);
std::vector<Point> read_points_csv(const std::filesystem::path& path);

}  // namespace lhts::diffusion
