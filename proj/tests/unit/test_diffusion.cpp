#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>

#include "lhts/diffusion.hpp"
#include "lhts/numerics/finite_difference.hpp"

using namespace lhts;
using namespace lhts::diffusion;

namespace {

// Exact noise predictor for N(0, I) data: E[eps | x_k] = sqrt(1 - ab_k) x_k.
NoisePredictor standard_normal_predictor(const NoiseSchedule& s) {
  return [&s](std::span<const double> x, int k, std::span<double> eps) {
    const double c = std::sqrt(1.0 - s.alpha_bar(k));
    for (std::size_t i = 0; i < x.size(); ++i) eps[i] = c * x[i];
  };
}

}  // namespace

TEST_CASE("noise schedule") {
  const auto s = NoiseSchedule::linear(50);
  CHECK(s.alpha_bar(0) == 1.0);
  for (int k = 1; k <= 50; ++k) {
    CHECK(s.beta(k) > 0.0);
    CHECK(s.beta(k) < 1.0);
    CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
  }
  CHECK(s.alpha_bar(50) < 0.01);
  CHECK_THROWS(NoiseSchedule::linear(0));
  CHECK_THROWS(NoiseSchedule::linear(10, 0.5, 0.1));
}

TEST_CASE("gaussian kl") {
  const std::vector<double> zero{0.0};
  const std::vector<double> one{1.0};
  CHECK(gaussian_kl(zero, 1.0, zero, 1.0) == 0.0);
  CHECK(gaussian_kl(one, 1.0, zero, 1.0) == doctest::Approx(0.5));
  // 0.5 (s1/s2 - 1 + ln(s2/s1)) per dimension
  CHECK(gaussian_kl(zero, 0.5, zero, 2.0) == doctest::Approx(0.5 * (0.25 - 1.0 + std::log(4.0))));
}

TEST_CASE("elbo with the exact predictor equals the Gaussian log-density") {
  const auto s = NoiseSchedule::linear(50);
  const auto predictor = standard_normal_predictor(s);
  const auto truth = MixtureGroundTruth::standard_normal(2);
  numerics::Rng rng(1);
  const auto points = truth.sample(200, rng);
  double gap = 0.0;
  for (const auto& x : points) gap += elbo(s, predictor, x, rng, 32) - truth.log_density(x);
  // One draw has sd about 1.6 nats, so the mean over 6400 draws has a
  // standard error near 0.02.
  CHECK(std::abs(gap / 200.0) < 0.08);
}

TEST_CASE("mixture ground truth") {
  const auto m = MixtureGroundTruth::two_component(2, 0.7, 3.0, 0.3);
  CHECK(m.component_of(std::vector{1.5, 0.0}) == 0);
  CHECK(m.component_of(std::vector{-1.5, 0.2}) == 1);
  const auto tempered = m.tempered_proportions(0.5);
  CHECK(tempered[0] == doctest::Approx(0.49 / 0.58).epsilon(1e-12));
  CHECK(m.tempered_proportions(1.0)[0] == doctest::Approx(0.7));
  numerics::Rng rng(2);
  const auto pts = m.sample(20000, rng);
  CHECK(component_frequencies(m, pts)[0] == doctest::Approx(0.7).epsilon(0.03));
  CHECK(MixtureGroundTruth::standard_normal(2).log_density(std::vector{0.0, 0.0}) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)));
  MixtureGroundTruth bad = m;
  bad.weights = {0.5, 0.6};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("diffusion weights") {
  const auto w = lhts_diffusion_weights(std::vector{-2.0, -4.0}, 0.5);
  CHECK(w.weights[0][0] == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(w.weights[1][0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  for (const auto& row : lhts_diffusion_weights(std::vector{-2.0, -4.0, 1.0}, 1.0).weights) CHECK(row[0] == 1.0);
  for (const auto& row : lhts_diffusion_weights(std::vector{-3.0, -3.0}, 0.2).weights) CHECK(row[0] == 1.0);
}

TEST_CASE("denoising loss gradient matches finite differences") {
  const DiffusionModel model(2, NoiseSchedule::linear(20), 8, 4, 3);
  numerics::Rng rng(4);
  const auto truth = MixtureGroundTruth::two_component(2, 0.7, 3.0, 0.3);
  const auto data = truth.sample(16, rng);
  std::vector<double> weights(data.size());
  for (double& w : weights) w = 0.5 + rng.uniform();
  const auto terms = draw_terms(model, data, weights, 12, rng);
  std::vector<double> grad;
  weighted_loss_gradient(model, model.parameters(), data, terms, grad);
  auto f = [&](std::span<const double> p) { return weighted_loss(model, p, data, terms); };
  CHECK(numerics::check_gradient(f, grad, model.parameters()).passed(1e-6));
}

TEST_CASE("weighted training") {
  const DiffusionModel init(2, NoiseSchedule::linear(20), 16, 4, 5);
  numerics::Rng rng(6);
  const auto data = MixtureGroundTruth::two_component(2, 0.7, 3.0, 0.3).sample(64, rng);
  DdpmConfig c;
  c.steps = 30;
  c.batch_size = 16;

  SUBCASE("unit weights reproduce plain training") {
    const auto plain = train_ddpm(init, data, c);
    const auto ones = finetune_weighted(init, data, std::vector<double>(data.size(), 1.0), c);
    CHECK(plain.parameters() == ones.parameters());
  }
  SUBCASE("scaling every weight changes nothing") {
    std::vector<double> w(data.size());
    for (double& v : w) v = 0.2 + rng.uniform();
    std::vector<double> doubled = w;
    for (double& v : doubled) v *= 2.0;
    numerics::Rng r1(7);
    numerics::Rng r2(7);
    const auto t1 = draw_terms(init, data, w, 32, r1);
    const auto t2 = draw_terms(init, data, doubled, 32, r2);
    std::vector<double> g1, g2;
    weighted_loss_gradient(init, init.parameters(), data, t1, g1);
    weighted_loss_gradient(init, init.parameters(), data, t2, g2);
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < g1.size(); ++i) {
      ab += g1[i] * g2[i];
      aa += g1[i] * g1[i];
      bb += g2[i] * g2[i];
    }
    CHECK(std::abs(ab / std::sqrt(aa * bb) - 1.0) < 1e-9);
  }
  SUBCASE("non-finite data aborts") {
    auto broken = data;
    broken[0][0] = std::numeric_limits<double>::quiet_NaN();
    DdpmConfig all = c;
    all.batch_size = 256;
    CHECK_THROWS_AS(train_ddpm(init, broken, all), NumericalError);
  }
}

TEST_CASE("training on a Gaussian and sampling") {
  const auto truth = MixtureGroundTruth::standard_normal(2);
  numerics::Rng rng(8);
  const auto data = truth.sample(2000, rng);
  DdpmConfig c;
  c.steps = 1500;
  c.seed = 1;
  const auto model = train_ddpm(DiffusionModel(2, NoiseSchedule::linear(50), 32, 16, 2), data, c);

  numerics::Rng srng(9);
  const std::size_t n = 4000;
  const auto samples = sample_ancestral(model, n, 1.0, srng);
  std::vector<double> mean(2, 0.0);
  for (const auto& x : samples) {
    mean[0] += x[0] / n;
    mean[1] += x[1] / n;
  }
  for (double m : mean) CHECK(std::abs(m) < 3.0 * std::sqrt(2.0 / n));

  numerics::Rng erng(10);
  double gap = 0.0;
  for (std::size_t i = 0; i < 200; ++i) gap += truth.log_density(data[i]) - elbo(model, data[i], erng, 4);
  CHECK(gap / 200.0 < 0.5);
  CHECK(gap / 200.0 > -0.1);

  numerics::Rng crng(11);
  const auto cold = sample_ancestral(model, 2000, 0.01, crng);
  double ll_cold = 0.0, ll_warm = 0.0;
  for (std::size_t i = 0; i < 2000; ++i) {
    ll_cold += truth.log_density(cold[i]);
    ll_warm += truth.log_density(samples[i]);
  }
  CHECK(ll_cold > ll_warm);

  numerics::Rng zrng(12);
  CHECK(sample_ancestral(model, 0, 1.0, zrng).empty());
  CHECK_THROWS(sample_ancestral(model, 1, 0.0, zrng));
}

TEST_CASE("elbo_all is independent of the worker count") {
  const DiffusionModel model(2, NoiseSchedule::linear(10), 8, 4, 1);
  numerics::Rng rng(13);
  const auto data = MixtureGroundTruth::standard_normal(2).sample(40, rng);
  setenv("LHTS_THREADS", "1", 1);
  const auto a = elbo_all(model, data, 5, 2);
  setenv("LHTS_THREADS", "7", 1);
  const auto b = elbo_all(model, data, 5, 2);
  unsetenv("LHTS_THREADS");
  CHECK(a == b);
}

TEST_CASE("checkpoints and csv") {
  const DiffusionModel model(2, NoiseSchedule::linear(10), 8, 4, 1);
  CHECK(diffusion_from_json(to_json(model)) == model);
  const auto dir = std::filesystem::temp_directory_path();
  save_diffusion(model, dir / "lhts_diffusion.json");
  CHECK(load_diffusion(dir / "lhts_diffusion.json") == model);
  const std::vector<Point> pts{{0.1, -2.0}, {1e-17, 3.5}};
  write_points_csv(pts, dir / "lhts_points.csv");
  CHECK(read_points_csv(dir / "lhts_points.csv") == pts);
  std::filesystem::remove(dir / "lhts_diffusion.json");
  std::filesystem::remove(dir / "lhts_points.csv");
}
