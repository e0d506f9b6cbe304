#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lhts/numerics/finite_difference.hpp"
#include "lhts/numerics/log_space.hpp"
#include "lhts/oracle.hpp"
#include "lhts/scenarios.hpp"
#include "lhts/trainer.hpp"

using namespace lhts;
using train::Example;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::vector<Example> as_examples(const std::vector<ar::Sequence>& xs) {
  std::vector<Example> out;
  for (const auto& x : xs) out.push_back({x, 1.0});
  return out;
}

}  // namespace

TEST_CASE("joint weights") {
  const std::vector<double> log_p{-2.0, -4.0};
  const auto ones = train::joint_weights(log_p, 1.0, 0.0);
  for (const auto& w : ones.weights) CHECK(w[0] == 1.0);

  const auto w = train::joint_weights(log_p, 0.5, -3.0);
  CHECK(w.weights[0][0] == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(w.weights[1][0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

  const auto clipped = train::joint_weights(std::vector{5.0}, 0.5, 0.0, 3.0);
  CHECK(clipped.weights[0][0] == doctest::Approx(std::exp(3.0)));
  CHECK(clipped.exponents[0][0] == 5.0);
  CHECK(clipped.stats().clip_rate == 1.0);

  CHECK_THROWS_WITH_AS(train::joint_weights(std::vector{-1.0, numerics::kNegInf}, 0.5, 0.0),
                       doctest::Contains("example 1"), NumericalError);
}

TEST_CASE("suffix log-likelihoods and horizon") {
  const auto cx = scenarios::myopic_counterexample();
  const auto v = train::suffix_log_liks(cx, ar::Sequence{1, 0});
  CHECK(v[0] == doctest::Approx(std::log(0.36)).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(std::log(0.9)).epsilon(1e-14));
  CHECK(v[0] == doctest::Approx(cx.sequence_log_prob(ar::Sequence{1, 0})).epsilon(1e-15));

  const std::vector<double> s{-6.0, -5.0, -3.0};
  CHECK(train::apply_horizon(s, 1) == std::vector{-1.0, -2.0, -3.0});
  CHECK(train::apply_horizon(s, 2) == std::vector{-3.0, -5.0, -3.0});
  CHECK(train::apply_horizon(s, 3) == s);
  CHECK(train::apply_horizon(s, 10) == s);
  CHECK_THROWS(train::apply_horizon(s, 0));
}

TEST_CASE("autoregressive weights") {
  const std::vector<std::vector<double>> v{{-1.0, -0.5}, {-2.0, -0.1}};
  const auto ones = train::ar_weights(v, 1.0, std::vector{-7.0, 3.0});
  for (const auto& row : ones.weights) CHECK(row == std::vector{1.0, 1.0});

  const std::vector<std::vector<double>> single{{-1.3, -0.2}};
  const auto own = train::ar_weights(single, 0.3, single[0]);
  CHECK(own.weights[0] == std::vector{1.0, 1.0});

  // Index 1 of the two sequences "aa" and "ba": suffixes ln 0.55 and ln 0.9.
  const auto cx = scenarios::myopic_counterexample();
  const std::vector<std::vector<double>> suffixes{train::suffix_log_liks(cx, ar::Sequence{0, 0}),
                                                  train::suffix_log_liks(cx, ar::Sequence{1, 0})};
  const double m1 = 0.5 * (std::log(0.55) + std::log(0.9));
  const double m0 = 0.5 * (suffixes[0][0] + suffixes[1][0]);
  const auto w = train::ar_weights(suffixes, 0.5, std::vector{m0, m1});
  CHECK(w.weights[0][1] == doctest::Approx(std::exp(std::log(0.55) - m1)).epsilon(1e-14));
  CHECK(w.weights[1][1] == doctest::Approx(std::exp(std::log(0.9) - m1)).epsilon(1e-14));
}

TEST_CASE("streaming baseline and normalizer") {
  train::StreamingBaseline b;
  CHECK(b.joint_baseline(0.5) == 0.0);
  b.observe_joint(-2.0);
  b.observe_joint(-4.0);
  CHECK(b.joint_mean() == -3.0);
  CHECK(b.joint_baseline(0.5) == -3.0);
  CHECK(b.joint_baseline(0.25) == -9.0);
  b.observe_suffix(std::vector{-3.0, -1.0});
  b.observe_suffix(std::vector{-5.0, -2.0, -1.0});
  CHECK(b.suffix_mean(3) == std::vector{-4.0, -1.5, -1.0});
  CHECK(b.suffix_count(2) == 1.0);

  train::LossNormalizer n(2);
  CHECK(n.update(1, 4.0) == 4.0);
  CHECK(n.update(1, 2.0) == 3.0);
  CHECK(n.count(0) == 0);
  CHECK(n.mean(0) == 0.0);
}

TEST_CASE("config validation names the field") {
  train::LhtsConfig c;
  CHECK_NOTHROW(train::validate(c));
  c.temperatures = {1.0, -0.5};
  CHECK_THROWS_WITH_AS(train::validate(c), doctest::Contains("lhts.temperatures[1]"), ConfigError);
  c = {};
  c.learning_rate = 0.0;
  CHECK_THROWS_WITH_AS(train::validate(c), doctest::Contains("lhts.learning_rate"), ConfigError);
  c = {};
  c.objective = train::Objective::joint;
  c.kl_weight = 0.1;
  CHECK_THROWS_WITH_AS(train::validate(c), doctest::Contains("lhts.kl_weight"), ConfigError);
  CHECK(train::data_mode_from_string("exact") == train::DataMode::exact);
  CHECK_THROWS_AS(train::data_mode_from_string("nope"), ConfigError);
}

TEST_CASE("objectives match finite differences") {
  const auto base = scenarios::random_tabular(3, 3, 1.0, 1);
  auto q = ar::Model::linear(3, 3, 2);
  q.enable_temperature_embedding(2, 5);
  numerics::Rng rng(2);
  for (double& p : q.parameters()) p = 0.5 * rng.normal();
  const auto batch = as_examples(scenarios::sample_dataset(base, 6, 3));
  std::vector<std::vector<double>> suffixes;
  for (const auto& ex : batch) suffixes.push_back(train::suffix_log_liks(base, ex.tokens));
  const auto weights = train::ar_weights(suffixes, 0.6, std::vector{-3.0, -2.0, -1.0}, 3.0);

  numerics::Tape tape;
  const auto lg = train::ar_loss_gradient(base, q, batch, &weights, 0.3, 0.6, tape);
  auto f = [&](std::span<const double> p) {
    return train::ar_objective<double>(base, q, p, batch, &weights, 0.3, 0.6);
  };
  CHECK(numerics::check_gradient(f, lg.gradient, q.parameters()).passed(1e-6));
  CHECK(lg.total == doctest::Approx(lg.loss + 0.3 * lg.kl).epsilon(1e-12));

  std::vector<double> log_p;
  for (const auto& ex : batch) log_p.push_back(base.sequence_log_prob(ex.tokens));
  const auto jw = train::joint_weights(log_p, 0.6, -4.0, 3.0);
  const auto jg = train::joint_loss_gradient(q, batch, jw, 0.6, tape);
  auto g = [&](std::span<const double> p) { return train::joint_objective<double>(q, p, batch, jw, 0.6); };
  CHECK(numerics::check_gradient(g, jg.gradient, q.parameters()).passed(1e-6));
}

TEST_CASE("temperature one reproduces maximum likelihood") {
  const auto base = scenarios::random_tabular(3, 3, 1.0, 4);
  const auto batch = as_examples(scenarios::sample_dataset(base, 8, 5));
  std::vector<std::vector<double>> suffixes;
  for (const auto& ex : batch) suffixes.push_back(train::suffix_log_liks(base, ex.tokens));
  const auto weights = train::ar_weights(suffixes, 1.0, std::vector{-9.0, 2.0, 0.5});
  numerics::Tape tape;
  const auto lhts = train::ar_loss_gradient(base, base, batch, &weights, 0.0, std::nullopt, tape);
  const auto mle = train::mle_loss_gradient(base, batch, tape);
  CHECK(lhts.gradient == mle.gradient);
  CHECK(lhts.total == mle.total);
}

TEST_CASE("baseline shift leaves the direction unchanged") {
  const auto base = scenarios::random_tabular(3, 3, 1.0, 6);
  auto q = scenarios::random_tabular(3, 3, 0.5, 7);
  const auto batch = as_examples(scenarios::sample_dataset(base, 10, 8));
  std::vector<std::vector<double>> suffixes;
  for (const auto& ex : batch) suffixes.push_back(train::suffix_log_liks(base, ex.tokens));
  const std::vector<double> mean{-3.0, -2.0, -1.0};
  numerics::Tape tape;
  // Joint form: one weight per sequence, so a shift is a common factor.
  std::vector<double> log_p;
  for (const auto& ex : batch) log_p.push_back(base.sequence_log_prob(ex.tokens));
  const auto g1 = train::joint_loss_gradient(q, batch, train::joint_weights(log_p, 0.4, -3.0), std::nullopt, tape).gradient;
  const auto g2 = train::joint_loss_gradient(q, batch, train::joint_weights(log_p, 0.4, 5.0), std::nullopt, tape).gradient;
  CHECK(std::abs(cosine(g1, g2) - 1.0) < 1e-9);
  // AR form: a shift common to every index also factors out.
  const auto w1 = train::ar_weights(suffixes, 0.4, mean);
  std::vector<double> common = mean;
  for (double& m : common) m += 2.5;
  const auto w2 = train::ar_weights(suffixes, 0.4, common);
  const auto h1 = train::ar_loss_gradient(base, q, batch, &w1, 0.0, std::nullopt, tape).gradient;
  const auto h2 = train::ar_loss_gradient(base, q, batch, &w2, 0.0, std::nullopt, tape).gradient;
  CHECK(std::abs(cosine(h1, h2) - 1.0) < 1e-9);
}

TEST_CASE("exact objectives: identity and properness") {
  const auto base = scenarios::random_tabular(3, 3, 1.2, 9);
  const auto p = oracle::enumerate_joint(base, 3);
  const double T = 0.6;
  const auto pT = oracle::temperature_scale_exact(p, T);
  numerics::Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> lw(p.size());
    for (double& v : lw) v = rng.normal();
    const auto q = oracle::CategoricalTable::from_log_weights(3, 3, lw);
    const auto jl = train::exact_joint_loss(p, q, T);
    const double lhs = std::exp(jl.baseline - pT.log_partition) * jl.loss - oracle::entropy(pT);
    CHECK(std::abs(lhs - oracle::kl_divergence(pT, q).value) < 1e-9);
  }

  const auto target = oracle::tabular_model_from_table(pT);
  const double best = train::exact_ar_loss(base, target, T);
  for (int trial = 0; trial < 10; ++trial) {
    auto moved = target;
    for (double& v : moved.parameters()) v += 0.05 * rng.normal();
    CHECK(train::exact_ar_loss(base, moved, T) > best);
  }
}

TEST_CASE("horizon reduces exponent variance on i.i.d. positions") {
  const auto model = scenarios::iid_model(std::vector{0.5, 0.3, 0.15, 0.05}, 12);
  const auto samples = scenarios::sample_dataset(model, 4000, 11);
  const auto full = train::exponent_variance_by_index(model, samples, 0.5);
  const auto h3 = train::exponent_variance_by_index(model, samples, 0.5, 3);
  for (std::size_t i = 1; i < full.size(); ++i) CHECK(full[i] <= full[i - 1] * 1.05);
  CHECK(h3[0] <= full[0]);
  CHECK(h3[0] / full[0] == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("training") {
  const auto base = scenarios::random_tabular(2, 3, 1.0, 12);

  SUBCASE("zero steps returns a copy") {
    train::LhtsConfig c;
    c.steps = 0;
    c.data_mode = train::DataMode::exact;
    const auto result = train::train(base, base, {}, c);
    CHECK(result.model == base);
  }

  SUBCASE("exact mode converges to the tempered joint") {
    train::LhtsConfig c;
    c.temperatures = {0.5};
    c.data_mode = train::DataMode::exact;
    c.clip = train::kNoClip;
    c.steps = 2000;
    c.learning_rate = 0.5;
    const auto result = train::train(base, base, {}, c);
    REQUIRE(result.final_kl[0]);
    CHECK(*result.final_kl[0] < 1e-3);
  }

  SUBCASE("KL anchor holds q near p") {
    const auto batch = as_examples(scenarios::sample_dataset(base, 16, 13));
    double previous = std::numeric_limits<double>::infinity();
    for (double beta : {0.0, 10.0, 1000.0}) {
      train::LhtsConfig c;
      c.temperatures = {0.5};
      c.kl_weight = beta;
      c.learning_rate = 0.002;
      train::TrainState state(base, c);
      for (int step = 0; step < 30; ++step) train::lhts_step(state, batch, 0);
      double moved = 0.0;
      for (std::size_t i = 0; i < base.num_parameters(); ++i) {
        moved += std::abs(state.student().parameters()[i] - base.parameters()[i]);
      }
      CHECK(moved < previous);
      previous = moved;
    }
    CHECK(previous < 0.05);
  }

  SUBCASE("deterministic and normalized across temperatures") {
    const auto data = scenarios::sample_dataset(base, 200, 14);
    train::LhtsConfig c;
    c.temperatures = {0.9, 1.0, 1.1};
    c.steps = 300;
    c.batch_size = 16;
    c.seed = 3;
    const auto a = train::train(base, base, data, c);
    const auto b = train::train(base, base, data, c);
    CHECK(a.model == b.model);
    std::vector<double> late(3, 0.0);
    std::vector<int> count(3, 0);
    for (const auto& m : a.metrics) {
      if (m.step < 100) continue;
      const auto j = static_cast<std::size_t>(std::lround((m.temperature - 0.9) / 0.1));
      late[j] += m.total / m.normalizer;
      ++count[j];
    }
    for (std::size_t j = 0; j < 3; ++j) late[j] /= count[j];
    const auto [lo, hi] = std::minmax_element(late.begin(), late.end());
    CHECK(*hi <= 2.0 * *lo);
  }

  SUBCASE("maximum likelihood recovers the data distribution") {
    const auto data = scenarios::sample_dataset(base, 5000, 15);
    train::MleConfig mc;
    mc.steps = 300;
    mc.learning_rate = 5.0;
    const auto fitted = train::train_mle(ar::Model::tabular(2, 3), data, mc);
    const auto empirical = oracle::empirical_table(2, 3, data);
    CHECK(oracle::kl_divergence(empirical, oracle::enumerate_joint(fitted, 3)).value < 1e-4);
  }
}
