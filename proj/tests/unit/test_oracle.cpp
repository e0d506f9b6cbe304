#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lhts/numerics/log_space.hpp"
#include "lhts/oracle.hpp"
#include "lhts/scenarios.hpp"

using namespace lhts;
using oracle::CategoricalTable;

namespace {

double total_mass(const CategoricalTable& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t.prob(i);
  return s;
}

CategoricalTable from_probs(int V, int L, const std::vector<double>& probs) {
  std::vector<double> lp;
  for (double p : probs) lp.push_back(p > 0 ? std::log(p) : numerics::kNegInf);
  return CategoricalTable{V, L, lp, 0.0};
}

}  // namespace

TEST_CASE("sequence space") {
  const oracle::SequenceSpace space(3, 2);
  CHECK(space.size() == 9);
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(space.index(space.sequence(i)) == i);
  CHECK(space.sequence(5) == ar::Sequence{1, 2});
  CHECK_THROWS_WITH_AS(oracle::SequenceSpace(10, 8), doctest::Contains("10^8 exceeds the enumeration cap"),
                       std::length_error);
  CHECK_NOTHROW(oracle::SequenceSpace(10, 7));
}

TEST_CASE("enumerate_joint") {
  SUBCASE("uniform conditionals") {
    const auto table = oracle::enumerate_joint(ar::Model::tabular(2, 3), 3);
    REQUIRE(table.size() == 8);
    for (double lp : table.log_probs) CHECK(lp == doctest::Approx(std::log(1.0 / 8)).epsilon(1e-14));
    CHECK(oracle::entropy(table) == doctest::Approx(std::log(8.0)).epsilon(1e-13));
  }
  SUBCASE("hand-multiplied two-step model") {
    const auto table = oracle::enumerate_joint(scenarios::myopic_counterexample(), 2);
    // 0.6*0.55, 0.6*0.45, 0.4*0.9, 0.4*0.1
    CHECK(table.prob(0) == doctest::Approx(0.33).epsilon(1e-12));
    CHECK(table.prob(1) == doctest::Approx(0.27).epsilon(1e-12));
    CHECK(table.prob(2) == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(table.prob(3) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(oracle::argmax_joint(table) == ar::Sequence{1, 0});
  }
  SUBCASE("independent marginals") {
    const auto table = oracle::enumerate_joint(scenarios::independent_positions({{0.6, 0.4}, {0.55, 0.45}}), 2);
    CHECK(table.prob(2) == doctest::Approx(0.22).epsilon(1e-12));
  }
  SUBCASE("normalization") {
    const auto model = scenarios::random_tabular(3, 5, 2.0, 9);
    CHECK(std::abs(total_mass(oracle::enumerate_joint(model, 5)) - 1.0) < 1e-9);
    auto linear = ar::Model::linear(4, 4, 2);
    numerics::Rng rng(2);
    for (double& p : linear.parameters()) p = rng.normal();
    CHECK(std::abs(total_mass(oracle::enumerate_joint(linear, 4)) - 1.0) < 1e-9);
  }
  SUBCASE("cap") {
    CHECK_THROWS_WITH_AS(oracle::enumerate_joint(ar::Model::linear(8, 9), 9, {}, 1000),
                         doctest::Contains("exceeds the enumeration cap of 1000"), std::length_error);
  }
}

TEST_CASE("temperature_scale_exact") {
  const auto base = from_probs(2, 1, {0.8, 0.2});
  const auto sharp = oracle::temperature_scale_exact(base, 0.5);
  CHECK(sharp.prob(0) == doctest::Approx(0.64 / 0.68).epsilon(1e-12));
  CHECK(sharp.prob(1) == doctest::Approx(0.04 / 0.68).epsilon(1e-12));
  CHECK(sharp.log_partition == doctest::Approx(std::log(0.68)).epsilon(1e-12));
  CHECK(std::abs(sharp.prob(0) - 0.9412) < 5e-5);

  const auto same = oracle::temperature_scale_exact(base, 1.0);
  CHECK(same.log_probs == base.log_probs);
  CHECK_THROWS(oracle::temperature_scale_exact(base, 0.0));
  CHECK_THROWS(oracle::temperature_scale_exact(base, -1.0));

  SUBCASE("composition, ranking and entropy") {
    const auto table = oracle::enumerate_joint(scenarios::random_tabular(3, 3, 1.5, 4), 3);
    const auto twice = oracle::temperature_scale_exact(oracle::temperature_scale_exact(table, 0.7), 0.4);
    const auto once = oracle::temperature_scale_exact(table, 0.28);
    for (std::size_t i = 0; i < table.size(); ++i) CHECK(std::abs(twice.log_probs[i] - once.log_probs[i]) < 1e-9);

    double previous = oracle::entropy(table);
    for (double T : {0.5, 0.1, 0.01}) {
      const auto scaled = oracle::temperature_scale_exact(table, T);
      const double h = oracle::entropy(scaled);
      CHECK(h <= previous + 1e-12);
      previous = h;
      for (std::size_t i = 0; i < table.size(); ++i) {
        for (std::size_t j = 0; j < table.size(); ++j) {
          if (table.log_probs[i] < table.log_probs[j]) CHECK(scaled.log_probs[i] < scaled.log_probs[j]);
        }
      }
    }
    const auto cold = oracle::temperature_scale_exact(table, 0.01);
    CHECK(oracle::argmax_joint(cold) == oracle::argmax_joint(table));
    CHECK(cold.prob(cold.space().index(oracle::argmax_joint(table))) > 0.99);
  }
}

TEST_CASE("myopic_scale_joint") {
  const auto model = scenarios::myopic_counterexample();
  const auto exact = oracle::enumerate_joint(model, 2);
  CHECK(oracle::myopic_scale_joint(model, 1.0).log_probs == exact.log_probs);

  const auto myopic = oracle::myopic_scale_joint(model, 0.01);
  const auto joint = oracle::temperature_scale_exact(exact, 0.01);
  CHECK(myopic.prob(0) > 0.999);  // "aa"
  CHECK(joint.prob(2) > 0.999);   // "ba"

  const auto greedy = oracle::myopic_scale_joint(model, 0.0);
  CHECK(greedy.prob(0) == 1.0);

  const auto p_half = oracle::temperature_scale_exact(exact, 0.5);
  CHECK(oracle::kl_divergence(p_half, oracle::myopic_scale_joint(model, 0.5)).value > 1e-3);
}

TEST_CASE("shared-prefix scenario") {
  const auto table = scenarios::shared_prefix::table();
  CHECK(std::abs(total_mass(table) - 1.0) < 1e-12);
  const auto model = scenarios::shared_prefix::model();
  const auto rebuilt = oracle::enumerate_joint(model, 2);
  for (std::size_t i = 0; i < table.size(); ++i) CHECK(std::abs(rebuilt.log_probs[i] - table.log_probs[i]) < 1e-12);

  const auto answers = scenarios::shared_prefix::answers();
  const auto cold = oracle::temperature_scale_exact(table, 0.01);
  for (const auto& a : answers) CHECK(std::exp(cold.log_prob(a)) == doctest::Approx(1.0 / 3).epsilon(1e-6));

  const auto myopic = oracle::myopic_scale_joint(model, 0.01);
  double tap = 0.0;
  for (std::size_t i = 0; i < myopic.size(); ++i) {
    if (myopic.space().sequence(i)[0] == scenarios::shared_prefix::kTap) tap += myopic.prob(i);
  }
  CHECK(tap > 0.99);
  CHECK(std::exp(myopic.log_prob(answers[2])) < 0.01);
}

TEST_CASE("kl, entropy, argmax, tv") {
  const auto p = from_probs(2, 1, {0.5, 0.5});
  const auto q = from_probs(2, 1, {0.75, 0.25});
  CHECK(oracle::kl_divergence(p, q).value == doctest::Approx(0.5 * std::log(2.0 / 3) + 0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(oracle::kl_divergence(p, q).value - 0.1438) < 5e-5);
  CHECK(oracle::kl_divergence(p, p).value == 0.0);
  CHECK(oracle::total_variation(p, q) == doctest::Approx(0.25));

  const auto delta = from_probs(2, 1, {1.0, 0.0});
  CHECK(oracle::entropy(delta) == 0.0);
  const auto violation = oracle::kl_divergence(p, delta);
  CHECK(std::isinf(violation.value));
  REQUIRE(violation.support_violation);
  CHECK(*violation.support_violation == ar::Sequence{1});
  CHECK(violation.diagnostic().find("[1]") != std::string::npos);
  CHECK(oracle::kl_divergence(delta, p).value == doctest::Approx(std::log(2.0)));

  const auto tie = from_probs(2, 2, {0.1, 0.4, 0.4, 0.1});
  CHECK(oracle::argmax_joint(tie) == ar::Sequence{0, 1});
}

TEST_CASE("tabular_model_from_table round trip") {
  const auto table = oracle::enumerate_joint(scenarios::random_tabular(3, 3, 1.0, 12), 3);
  const auto rebuilt = oracle::enumerate_joint(oracle::tabular_model_from_table(table), 3);
  for (std::size_t i = 0; i < table.size(); ++i) CHECK(std::abs(rebuilt.log_probs[i] - table.log_probs[i]) < 1e-12);

  const auto sparse = from_probs(2, 2, {0.5, 0.5, 0.0, 0.0});
  const auto model = oracle::tabular_model_from_table(sparse);
  const auto back = oracle::enumerate_joint(model, 2);
  CHECK(back.prob(0) == doctest::Approx(0.5));
  CHECK(back.log_probs[2] == numerics::kNegInf);
}

TEST_CASE("empirical sampling converges to the table") {
  const auto table = oracle::temperature_scale_exact(oracle::enumerate_joint(scenarios::random_tabular(2, 3, 1.0, 3), 3), 0.7);
  numerics::Rng rng(5);
  const auto samples = oracle::sample_table(table, 100000, rng);
  const auto empirical = oracle::empirical_table(2, 3, samples);
  CHECK(oracle::total_variation(empirical, table) < 0.02);
}

TEST_CASE("table json") {
  const auto table = from_probs(2, 1, {1.0, 0.0});
  const auto json = oracle::to_json(table);
  CHECK(json.find("null") != std::string::npos);
  const auto back = oracle::table_from_json(json);
  CHECK(back.log_probs == table.log_probs);
  CHECK_THROWS(oracle::table_from_json(R"({"vocab_size":2,"length":2,"log_probs":[0]})"));
}
