#include <doctest.h>

#include <cmath>

#include "lhts/error.hpp"
#include "lhts/eval.hpp"
#include "lhts/scenarios.hpp"

using namespace lhts;

TEST_CASE("distinct and repetition rates") {
  const std::vector<ar::Sequence> same(10, ar::Sequence{0, 1, 2});
  CHECK(eval::distinct_rate(same) == doctest::Approx(0.1));
  CHECK(eval::repetition_rate(same) == 0.0);
  const std::vector<ar::Sequence> flat{{2, 2, 2, 2}, {1, 1, 1, 1}};
  CHECK(eval::repetition_rate(flat) == 1.0);
  CHECK(eval::distinct_rate(flat) == 1.0);
  const std::vector<ar::Sequence> mixed{{0, 0, 1}};
  CHECK(eval::repetition_rate(mixed) == 0.5);
}

TEST_CASE("eval_samples") {
  const auto base = ar::Model::tabular(2, 3);
  const std::vector<ar::Sequence> xs{{0, 0, 0}, {1, 0, 1}};
  const auto row = eval::eval_samples(xs, base);
  CHECK(row.mean_log_likelihood == doctest::Approx(std::log(1.0 / 8)));
  CHECK(row.samples == 2);
  CHECK_FALSE(row.total_variation);
  CHECK_THROWS(eval::eval_samples(std::vector<ar::Sequence>{}, base));

  const auto table = oracle::temperature_scale_exact(oracle::enumerate_joint(scenarios::random_tabular(2, 3, 1.0, 1), 3), 0.5);
  numerics::Rng rng(2);
  const auto samples = oracle::sample_table(table, 100000, rng);
  const auto with_oracle = eval::eval_samples(samples, base, &table);
  REQUIRE(with_oracle.total_variation);
  CHECK(*with_oracle.total_variation < 0.02);
  CHECK(std::isfinite(*with_oracle.kl_empirical_to_oracle));
}

TEST_CASE("report ordering and csv") {
  std::vector<eval::MetricsRow> rows(3);
  rows[0].long_horizon_temperature = 1.0;
  rows[0].myopic_temperature = 0.5;
  rows[1].long_horizon_temperature = 0.5;
  rows[1].myopic_temperature = 1.0;
  rows[2].long_horizon_temperature = 1.0;
  rows[2].myopic_temperature = 0.1;
  eval::finalize_report(rows);
  CHECK(rows[0].long_horizon_temperature == 0.5);
  CHECK(rows[1].myopic_temperature == 0.1);
  CHECK(rows[2].myopic_temperature == 0.5);

  rows[1].kl_to_oracle = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(eval::finalize_report(rows), NumericalError);

  eval::MetricsRow r;
  r.samples = 4;
  r.total_variation = 0.25;
  const auto line = eval::csv_row(r);
  CHECK(line == "1,1,4,0,0,0,0.25,,");
  CHECK(eval::csv_header().find("long_horizon_T,myopic_T") == 0);
}

TEST_CASE("json lines") {
  train::StepMetrics m;
  m.step = 3;
  m.loss = 0.5;
  const auto line = eval::json_line(m);
  CHECK(line.find("{\"step\":3,\"temperature\":1.0,\"loss\":0.5,") == 0);
  CHECK(line.find("\"kl_to_target\":null}") != std::string::npos);
  eval::MetricsRow r;
  r.kl_to_oracle = 0.25;
  CHECK(eval::json_line(r).find("\"kl_to_oracle\":0.25}") != std::string::npos);
}
