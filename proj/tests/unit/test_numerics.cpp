#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

#include "lhts/numerics/finite_difference.hpp"
#include "lhts/numerics/log_space.hpp"
#include "lhts/numerics/optimizer.hpp"
#include "lhts/numerics/parallel.hpp"
#include "lhts/numerics/rng.hpp"
#include "lhts/numerics/tape.hpp"

using namespace lhts::numerics;

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(std::vector{0.0}) == 0.0);
  CHECK(log_sum_exp(std::vector{std::log(0.5), std::log(0.5)}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::numbers::ln2).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector{kNegInf, 2.0}) == 2.0);
  CHECK_THROWS_WITH_AS(log_sum_exp(std::vector{kNegInf, kNegInf}), doctest::Contains("empty support"),
                       std::domain_error);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), std::domain_error);

  SUBCASE("shift invariance") {
    const std::vector<double> v{-3.2, 0.4, 1.7, -40.0};
    std::vector<double> shifted = v;
    for (double& x : shifted) x -= 123.0;
    CHECK(log_sum_exp(shifted) + 123.0 == doctest::Approx(log_sum_exp(v)).epsilon(1e-13));
  }
}

TEST_CASE("rev_cum_sum") {
  CHECK(rev_cum_sum(std::vector{-1.0, -2.0, -3.0}) == std::vector{-6.0, -5.0, -3.0});
  CHECK(rev_cum_sum(std::vector{4.5}) == std::vector{4.5});
  CHECK(rev_cum_sum(std::vector<double>(5, 0.0)) == std::vector<double>(5, 0.0));

  Rng rng(7);
  std::vector<double> u(1024);
  double total = 0.0;
  for (double& x : u) {
    x = (rng.uniform() * 2.0 - 1.0) * 1e3;
    total += x;
  }
  const auto s = rev_cum_sum(u);
  CHECK(s.back() == u.back());
  CHECK(std::abs(s.front() - total) < 1e-12 * 1024 * 1e3);
}

TEST_CASE("rescale_log_probs sharpens and flattens") {
  const std::vector<double> lp{std::log(0.8), std::log(0.2)};
  const auto sharp = rescale_log_probs(lp, 0.5);
  // 0.8^2 / (0.8^2 + 0.2^2) = 0.64 / 0.68
  CHECK(std::exp(sharp[0]) == doctest::Approx(0.64 / 0.68).epsilon(1e-12));
  CHECK(std::exp(sharp[1]) == doctest::Approx(0.04 / 0.68).epsilon(1e-12));
  const auto same = rescale_log_probs(lp, 1.0);
  CHECK(same[0] == doctest::Approx(lp[0]).epsilon(1e-15));
  CHECK_THROWS(rescale_log_probs(lp, 0.0));
}

TEST_CASE("categorical_kl") {
  const std::vector<double> p{std::log(0.5), std::log(0.5)};
  const std::vector<double> q{std::log(0.9), std::log(0.1)};
  // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
  const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(5.0);
  CHECK(categorical_kl<double>(p, q) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(categorical_kl<double>(p, p) == doctest::Approx(0.0));
  const std::vector<double> point{0.0, kNegInf};
  CHECK(categorical_kl<double>(point, q) == doctest::Approx(-std::log(0.9)).epsilon(1e-14));
}

TEST_CASE("tape gradients") {
  SUBCASE("square") {
    Tape tape;
    const Var t = tape.parameter(3.0);
    const Var loss = t * t;
    CHECK(tape.gradient(loss) == std::vector{6.0});
  }
  SUBCASE("softmax cross-entropy") {
    Tape tape;
    const std::vector<Var> logits{tape.parameter(0.0), tape.parameter(0.0)};
    const Var loss = log_sum_exp(std::span<const Var>(logits)) - logits[0];
    const auto g = tape.gradient(loss);
    CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("unused parameters get zero") {
    Tape tape;
    const Var a = tape.parameter(2.0);
    tape.parameter(5.0);
    const auto g = tape.gradient(exp(a));
    CHECK(g[0] == doctest::Approx(std::exp(2.0)));
    CHECK(g[1] == 0.0);
  }
  SUBCASE("foreign or detached loss") {
    Tape tape;
    Tape other;
    tape.parameter(1.0);
    const Var b = other.parameter(1.0);
    CHECK_THROWS_AS(tape.gradient(b), std::invalid_argument);
    CHECK_THROWS_AS(tape.gradient(Var(1.0)), std::invalid_argument);
  }
  SUBCASE("shared subexpressions accumulate") {
    Tape tape;
    const Var x = tape.parameter(1.5);
    const Var y = x * x;
    const Var loss = y * y + y;  // x^4 + x^2
    CHECK(tape.gradient(loss)[0] == doctest::Approx(4 * std::pow(1.5, 3) + 2 * 1.5).epsilon(1e-14));
  }
}

namespace {

// Mixed expression touching every primitive.
template <class S>
S mixture(std::span<const S> p) {
  const std::vector<double> inputs{0.3, -1.2, 2.0};
  const S lin = dot(std::span<const S>(p.data(), 3), std::span<const double>(inputs));
  const S pair[2] = {p[1] * p[2], p[0] / (square(p[3]) + S(1.0))};
  const double coeffs[2] = {0.7, -1.3};
  const S w = weighted_sum(std::span<const S>(pair, 2), std::span<const double>(coeffs, 2));
  const S lse = log_sum_exp(std::span<const S>(p));
  return tanh(lin) + w - lse + log(exp(p[3]) + S(2.0)) - (-p[0]);
}

}  // namespace

TEST_CASE("tape matches central differences on random points") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.normal();
    Tape tape;
    std::vector<Var> p;
    for (double v : x) p.push_back(tape.parameter(v));
    const auto analytic = tape.gradient(mixture<Var>(p));
    const auto check = check_gradient([](std::span<const double> z) { return mixture<double>(z); }, analytic, x);
    CHECK(check.passed(1e-4));
  }
}

TEST_CASE("finite difference helpers") {
  const auto g = central_difference([](std::span<const double> x) { return x[0] * x[0] + 3 * x[1]; },
                                    std::vector{2.0, -1.0});
  CHECK(g[0] == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(relative_error(std::vector{1.0, 0.0}, std::vector{1.0, 0.0}) == 0.0);
  CHECK(relative_error(std::vector{0.0}, std::vector{0.0}) == 0.0);
  CHECK(relative_error(std::vector{1.0}, std::vector{2.0}) == doctest::Approx(0.5));
}

TEST_CASE("rng streams") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  CHECK(derive_seed(1, "x", 0) == derive_seed(1, "x", 0));
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "x", 1));
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "y", 0));
  CHECK(derive_seed(1, "x", 0) != derive_seed(2, "x", 0));

  Rng c(3);
  double mean = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    mean += z;
    sq += z * z;
  }
  mean /= n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));

  std::vector<int> counts(3, 0);
  const std::vector<double> lp{std::log(0.2), std::log(0.5), std::log(0.3)};
  for (int i = 0; i < 100000; ++i) ++counts[c.categorical_log(lp)];
  CHECK(counts[1] / 1e5 == doctest::Approx(0.5).epsilon(0.02));
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(c.index(7));
  CHECK(seen.size() == 7);
  CHECK(*seen.rbegin() == 6);
}

TEST_CASE("optimizers") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_gradient_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(l2_norm(g) == doctest::Approx(1.0));
  std::vector<double> h{3.0, 4.0};
  clip_gradient_norm(h, 0.0);
  CHECK(h[0] == 3.0);

  std::vector<double> p{1.0};
  gradient_descent_step(p, std::vector{2.0}, 0.25);
  CHECK(p[0] == 0.5);

  // Adam on (x - 3)^2 converges.
  Adam adam(1, 0.1);
  std::vector<double> x{0.0};
  for (int i = 0; i < 2000; ++i) adam.step(x, std::vector{2.0 * (x[0] - 3.0)});
  CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("parallel_for is scheduling independent") {
  std::vector<double> a(1000), b(1000);
  parallel_for(a.size(), [&](std::size_t i) { a[i] = Rng::derive(5, "p", i).uniform(); }, 1);
  parallel_for(b.size(), [&](std::size_t i) { b[i] = Rng::derive(5, "p", i).uniform(); }, 8);
  CHECK(a == b);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) { if (i == 3) throw std::runtime_error("boom"); }, 4),
                  std::runtime_error);
}
