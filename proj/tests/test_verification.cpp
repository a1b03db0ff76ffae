#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sosd/verification.hpp"

using namespace sosd;

TEST_CASE("all lemma suites are clean at moderate trial counts") {
  for (Lemma lemma : {Lemma::kL1, Lemma::kL2, Lemma::kL3, Lemma::kL4, Lemma::kL6,
                      Lemma::kL7, Lemma::kL8}) {
    const auto report = check_inequality_suite(lemma, 400, 7, 2, 16);
    INFO("lemma ", report.name);
    CHECK(report.violations == 0);
    CHECK(report.min_margin >= -1e-9);
  }
}

TEST_CASE("suites are reproducible for identical inputs") {
  const auto a = check_inequality_suite(Lemma::kL4, 200, 99, 2, 12);
  const auto b = check_inequality_suite(Lemma::kL4, 200, 99, 2, 12);
  CHECK(a.violations == b.violations);
  CHECK(a.worst_slack == b.worst_slack);
  CHECK(a.min_margin == b.min_margin);

  const auto c = check_inequality_suite(Lemma::kL4, 200, 100, 2, 12);
  CHECK(c.min_margin != a.min_margin);  // different seed, different draws
}

TEST_CASE("Mirsky example: orthogonal rotation leaves the spectrum fixed") {
  // Covered shape-wise inside the suite; here the slack sign convention.
  const auto report = check_inequality_suite(Lemma::kL2, 50, 3, 2, 8);
  CHECK(report.passed());
  CHECK(report.min_margin >= 0.0);
}

TEST_CASE("descent lemma on exact quadratics") {
  SUBCASE("eta = 1/beta achieves equality on the lower bound") {
    const auto report = check_descent_lemma(2.0, 0.5, 500, 11);
    CHECK(report.violations == 0);
    CHECK(std::abs(report.min_margin) <= 1e-12);
  }
  SUBCASE("smaller steps keep both bounds comfortably") {
    const auto report = check_descent_lemma(2.0, 0.25, 500, 12);
    CHECK(report.violations == 0);
  }
  SUBCASE("tiny steps shrink everything toward zero") {
    const auto report = check_descent_lemma(2.0, 1e-9, 100, 13);
    CHECK(report.violations == 0);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(check_descent_lemma(2.0, 1.5, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(check_descent_lemma(0.0, 0.1, 10, 1), std::invalid_argument);
  }
}

TEST_CASE("descent lemma scalar hand values") {
  // beta=2, eta=1/beta, w=1: w' = 0, dL = 1, lower = 1, upper = 3.
  const double beta = 2.0, eta = 0.5, w = 1.0;
  const double grad_sq = beta * beta * w * w;
  const double shrink = 1.0 - eta * beta;
  const double dl = 0.5 * beta * w * w * (1.0 - shrink * shrink);
  CHECK(dl == doctest::Approx(1.0));
  CHECK(eta * (1.0 - eta * beta / 2.0) * grad_sq == doctest::Approx(1.0));
  CHECK(eta * (1.0 + eta * beta / 2.0) * grad_sq == doctest::Approx(3.0));
}

TEST_CASE("finite_diff_gradcheck over the default config battery") {
  const auto configs = default_gradcheck_configs(20, 17);
  REQUIRE(configs.size() == 20);
  for (const auto& cfg : configs) {
    CHECK(cfg.n <= 8);
    CHECK(cfg.d <= 8);
    CHECK(cfg.classes <= 5);
  }
  const auto report = finite_diff_gradcheck(configs);
  CHECK(report.configs == 20);
  CHECK(report.worst_rel_error < 1e-6);
}

TEST_CASE("check_phase1_bound") {
  CHECK(check_phase1_bound(4.0, 0.1, 1.0) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(check_phase1_bound(4.0, 0.1, 0.0) == 0.0);
  CHECK(check_phase1_bound(4.0, 0.2, 1.0) ==
        doctest::Approx(2.0 * check_phase1_bound(4.0, 0.1, 1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(check_phase1_bound(0.0, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("fit_phase2_exponent") {
  std::vector<std::pair<double, double>> cubic;
  for (double x : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) cubic.emplace_back(x, x * x * x);
  auto p = fit_phase2_exponent(cubic);
  REQUIRE(p.has_value());
  CHECK(*p == doctest::Approx(3.0).epsilon(1e-12));

  std::vector<std::pair<double, double>> linear;
  for (double x : {0.1, 0.2, 0.3, 0.5, 0.7}) linear.emplace_back(x, 2.0 * x);
  p = fit_phase2_exponent(linear);
  REQUIRE(p.has_value());
  CHECK(*p == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("too few pairs") {
    std::vector<std::pair<double, double>> few{{0.1, 0.001}, {0.2, 0.008}};
    CHECK_FALSE(fit_phase2_exponent(few).has_value());
  }
  SUBCASE("zero abscissa variance") {
    std::vector<std::pair<double, double>> flat(6, {0.25, 0.01});
    CHECK_FALSE(fit_phase2_exponent(flat).has_value());
  }
  SUBCASE("nonpositive pairs are dropped") {
    std::vector<std::pair<double, double>> mixed = cubic;
    mixed.emplace_back(0.0, 0.5);
    mixed.emplace_back(0.5, -1.0);
    p = fit_phase2_exponent(mixed);
    REQUIRE(p.has_value());
    CHECK(*p == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("multiplicative noise keeps the estimate near the exponent") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    std::vector<std::pair<double, double>> noisy;
    for (int i = 0; i < 40; ++i) {
      const double x = 0.05 + 0.02 * i;
      noisy.emplace_back(x, jitter(rng) * x * x * x);
    }
    p = fit_phase2_exponent(noisy);
    REQUIRE(p.has_value());
    CHECK(*p > 2.5);
    CHECK(*p < 3.5);
  }
}
