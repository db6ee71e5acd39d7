#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <numeric>
#include <vector>

#include "stlforge/random.hpp"
#include "stlforge/risk.hpp"

using namespace stlforge;

namespace {

trainer::Problem unicycle_problem() {
  const std::vector<std::string> vars{"x", "y", "alpha"};
  trainer::Problem p;
  p.dynamics = plant::Dynamics::unicycle();
  p.init = plant::InitSet::box({0.6, 0.6, 2 * std::numbers::pi / 5},
                               {1.4, 1.4, 3 * std::numbers::pi / 5});
  p.formula = stl::parse_stl("F[1,10](1 - (2/3)*((x - 2)^2 + (y - 8)^2) >= 0)", vars, 20);
  p.reward = lang::parse_expr("0", vars);
  return p;
}

}  // namespace

TEST_CASE("nearest-rank VaR and tail-mean CVaR") {
  std::vector<double> losses(100);
  std::iota(losses.begin(), losses.end(), 1.0);
  const auto e = risk::risk_measures(losses, 0.95);
  CHECK(e.var == 95.0);
  CHECK(e.cvar == doctest::Approx(97.5));
  CHECK(e.neg_var == -95.0);
  CHECK(e.neg_cvar == doctest::Approx(-97.5));

  // Order of the samples is irrelevant.
  std::reverse(losses.begin(), losses.end());
  CHECK(risk::risk_measures(losses, 0.95).var == 95.0);
  CHECK(risk::risk_measures(losses, 0.99).var == 99.0);
  CHECK(risk::risk_measures(losses, 0.001).var == 1.0);
}

TEST_CASE("constant samples") {
  const std::vector<double> c(50, -0.25);
  for (double b : {0.5, 0.95, 0.999}) {
    const auto e = risk::risk_measures(c, b);
    CHECK(e.var == -0.25);
    CHECK(e.cvar == -0.25);
  }
  const std::vector<double> rob(1000, 0.25);
  const std::vector<double> betas{0.95};
  const auto report = risk::risk_from_robustness(rob, betas);
  CHECK(risk::probabilistic_guarantee(report, 0.95).robustness_bound == 0.25);
}

TEST_CASE("invalid inputs") {
  const std::vector<double> v{1, 2, 3};
  CHECK_THROWS_AS(risk::risk_measures(v, 1.0), ValidationError);
  CHECK_THROWS_AS(risk::risk_measures(v, 0.0), ValidationError);
  CHECK_THROWS_AS(risk::risk_measures(std::vector<double>{}, 0.5), ValidationError);
  const std::vector<double> betas{0.95};
  const auto report = risk::risk_from_robustness(std::vector<double>(10, 1.0), betas);
  CHECK_THROWS_AS(risk::probabilistic_guarantee(report, 0.99), ValidationError);
}

TEST_CASE("uniform oracle") {
  Rng rng(2024);
  std::vector<double> rob(100000);
  for (auto& r : rob) r = -rng.uniform();
  const std::vector<double> betas{0.95, 0.98, 0.99};
  const auto report = risk::risk_from_robustness(rob, betas);
  for (const auto& e : report.entries) {
    CHECK(std::abs(e.var - e.beta) < 0.01);
    CHECK(e.cvar >= e.var);
    CHECK(e.neg_cvar <= e.neg_var);
    // Tail mean of U(0, 1) above beta.
    CHECK(e.cvar == doctest::Approx((1 + e.beta) / 2).epsilon(0.01));
  }
  CHECK(report.entries[0].var <= report.entries[1].var);
  CHECK(report.entries[1].var <= report.entries[2].var);
  CHECK(report.summary.satisfaction_rate == 0.0);
}

TEST_CASE("summary statistics") {
  const std::vector<double> rob{-1, 0, 2, 3};
  const std::vector<double> betas{0.5};
  const auto r = risk::risk_from_robustness(rob, betas);
  CHECK(r.summary.min_rho == -1);
  CHECK(r.summary.max_rho == 3);
  CHECK(r.summary.mean_rho == 1);
  CHECK(r.summary.satisfaction_rate == 0.5);
  CHECK(r.N == 4);
}

TEST_CASE("guarantee statement") {
  // Losses whose 95th percentile is -0.246.
  std::vector<double> rob(1000);
  for (std::size_t i = 0; i < rob.size(); ++i) rob[i] = 0.246 + 0.001 * static_cast<double>(i);
  const std::vector<double> betas{0.95};
  const auto r = risk::risk_from_robustness(rob, betas);
  // The 950th smallest loss is -rho at index 50.
  CHECK(r.at(0.95).var == doctest::Approx(-(0.246 + 0.001 * 50)));
  std::vector<double> flat(1000, 0.246);
  const auto g = risk::probabilistic_guarantee(risk::risk_from_robustness(flat, betas), 0.95);
  CHECK(g.robustness_bound == 0.246);
  CHECK(g.statement == "rho >= 0.246 with probability >= 0.95");
}

TEST_CASE("Monte-Carlo estimation is deterministic and thread independent") {
  const auto p = unicycle_problem();
  const auto pi = policy::init_params({4, 5, 2, 2}, p.dynamics.default_squash(), 20, 1);
  const std::vector<double> betas{0.9, 0.95, 0.99};
  const auto a = risk::estimate_risk(p, pi, 2000, betas, 7, 1);
  const auto b = risk::estimate_risk(p, pi, 2000, betas, 7, 3);
  CHECK(a.robustness == b.robustness);
  CHECK(a.at(0.95).var == b.at(0.95).var);
  CHECK(a.at(0.9).var <= a.at(0.95).var);
  CHECK(a.at(0.95).var <= a.at(0.99).var);
  for (const auto& e : a.entries) CHECK(e.cvar >= e.var);
  CHECK(a.seed == 7);
  CHECK_THROWS_AS(risk::estimate_risk(p, pi, 999, betas, 7), ValidationError);
  const std::vector<double> bad{1.5};
  CHECK_THROWS_AS(risk::estimate_risk(p, pi, 1000, bad, 7), ValidationError);
}
