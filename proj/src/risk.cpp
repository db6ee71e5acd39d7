#include "stlforge/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "parallel.hpp"
#include "stlforge/error.hpp"
#include "stlforge/random.hpp"

namespace stlforge::risk {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ValidationError("confidence level " + std::to_string(beta) + " is not in (0, 1)");
  }
}

std::size_t nearest_rank(double beta, std::size_t n) {
  // 1e-9 absorbs representation error such as 0.95 * 100 = 95.000000000000014.
  const double r = std::ceil(beta * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, n);
}

}  // namespace

const RiskEntry& RiskReport::at(double beta) const {
  for (const auto& e : entries) {
    if (std::abs(e.beta - beta) < 1e-12) return e;
  }
  throw ValidationError("confidence level " + std::to_string(beta) + " was not computed");
}

RiskEntry risk_measures(std::span<const double> losses, double beta) {
  check_beta(beta);
  if (losses.empty()) throw ValidationError("no samples");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  RiskEntry e;
  e.beta = beta;
  e.var = sorted[nearest_rank(beta, sorted.size()) - 1];
  const auto tail = std::lower_bound(sorted.begin(), sorted.end(), e.var);
  double sum = 0.0;
  for (auto it = tail; it != sorted.end(); ++it) sum += *it;
  e.cvar = sum / static_cast<double>(sorted.end() - tail);
  e.neg_var = -e.var;
  e.neg_cvar = -e.cvar;
  return e;
}

RiskReport risk_from_robustness(std::vector<double> robustness, std::span<const double> betas) {
  if (robustness.empty()) throw ValidationError("no robustness samples");
  for (double b : betas) check_beta(b);
  RiskReport report;
  report.N = robustness.size();
  std::vector<double> losses;
  losses.reserve(robustness.size());
  double sum = 0.0;
  std::size_t sat = 0;
  report.summary.min_rho = std::numeric_limits<double>::infinity();
  report.summary.max_rho = -std::numeric_limits<double>::infinity();
  for (double r : robustness) {
    losses.push_back(-r);
    sum += r;
    if (r > 0.0) ++sat;
    report.summary.min_rho = std::min(report.summary.min_rho, r);
    report.summary.max_rho = std::max(report.summary.max_rho, r);
  }
  report.summary.mean_rho = sum / static_cast<double>(robustness.size());
  report.summary.satisfaction_rate = static_cast<double>(sat) / static_cast<double>(robustness.size());
  for (double b : betas) report.entries.push_back(risk_measures(losses, b));
  report.robustness = std::move(robustness);
  return report;
}

RiskReport estimate_risk(const trainer::Problem& problem, const policy::Policy& pi, std::size_t N,
                         std::span<const double> betas, std::uint64_t seed, int threads) {
  if (N < 1000) throw ValidationError("risk estimation needs N >= 1000 samples");
  if (problem.formula.empty()) throw ValidationError("risk estimation needs a formula");
  for (double b : betas) check_beta(b);
  std::vector<double> robustness(N);
  detail::parallel_for(N, threads, [&](std::size_t i) {
    Rng rng = Rng::split(seed, i);
    const auto x0 = plant::sample_init(problem.init, rng);
    const auto delta = plant::sample_model(problem.dynamics, rng);
    const auto traj = plant::rollout<double>(problem.dynamics, pi, pi.params(), x0, delta,
                                             problem.horizon);
    robustness[i] = semantics::hard_robustness(problem.formula, {traj.states, traj.state_dim});
  });
  RiskReport report = risk_from_robustness(std::move(robustness), betas);
  report.seed = seed;
  return report;
}

Guarantee probabilistic_guarantee(const RiskReport& report, double beta) {
  const RiskEntry& e = report.at(beta);
  Guarantee g;
  g.beta = beta;
  g.robustness_bound = e.neg_var;
  char buf[128];
  std::snprintf(buf, sizeof buf, "rho >= %.6g with probability >= %.6g", g.robustness_bound, beta);
  g.statement = buf;
  return g;
}

}  // namespace stlforge::risk
