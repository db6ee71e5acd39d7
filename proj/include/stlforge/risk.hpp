#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stlforge/trainer.hpp"

namespace stlforge::risk {

// VaR and CVaR of the loss L = -rho at one confidence level. The neg_* fields
// are the corresponding lower bounds on robustness.
struct RiskEntry {
  double beta = 0.0;
  double var = 0.0;
  double cvar = 0.0;
  double neg_var = 0.0;
  double neg_cvar = 0.0;
};

struct SampleSummary {
  double min_rho = 0.0;
  double max_rho = 0.0;
  double mean_rho = 0.0;
  double satisfaction_rate = 0.0;
};

struct RiskReport {
  std::vector<RiskEntry> entries;
  SampleSummary summary;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::vector<double> robustness;  // raw samples, in sample order

  const RiskEntry& at(double beta) const;
};

// Nearest-rank quantile: the ceil(beta * N)-th smallest loss. CVaR is the mean
// of every loss >= VaR. `losses` need not be sorted.
RiskEntry risk_measures(std::span<const double> losses, double beta);

RiskReport risk_from_robustness(std::vector<double> robustness, std::span<const double> betas);

// Draws N iid (x0, delta) uniformly, rolls out the closed loop and computes
// the hard robustness of each trajectory. Sample i uses stream (seed, i), so
// the report does not depend on the worker count.
RiskReport estimate_risk(const trainer::Problem& problem, const policy::Policy& pi, std::size_t N,
                         std::span<const double> betas, std::uint64_t seed, int threads = 1);

struct Guarantee {
  double beta = 0.0;
  double robustness_bound = 0.0;  // rho >= bound with probability >= beta
  std::string statement;
};

Guarantee probabilistic_guarantee(const RiskReport& report, double beta);

}  // namespace stlforge::risk
