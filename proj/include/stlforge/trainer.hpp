#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stlforge/expr.hpp"
#include "stlforge/plant.hpp"
#include "stlforge/policy.hpp"
#include "stlforge/semantics.hpp"
#include "stlforge/stl.hpp"

namespace stlforge::trainer {

// Everything that defines the control task, independent of how it is trained.
struct Problem {
  plant::Dynamics dynamics;
  plant::InitSet init;
  stl::Formula formula;  // empty: no hard constraint, Gamma is +inf
  lang::Expr reward;
  double gamma = 0.9;
  int horizon = 20;
};

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// A candidate Adam update: the ascent increment and the optimizer state that
// results if the increment is taken.
struct AdamProposal {
  std::vector<double> delta;
  AdamState next;
};

AdamProposal adam_step(const AdamState& state, std::span<const double> grad,
                       const AdamConfig& config);

enum class Mode { switching, lagrangian };

struct TrainConfig {
  double rho = 0.3;
  double tau = 100.0;
  int batch_size = 16;
  int iterations = 1000;
  AdamConfig adam;
  std::uint64_t seed = 0;
  semantics::WeightForm wtavg_form = semantics::WeightForm::squared;
  std::vector<int> layer_dims;
  std::vector<policy::Squash> squash;  // empty: the plant's default
  Mode mode = Mode::switching;
  double lagrange_weight = 1.0;  // omega for every batch state
  int threads = 1;
};

void validate(const TrainConfig& config, const Problem& problem);

enum class Branch { perf, stl, slow, lagrangian };
std::string to_string(Branch b);

struct LogRecord {
  int iter = 0;
  Branch branch = Branch::slow;
  double J = 0.0;      // at the fresh sample x0^i, before the update
  double Gamma = 0.0;  // at the fresh sample x0^i, before the update
  double norm_d1 = 0.0;
  double norm_d2 = 0.0;
  int b1 = 0;
  int b2 = 0;
  // Gamma at x0^i under the performance candidate; NaN when not evaluated.
  double Gamma_candidate = std::numeric_limits<double>::quiet_NaN();
};

using TrainLog = std::vector<LogRecord>;

struct TrainResult {
  policy::Policy policy;
  semantics::SmoothParams zeta;
  TrainLog log;
  double seconds = 0.0;
};

class TrainingAborted : public DomainError {
 public:
  TrainingAborted(const std::string& what, TrainLog partial)
      : DomainError(what), log_(std::move(partial)) {}
  const TrainLog& log() const noexcept { return log_; }

 private:
  TrainLog log_;
};

// Discounted sum_{k=0}^{H} gamma^k q(x_k).
template <class T>
T perf_reward(const plant::RolloutT<T>& traj, const lang::Expr& reward, double gamma);

// Objectives at one (x0, delta) evaluated without recording.
struct Evaluation {
  double J = 0.0;
  double Gamma = 0.0;
  double rho = 0.0;
  bool satisfied = true;
};

Evaluation evaluate(const Problem& problem, const policy::Policy& pi,
                    const semantics::SmoothParams& zeta, std::span<const double> x0,
                    std::span<const double> delta);

double stl_objective(const Problem& problem, const policy::Policy& pi,
                     const semantics::SmoothParams& zeta, std::span<const double> x0,
                     std::span<const double> delta);

// Gradients over the joint coordinate space (theta, zeta): theta first in
// Policy::params() order, then zeta in SmoothParams::flatten() order.
struct GradientSample {
  double J = 0.0;
  double Gamma = 0.0;
  std::vector<double> grad_J;      // zeta part is zero
  std::vector<double> grad_Gamma;  // empty when the problem has no formula
};

GradientSample gradients(const Problem& problem, const policy::Policy& pi,
                         const semantics::SmoothParams& zeta, std::span<const double> x0,
                         std::span<const double> delta);

// sum_{x0 in batch} (J + omega * Gamma), recorded on `tape` with theta and
// zeta as inputs (theta first).
ad::Scalar lagrangian_objective(ad::Tape& tape, const Problem& problem, const policy::Policy& pi,
                                const semantics::SmoothParams& zeta,
                                std::span<const std::vector<double>> batch,
                                std::span<const double> delta, std::span<const double> weights);

TrainResult train(const Problem& problem, const TrainConfig& config);

struct ValidationSummary {
  int samples = 0;
  double mean_J = 0.0;
  double mean_Gamma = 0.0;
  double mean_rho = 0.0;
  double min_rho = 0.0;
  double satisfaction_rate = 0.0;
};

// Fresh uniform (x0, delta) samples from stream `seed`.
ValidationSummary validate_policy(const Problem& problem, const policy::Policy& pi,
                                  const semantics::SmoothParams& zeta, int samples,
                                  std::uint64_t seed);

}  // namespace stlforge::trainer
