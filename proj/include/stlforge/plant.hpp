#pragma once

#include <span>
#include <string>
#include <vector>

#include "stlforge/expr.hpp"
#include "stlforge/policy.hpp"
#include "stlforge/random.hpp"
#include "stlforge/tape.hpp"

namespace stlforge::plant {

struct UncertaintyRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

// Discrete-time uncertain plant x' = f(x, u; delta). Either one of the builtin
// presets or one update expression per state over (states, controls,
// uncertainties).
class Dynamics {
 public:
  enum class Kind { unicycle, quadrotor, expression };

  static Dynamics unicycle();
  static Dynamics quadrotor();
  static Dynamics from_expressions(std::vector<std::string> states, std::vector<std::string> controls,
                                   std::vector<UncertaintyRange> uncertainty,
                                   std::span<const std::string> updates);
  static Dynamics preset(const std::string& name);

  Kind kind() const noexcept { return kind_; }
  std::string name() const;
  const std::vector<std::string>& state_names() const noexcept { return states_; }
  const std::vector<std::string>& control_names() const noexcept { return controls_; }
  const std::vector<UncertaintyRange>& uncertainty() const noexcept { return uncertainty_; }
  const std::vector<lang::Expr>& updates() const noexcept { return updates_; }
  int state_dim() const noexcept { return static_cast<int>(states_.size()); }
  int control_dim() const noexcept { return static_cast<int>(controls_.size()); }

  // Output stage matching the preset's actuator limits; empty for expression
  // dynamics.
  const std::vector<policy::Squash>& default_squash() const noexcept { return default_squash_; }

  template <class T>
  std::vector<T> step(std::span<const T> x, std::span<const T> u, std::span<const double> delta) const;

 private:
  Kind kind_ = Kind::expression;
  std::vector<std::string> states_;
  std::vector<std::string> controls_;
  std::vector<UncertaintyRange> uncertainty_;
  std::vector<lang::Expr> updates_;
  std::vector<policy::Squash> default_squash_;
};

// Below this |omega| the unicycle update uses a second-order expansion of
// sin(w)/w and (1 - cos(w))/w instead of dividing by omega.
inline constexpr double kUnicycleOmegaGuard = 1e-6;

struct InitSet {
  enum class Kind { box, ball };
  Kind kind = Kind::box;
  std::vector<double> lo, hi;   // box
  std::vector<double> center;   // ball
  double radius = 0.0;

  static InitSet box(std::vector<double> lo, std::vector<double> hi);
  static InitSet ball(std::vector<double> center, double radius);
  int dim() const noexcept;
  bool contains(std::span<const double> x, double slack = 0.0) const;
};

std::vector<double> sample_init(const InitSet& init, Rng& rng);
std::vector<double> sample_model(const Dynamics& dyn, Rng& rng);

template <class T>
struct RolloutT {
  int state_dim = 0;
  int control_dim = 0;
  std::vector<T> states;    // (H + 1) x n, row-major
  std::vector<T> controls;  // H x m, row-major

  int horizon() const noexcept {
    return state_dim == 0 ? 0 : static_cast<int>(states.size()) / state_dim - 1;
  }
  std::span<const T> state(int k) const {
    return std::span<const T>(states).subspan(static_cast<std::size_t>(k) * state_dim,
                                              static_cast<std::size_t>(state_dim));
  }
};

struct Trajectory : RolloutT<double> {
  std::vector<double> x0;
  std::vector<double> delta;
};

// Closed loop x_{k+1} = f(x_k, pi(x_k, k); delta) for k in [0, H).
template <class T>
RolloutT<T> rollout(const Dynamics& dyn, const policy::Policy& pi, std::span<const T> params,
                    std::span<const double> x0, std::span<const double> delta, int horizon);

Trajectory simulate(const Dynamics& dyn, const policy::Policy& pi, std::span<const double> x0,
                    std::span<const double> delta, int horizon);

extern template std::vector<double> Dynamics::step<double>(std::span<const double>,
                                                           std::span<const double>,
                                                           std::span<const double>) const;
extern template std::vector<ad::Scalar> Dynamics::step<ad::Scalar>(std::span<const ad::Scalar>,
                                                                   std::span<const ad::Scalar>,
                                                                   std::span<const double>) const;
extern template RolloutT<double> rollout<double>(const Dynamics&, const policy::Policy&,
                                                 std::span<const double>, std::span<const double>,
                                                 std::span<const double>, int);
extern template RolloutT<ad::Scalar> rollout<ad::Scalar>(const Dynamics&, const policy::Policy&,
                                                         std::span<const ad::Scalar>,
                                                         std::span<const double>,
                                                         std::span<const double>, int);

}  // namespace stlforge::plant
