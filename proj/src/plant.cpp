#include "stlforge/plant.hpp"

#include <cmath>

#include "stlforge/error.hpp"

namespace stlforge::plant {

namespace {

constexpr double kGravity = 9.81;
constexpr double kQuadStep = 0.05;
constexpr double kQuadTilt = 0.4905;  // g * T

template <class T>
std::vector<T> unicycle_step(std::span<const T> x, std::span<const T> u, double delta) {
  const T& px = x[0];
  const T& py = x[1];
  const T& alpha = x[2];
  const T& v = u[0];
  const T& w = u[1];
  const T scale(1.0 + delta);

  T dx, dy;
  if (std::abs(ad::value_of(w)) < kUnicycleOmegaGuard) {
    // sin(w)/w ~ 1 - w^2/6, (1 - cos w)/w ~ w/2.
    const T c = ad::cos(alpha);
    const T s = ad::sin(alpha);
    const T sinc = T(1.0) - w * w * T(1.0 / 6.0);
    const T half = w * T(0.5);
    dx = v * (c * sinc - s * half);
    dy = v * (s * sinc + c * half);
  } else {
    const T turned = alpha + w;
    const T ratio = v / w;
    dx = ratio * (ad::sin(turned) - ad::sin(alpha));
    dy = ratio * (ad::cos(alpha) - ad::cos(turned));
  }
  return {scale * px + dx, scale * py + dy, scale * alpha + w};
}

template <class T>
std::vector<T> quadrotor_step(std::span<const T> x, std::span<const T> u, double delta) {
  for (int i = 0; i < 2; ++i) {
    if (!(std::abs(ad::value_of(u[static_cast<std::size_t>(i)])) < 1.0)) {
      throw DomainError("quadrotor tilt command outside (-1, 1) rad");
    }
  }
  const T scale(1.0 + delta);
  const T dt(kQuadStep);
  const T tilt(kQuadTilt);
  return {
      scale * x[0] + dt * x[3],
      scale * x[1] + dt * x[4],
      scale * x[2] + dt * x[5],
      scale * x[3] + tilt * ad::tan(u[0]),
      scale * x[4] - tilt * ad::tan(u[1]),
      scale * x[5] + dt * (T(kGravity) - u[2]),
  };
}

}  // namespace

Dynamics Dynamics::unicycle() {
  Dynamics d;
  d.kind_ = Kind::unicycle;
  d.states_ = {"x", "y", "alpha"};
  d.controls_ = {"v", "omega"};
  d.uncertainty_ = {{"delta", -0.01, 0.01}};
  // v = sigmoid(0.5 a1) in (0, 1), omega = 0.5 tanh(0.5 a2) in (-0.5, 0.5).
  d.default_squash_ = {{policy::SquashKind::sigmoid, 0.5, 1.0, 0.0},
                       {policy::SquashKind::tanh, 0.5, 0.5, 0.0}};
  return d;
}

Dynamics Dynamics::quadrotor() {
  Dynamics d;
  d.kind_ = Kind::quadrotor;
  d.states_ = {"x", "y", "z", "vx", "vy", "vz"};
  d.controls_ = {"u1", "u2", "u3"};
  d.uncertainty_ = {{"delta", -0.01, 0.01}};
  // u1, u2 = 0.1 tanh(0.1 a), g - u3 = 2 tanh(0.1 a3).
  d.default_squash_ = {{policy::SquashKind::tanh, 0.1, 0.1, 0.0},
                       {policy::SquashKind::tanh, 0.1, 0.1, 0.0},
                       {policy::SquashKind::tanh, 0.1, -2.0, kGravity}};
  return d;
}

Dynamics Dynamics::preset(const std::string& name) {
  if (name == "unicycle") return unicycle();
  if (name == "quadrotor") return quadrotor();
  throw ValidationError("unknown dynamics preset '" + name + "'");
}

Dynamics Dynamics::from_expressions(std::vector<std::string> states, std::vector<std::string> controls,
                                    std::vector<UncertaintyRange> uncertainty,
                                    std::span<const std::string> updates) {
  if (states.empty()) throw ValidationError("dynamics need at least one state");
  if (updates.size() != states.size()) {
    throw ValidationError("expected one update expression per state (" +
                          std::to_string(states.size()) + "), got " +
                          std::to_string(updates.size()));
  }
  for (const auto& r : uncertainty) {
    if (r.lo > r.hi) throw ValidationError("uncertainty range of '" + r.name + "' is empty");
  }
  Dynamics d;
  d.kind_ = Kind::expression;
  d.states_ = std::move(states);
  d.controls_ = std::move(controls);
  d.uncertainty_ = std::move(uncertainty);
  std::vector<std::string> names = d.states_;
  names.insert(names.end(), d.controls_.begin(), d.controls_.end());
  for (const auto& r : d.uncertainty_) names.push_back(r.name);
  for (const auto& text : updates) d.updates_.push_back(lang::parse_expr(text, names));
  return d;
}

std::string Dynamics::name() const {
  switch (kind_) {
    case Kind::unicycle: return "unicycle";
    case Kind::quadrotor: return "quadrotor";
    case Kind::expression: return "expression";
  }
  return "expression";
}

template <class T>
std::vector<T> Dynamics::step(std::span<const T> x, std::span<const T> u,
                              std::span<const double> delta) const {
  if (x.size() != states_.size() || u.size() != controls_.size() ||
      delta.size() != uncertainty_.size()) {
    throw ValidationError("step: dimension mismatch");
  }
  switch (kind_) {
    case Kind::unicycle: return unicycle_step<T>(x, u, delta[0]);
    case Kind::quadrotor: return quadrotor_step<T>(x, u, delta[0]);
    case Kind::expression: break;
  }
  std::vector<T> env(x.begin(), x.end());
  env.insert(env.end(), u.begin(), u.end());
  for (double d : delta) env.push_back(T(d));
  std::vector<T> next;
  next.reserve(x.size());
  for (const auto& update : updates_) next.push_back(lang::evaluate<T>(update, env, T(0.0)));
  return next;
}

template std::vector<double> Dynamics::step<double>(std::span<const double>,
                                                    std::span<const double>,
                                                    std::span<const double>) const;
template std::vector<ad::Scalar> Dynamics::step<ad::Scalar>(std::span<const ad::Scalar>,
                                                            std::span<const ad::Scalar>,
                                                            std::span<const double>) const;

InitSet InitSet::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size() || lo.empty()) throw ValidationError("box bounds must match in size");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) throw ValidationError("box lower bound exceeds upper bound");
  }
  InitSet s;
  s.kind = Kind::box;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

InitSet InitSet::ball(std::vector<double> center, double radius) {
  if (center.empty()) throw ValidationError("ball center is empty");
  if (!(radius > 0.0)) throw ValidationError("ball radius must be positive");
  InitSet s;
  s.kind = Kind::ball;
  s.center = std::move(center);
  s.radius = radius;
  return s;
}

int InitSet::dim() const noexcept {
  return static_cast<int>(kind == Kind::box ? lo.size() : center.size());
}

bool InitSet::contains(std::span<const double> x, double slack) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  if (kind == Kind::box) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    }
    return true;
  }
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - center[i]) * (x[i] - center[i]);
  return std::sqrt(r2) <= radius + slack;
}

std::vector<double> sample_init(const InitSet& init, Rng& rng) {
  std::vector<double> x(static_cast<std::size_t>(init.dim()));
  if (init.kind == InitSet::Kind::box) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(init.lo[i], init.hi[i]);
    return x;
  }
  // Rejection from the bounding cube.
  for (;;) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = rng.uniform(-init.radius, init.radius);
      x[i] = d;
      r2 += d * d;
    }
    if (r2 <= init.radius * init.radius) break;
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += init.center[i];
  return x;
}

std::vector<double> sample_model(const Dynamics& dyn, Rng& rng) {
  std::vector<double> delta;
  delta.reserve(dyn.uncertainty().size());
  for (const auto& r : dyn.uncertainty()) delta.push_back(rng.uniform(r.lo, r.hi));
  return delta;
}

template <class T>
RolloutT<T> rollout(const Dynamics& dyn, const policy::Policy& pi, std::span<const T> params,
                    std::span<const double> x0, std::span<const double> delta, int horizon) {
  if (horizon < 1) throw ValidationError("rollout horizon must be at least 1");
  if (static_cast<int>(x0.size()) != dyn.state_dim()) {
    throw ValidationError("initial state has dimension " + std::to_string(x0.size()) +
                          ", plant expects " + std::to_string(dyn.state_dim()));
  }
  if (pi.output_dim() != dyn.control_dim()) {
    throw ValidationError("policy output dimension does not match plant control dimension");
  }
  RolloutT<T> r;
  r.state_dim = dyn.state_dim();
  r.control_dim = dyn.control_dim();
  const auto n = static_cast<std::size_t>(r.state_dim);
  r.states.reserve((static_cast<std::size_t>(horizon) + 1) * n);
  r.controls.reserve(static_cast<std::size_t>(horizon) * static_cast<std::size_t>(r.control_dim));
  for (double v : x0) r.states.push_back(T(v));
  for (int k = 0; k < horizon; ++k) {
    const std::vector<T> x(r.states.end() - static_cast<std::ptrdiff_t>(n), r.states.end());
    const std::vector<T> u = pi.forward<T>(params, x, k);
    const std::vector<T> next = dyn.step<T>(x, u, delta);
    r.controls.insert(r.controls.end(), u.begin(), u.end());
    r.states.insert(r.states.end(), next.begin(), next.end());
  }
  return r;
}

template RolloutT<double> rollout<double>(const Dynamics&, const policy::Policy&,
                                          std::span<const double>, std::span<const double>,
                                          std::span<const double>, int);
template RolloutT<ad::Scalar> rollout<ad::Scalar>(const Dynamics&, const policy::Policy&,
                                                  std::span<const ad::Scalar>,
                                                  std::span<const double>,
                                                  std::span<const double>, int);

Trajectory simulate(const Dynamics& dyn, const policy::Policy& pi, std::span<const double> x0,
                    std::span<const double> delta, int horizon) {
  Trajectory t;
  static_cast<RolloutT<double>&>(t) = rollout<double>(dyn, pi, pi.params(), x0, delta, horizon);
  t.x0.assign(x0.begin(), x0.end());
  t.delta.assign(delta.begin(), delta.end());
  return t;
}

}  // namespace stlforge::plant
