#include "stlforge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "parallel.hpp"
#include "stlforge/error.hpp"
#include "stlforge/random.hpp"

namespace stlforge::trainer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

semantics::StateSeq<double> view(const plant::RolloutT<double>& r) {
  return {r.states, r.state_dim};
}

// Distinct tape per call; reserve from the size of the previous one.
std::size_t& tape_size_hint() {
  thread_local std::size_t hint = 4096;
  return hint;
}

}  // namespace

AdamProposal adam_step(const AdamState& state, std::span<const double> grad,
                       const AdamConfig& config) {
  if (grad.size() != state.m.size() || grad.size() != state.v.size()) {
    throw ValidationError("Adam: gradient has " + std::to_string(grad.size()) +
                          " entries, optimizer state has " + std::to_string(state.m.size()));
  }
  AdamProposal p;
  p.next = state;
  p.next.step = state.step + 1;
  p.delta.resize(grad.size());
  const double t = static_cast<double>(p.next.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double& m = p.next.m[i];
    double& v = p.next.v[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grad[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    p.delta[i] = config.alpha * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
  return p;
}

std::string to_string(Branch b) {
  switch (b) {
    case Branch::perf: return "perf";
    case Branch::stl: return "stl";
    case Branch::slow: return "slow";
    case Branch::lagrangian: return "lagrangian";
  }
  return "?";
}

void validate(const TrainConfig& config, const Problem& problem) {
  if (!(config.tau > 1.0)) throw ValidationError("tau must be greater than 1");
  if (config.rho < 0.0 && !std::isinf(config.rho)) throw ValidationError("rho must be >= 0");
  if (!(problem.gamma >= 0.0 && problem.gamma <= 1.0)) {
    throw ValidationError("discount gamma must lie in [0, 1]");
  }
  if (config.batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (config.iterations < 0) throw ValidationError("iteration count must be non-negative");
  if (problem.horizon < 1) throw ValidationError("horizon must be at least 1");
  if (config.lagrange_weight < 0.0) throw ValidationError("Lagrange weight must be non-negative");
  if (config.layer_dims.size() < 2) throw ValidationError("policy needs at least two layer sizes");
  if (config.layer_dims.front() != problem.dynamics.state_dim() + 1) {
    throw ValidationError("policy input dimension " + std::to_string(config.layer_dims.front()) +
                          " must equal state dimension + 1 (" +
                          std::to_string(problem.dynamics.state_dim() + 1) + ")");
  }
  if (config.layer_dims.back() != problem.dynamics.control_dim()) {
    throw ValidationError("policy output dimension must equal the control dimension");
  }
  if (problem.init.dim() != problem.dynamics.state_dim()) {
    throw ValidationError("initial set dimension does not match the state dimension");
  }
  if (!problem.formula.empty() && problem.formula.reach() > problem.horizon) {
    throw ValidationError("formula looks past the horizon");
  }
}

template <class T>
T perf_reward(const plant::RolloutT<T>& traj, const lang::Expr& reward, double gamma) {
  const int steps = traj.horizon() + 1;
  std::vector<T> q;
  std::vector<double> discount;
  q.reserve(static_cast<std::size_t>(steps));
  discount.reserve(static_cast<std::size_t>(steps));
  double g = 1.0;
  for (int k = 0; k < steps; ++k) {
    q.push_back(lang::evaluate<T>(reward, traj.state(k), T(static_cast<double>(k))));
    discount.push_back(g);
    g *= gamma;
  }
  return ad::linear_combination(std::span<const T>(q), std::span<const double>(discount));
}

template double perf_reward<double>(const plant::RolloutT<double>&, const lang::Expr&, double);
template ad::Scalar perf_reward<ad::Scalar>(const plant::RolloutT<ad::Scalar>&, const lang::Expr&,
                                            double);

Evaluation evaluate(const Problem& problem, const policy::Policy& pi,
                    const semantics::SmoothParams& zeta, std::span<const double> x0,
                    std::span<const double> delta) {
  const auto traj = plant::rollout<double>(problem.dynamics, pi, pi.params(), x0, delta,
                                           problem.horizon);
  Evaluation e;
  e.J = perf_reward(traj, problem.reward, problem.gamma);
  if (problem.formula.empty()) {
    e.Gamma = kInf;
    e.rho = kInf;
    e.satisfied = true;
    return e;
  }
  const auto flat = zeta.flatten();
  e.Gamma = semantics::stl2cbf<double>(problem.formula, view(traj), flat, zeta.form);
  e.rho = semantics::hard_robustness(problem.formula, view(traj));
  e.satisfied = semantics::bool_sat(problem.formula, view(traj));
  return e;
}

double stl_objective(const Problem& problem, const policy::Policy& pi,
                     const semantics::SmoothParams& zeta, std::span<const double> x0,
                     std::span<const double> delta) {
  if (problem.formula.empty()) return kInf;
  const auto traj = plant::rollout<double>(problem.dynamics, pi, pi.params(), x0, delta,
                                           problem.horizon);
  const auto flat = zeta.flatten();
  return semantics::stl2cbf<double>(problem.formula, view(traj), flat, zeta.form);
}

namespace {

struct Recorded {
  std::vector<ad::Scalar> theta;
  std::vector<ad::Scalar> zeta;
  ad::Scalar J;
  ad::Scalar Gamma;
  bool has_gamma = false;
};

Recorded record(ad::Tape& tape, const Problem& problem, const policy::Policy& pi,
                const semantics::SmoothParams& zeta, std::span<const double> x0,
                std::span<const double> delta) {
  Recorded r;
  r.theta.reserve(pi.num_params());
  for (double p : pi.params()) r.theta.push_back(tape.input(p));
  for (double z : zeta.flatten()) r.zeta.push_back(tape.input(z));
  const auto traj = plant::rollout<ad::Scalar>(problem.dynamics, pi, r.theta, x0, delta,
                                               problem.horizon);
  r.J = perf_reward(traj, problem.reward, problem.gamma);
  if (!problem.formula.empty()) {
    const semantics::StateSeq<ad::Scalar> seq{traj.states, traj.state_dim};
    r.Gamma = semantics::stl2cbf<ad::Scalar>(problem.formula, seq, r.zeta, zeta.form);
    r.has_gamma = true;
  }
  return r;
}

}  // namespace

GradientSample gradients(const Problem& problem, const policy::Policy& pi,
                         const semantics::SmoothParams& zeta, std::span<const double> x0,
                         std::span<const double> delta) {
  ad::Tape tape(tape_size_hint());
  const Recorded r = record(tape, problem, pi, zeta, x0, delta);
  tape_size_hint() = tape.size();

  GradientSample g;
  g.J = r.J.value();
  g.grad_J = tape.backward(r.J);
  std::fill(g.grad_J.begin() + static_cast<std::ptrdiff_t>(pi.num_params()), g.grad_J.end(), 0.0);
  if (r.has_gamma) {
    g.Gamma = r.Gamma.value();
    g.grad_Gamma = tape.backward(r.Gamma);
  } else {
    g.Gamma = kInf;
  }
  return g;
}

ad::Scalar lagrangian_objective(ad::Tape& tape, const Problem& problem, const policy::Policy& pi,
                                const semantics::SmoothParams& zeta,
                                std::span<const std::vector<double>> batch,
                                std::span<const double> delta, std::span<const double> weights) {
  if (weights.size() != batch.size()) {
    throw ValidationError("need one Lagrange weight per batch state");
  }
  for (double w : weights) {
    if (w < 0.0) throw ValidationError("Lagrange weights must be non-negative");
  }
  std::vector<ad::Scalar> theta;
  std::vector<ad::Scalar> z;
  for (double p : pi.params()) theta.push_back(tape.input(p));
  for (double v : zeta.flatten()) z.push_back(tape.input(v));
  std::vector<ad::Scalar> terms;
  std::vector<double> coeffs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto traj = plant::rollout<ad::Scalar>(problem.dynamics, pi, theta, batch[i], delta,
                                                 problem.horizon);
    terms.push_back(perf_reward(traj, problem.reward, problem.gamma));
    coeffs.push_back(1.0);
    if (!problem.formula.empty() && weights[i] != 0.0) {
      const semantics::StateSeq<ad::Scalar> seq{traj.states, traj.state_dim};
      terms.push_back(semantics::stl2cbf<ad::Scalar>(problem.formula, seq, z, zeta.form));
      coeffs.push_back(weights[i]);
    }
  }
  return ad::linear_combination(std::span<const ad::Scalar>(terms), std::span<const double>(coeffs));
}

namespace {

// Joint (theta, zeta) vector helpers.
std::vector<double> joint(const policy::Policy& pi, const semantics::SmoothParams& zeta) {
  std::vector<double> v(pi.params().begin(), pi.params().end());
  const auto z = zeta.flatten();
  v.insert(v.end(), z.begin(), z.end());
  return v;
}

void apply_increment(policy::Policy& pi, semantics::SmoothParams& zeta,
                     std::span<const double> increment, double scale) {
  std::vector<double> v = joint(pi, zeta);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += increment[i] / scale;
  const std::size_t p = pi.num_params();
  pi.set_params(std::span<const double>(v).first(p));
  zeta.assign(std::span<const double>(v).subspan(p));
}

void check_finite(std::span<const double> v, const char* what, int iter, const TrainLog& log) {
  if (!all_finite(v)) {
    throw TrainingAborted("non-finite " + std::string(what) + " at iteration " +
                              std::to_string(iter),
                          log);
  }
}

void check_zeta(const semantics::SmoothParams& zeta, int iter, const TrainLog& log) {
  if (!std::isfinite(zeta.lambda) || !(zeta.eta() >= 1.0)) {
    throw TrainingAborted("invalid softmin sharpness at iteration " + std::to_string(iter), log);
  }
}

TrainResult train_switching(const Problem& problem, const TrainConfig& config,
                            policy::Policy pi, semantics::SmoothParams zeta,
                            std::vector<std::vector<double>> batch) {
  const std::size_t dim = pi.num_params() + zeta.size();
  AdamState perf_opt(dim);
  AdamState stl_opt(dim);
  TrainLog log;
  log.reserve(static_cast<std::size_t>(config.iterations));
  std::vector<GradientSample> samples(batch.size());

  for (int iter = 0; iter < config.iterations; ++iter) {
    Rng rng = Rng::split(config.seed, static_cast<std::uint64_t>(iter) + 1);
    const std::vector<double> delta = plant::sample_model(problem.dynamics, rng);

    detail::parallel_for(batch.size(), config.threads, [&](std::size_t i) {
      samples[i] = gradients(problem, pi, zeta, batch[i], delta);
    });

    // Ties go to the lowest batch index.
    LogRecord rec;
    rec.iter = iter;
    rec.norm_d1 = -1.0;
    rec.norm_d2 = -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      check_finite(samples[i].grad_J, "performance gradient", iter, log);
      check_finite(samples[i].grad_Gamma, "robustness gradient", iter, log);
      const double n1 = norm2(samples[i].grad_J);
      const double n2 = norm2(samples[i].grad_Gamma);
      if (n1 > rec.norm_d1) {
        rec.norm_d1 = n1;
        rec.b1 = static_cast<int>(i);
      }
      if (n2 > rec.norm_d2) {
        rec.norm_d2 = n2;
        rec.b2 = static_cast<int>(i);
      }
    }
    const auto& d1 = samples[static_cast<std::size_t>(rec.b1)].grad_J;
    std::vector<double> d2 = samples[static_cast<std::size_t>(rec.b2)].grad_Gamma;
    if (d2.empty()) d2.assign(dim, 0.0);

    AdamProposal perf = adam_step(perf_opt, d1, config.adam);
    AdamProposal robust = adam_step(stl_opt, d2, config.adam);

    const std::vector<double> x_fresh = plant::sample_init(problem.init, rng);
    const Evaluation current = evaluate(problem, pi, zeta, x_fresh, delta);
    rec.J = current.J;
    rec.Gamma = current.Gamma;

    if (current.Gamma <= config.rho) {
      policy::Policy pi_perf = pi;
      semantics::SmoothParams zeta_perf = zeta;
      apply_increment(pi_perf, zeta_perf, perf.delta, 1.0);
      rec.Gamma_candidate = stl_objective(problem, pi_perf, zeta_perf, x_fresh, delta);
      if (rec.Gamma_candidate >= current.Gamma) {
        pi = std::move(pi_perf);
        zeta = std::move(zeta_perf);
        perf_opt = std::move(perf.next);
        rec.branch = Branch::perf;
      } else {
        apply_increment(pi, zeta, robust.delta, 1.0);
        stl_opt = std::move(robust.next);
        rec.branch = Branch::stl;
      }
    } else {
      apply_increment(pi, zeta, perf.delta, config.tau);
      perf_opt = std::move(perf.next);
      rec.branch = Branch::slow;
    }
    log.push_back(rec);
    check_finite(pi.params(), "policy parameters", iter, log);
    check_zeta(zeta, iter, log);
  }
  return {std::move(pi), std::move(zeta), std::move(log), 0.0};
}

TrainResult train_lagrangian(const Problem& problem, const TrainConfig& config,
                             policy::Policy pi, semantics::SmoothParams zeta,
                             std::vector<std::vector<double>> batch) {
  const std::size_t dim = pi.num_params() + zeta.size();
  AdamState opt(dim);
  TrainLog log;
  log.reserve(static_cast<std::size_t>(config.iterations));
  const std::vector<double> weights(batch.size(), config.lagrange_weight);
  std::vector<GradientSample> samples(batch.size());

  for (int iter = 0; iter < config.iterations; ++iter) {
    Rng rng = Rng::split(config.seed, static_cast<std::uint64_t>(iter) + 1);
    const std::vector<double> delta = plant::sample_model(problem.dynamics, rng);

    // Per-state gradients summed in batch order equal the gradient of the
    // summed objective.
    detail::parallel_for(batch.size(), config.threads, [&](std::size_t i) {
      samples[i] = gradients(problem, pi, zeta, batch[i], delta);
    });
    std::vector<double> grad(dim, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      check_finite(samples[i].grad_J, "performance gradient", iter, log);
      check_finite(samples[i].grad_Gamma, "robustness gradient", iter, log);
      for (std::size_t k = 0; k < dim; ++k) grad[k] += samples[i].grad_J[k];
      if (!samples[i].grad_Gamma.empty()) {
        for (std::size_t k = 0; k < dim; ++k) grad[k] += weights[i] * samples[i].grad_Gamma[k];
      }
    }
    AdamProposal step = adam_step(opt, grad, config.adam);

    const std::vector<double> x_fresh = plant::sample_init(problem.init, rng);
    const Evaluation current = evaluate(problem, pi, zeta, x_fresh, delta);
    LogRecord rec;
    rec.iter = iter;
    rec.branch = Branch::lagrangian;
    rec.J = current.J;
    rec.Gamma = current.Gamma;
    rec.norm_d1 = norm2(grad);
    rec.norm_d2 = 0.0;
    apply_increment(pi, zeta, step.delta, 1.0);
    opt = std::move(step.next);
    log.push_back(rec);
    check_finite(pi.params(), "policy parameters", iter, log);
    check_zeta(zeta, iter, log);
  }
  return {std::move(pi), std::move(zeta), std::move(log), 0.0};
}

}  // namespace

TrainResult train(const Problem& problem, const TrainConfig& config) {
  validate(config, problem);
  const auto start = std::chrono::steady_clock::now();

  std::vector<policy::Squash> squash =
      config.squash.empty() ? problem.dynamics.default_squash() : config.squash;
  policy::Policy pi = policy::init_params(config.layer_dims, squash, problem.horizon,
                                          Rng::splitmix64(config.seed));
  semantics::SmoothParams zeta =
      problem.formula.empty() ? semantics::SmoothParams{1.0, {}, config.wtavg_form}
                              : semantics::init_smooth_params(problem.formula, config.wtavg_form);

  Rng batch_rng = Rng::split(config.seed, 0);
  std::vector<std::vector<double>> batch;
  for (int i = 0; i < config.batch_size; ++i) batch.push_back(plant::sample_init(problem.init, batch_rng));

  TrainResult result = config.mode == Mode::switching
                           ? train_switching(problem, config, std::move(pi), std::move(zeta),
                                             std::move(batch))
                           : train_lagrangian(problem, config, std::move(pi), std::move(zeta),
                                              std::move(batch));
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ValidationSummary validate_policy(const Problem& problem, const policy::Policy& pi,
                                  const semantics::SmoothParams& zeta, int samples,
                                  std::uint64_t seed) {
  ValidationSummary s;
  s.samples = samples;
  if (samples <= 0) return s;
  s.min_rho = kInf;
  int satisfied = 0;
  for (int i = 0; i < samples; ++i) {
    Rng rng = Rng::split(seed, static_cast<std::uint64_t>(i));
    const auto x0 = plant::sample_init(problem.init, rng);
    const auto delta = plant::sample_model(problem.dynamics, rng);
    const Evaluation e = evaluate(problem, pi, zeta, x0, delta);
    s.mean_J += e.J;
    s.mean_Gamma += e.Gamma;
    s.mean_rho += e.rho;
    s.min_rho = std::min(s.min_rho, e.rho);
    if (e.satisfied) ++satisfied;
  }
  s.mean_J /= samples;
  s.mean_Gamma /= samples;
  s.mean_rho /= samples;
  s.satisfaction_rate = static_cast<double>(satisfied) / samples;
  return s;
}

}  // namespace stlforge::trainer
