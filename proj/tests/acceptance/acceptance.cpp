// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers to run a
// subset, e.g. `acceptance 1 2 3`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stlforge/io.hpp"
#include "stlforge/random.hpp"
#include "stlforge/risk.hpp"
#include "stlforge/semantics.hpp"
#include "stlforge/stl.hpp"
#include "stlforge/trainer.hpp"

using namespace stlforge;
using semantics::StateSeq;
using semantics::WeightForm;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %d  %-34s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  return ok;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

// ---------------------------------------------------------------------------
// Random formulas over two signals (x, y) with an independent reference
// evaluator written from the textbook semantics.

struct RNode {
  enum Kind { pred, and_, or_, always, eventually, until } kind = pred;
  double c[3] = {0, 0, 0};
  int cmp = 0;  // 0 >=, 1 >, 2 <=, 3 <
  int a = 0, b = 0;
  std::unique_ptr<RNode> l, r;
};

std::unique_ptr<RNode> random_formula(Rng& rng, int depth, int budget) {
  auto n = std::make_unique<RNode>();
  if (depth == 0 || rng.uniform() < 0.25) {
    for (double& c : n->c) c = rng.uniform(-1, 1);
    n->cmp = uniform_int(rng, 0, 3);
    return n;
  }
  n->kind = static_cast<RNode::Kind>(uniform_int(rng, 1, 5));
  if (n->kind == RNode::and_ || n->kind == RNode::or_) {
    n->l = random_formula(rng, depth - 1, budget);
    n->r = random_formula(rng, depth - 1, budget);
    return n;
  }
  n->b = uniform_int(rng, 0, budget);
  n->a = uniform_int(rng, 0, n->b);
  n->l = random_formula(rng, depth - 1, budget - n->b);
  if (n->kind == RNode::until) n->r = random_formula(rng, depth - 1, budget - n->b);
  return n;
}

std::string to_text(const RNode& n) {
  static const char* cmps[] = {">=", ">", "<=", "<"};
  switch (n.kind) {
    case RNode::pred:
      return fmt("(%.17g)*x + (%.17g)*y + (%.17g) %s 0", n.c[0], n.c[1], n.c[2], cmps[n.cmp]);
    case RNode::and_: return "(" + to_text(*n.l) + ") && (" + to_text(*n.r) + ")";
    case RNode::or_: return "(" + to_text(*n.l) + ") || (" + to_text(*n.r) + ")";
    case RNode::always: return fmt("G[%d,%d]", n.a, n.b) + "(" + to_text(*n.l) + ")";
    case RNode::eventually: return fmt("F[%d,%d]", n.a, n.b) + "(" + to_text(*n.l) + ")";
    case RNode::until:
      return "(" + to_text(*n.l) + ")" + fmt(" U[%d,%d] ", n.a, n.b) + "(" + to_text(*n.r) + ")";
  }
  return {};
}

// Robustness by direct enumeration of the quantifiers.
double oracle_rob(const RNode& n, const std::vector<double>& s, int t) {
  switch (n.kind) {
    case RNode::pred: {
      const double e = n.c[0] * s[2 * t] + n.c[1] * s[2 * t + 1] + n.c[2];
      return n.cmp < 2 ? e : -e;
    }
    case RNode::and_: return std::min(oracle_rob(*n.l, s, t), oracle_rob(*n.r, s, t));
    case RNode::or_: return std::max(oracle_rob(*n.l, s, t), oracle_rob(*n.r, s, t));
    case RNode::always: {
      double r = kInf;
      for (int k = n.a; k <= n.b; ++k) r = std::min(r, oracle_rob(*n.l, s, t + k));
      return r;
    }
    case RNode::eventually: {
      double r = -kInf;
      for (int k = n.a; k <= n.b; ++k) r = std::max(r, oracle_rob(*n.l, s, t + k));
      return r;
    }
    case RNode::until: {
      double r = -kInf;
      for (int k = n.a; k <= n.b; ++k) {
        double v = oracle_rob(*n.r, s, t + k);
        for (int j = 0; j < k; ++j) v = std::min(v, oracle_rob(*n.l, s, t + j));
        r = std::max(r, v);
      }
      return r;
    }
  }
  return 0;
}

struct RandomCase {
  stl::Formula phi;
  std::unique_ptr<RNode> tree;
  std::vector<double> traj;
};

RandomCase random_case(Rng& rng, int max_horizon, int depth) {
  static const std::vector<std::string> vars{"x", "y"};
  const int horizon = uniform_int(rng, 0, max_horizon);
  RandomCase c;
  c.tree = random_formula(rng, depth, horizon);
  c.phi = stl::parse_stl(to_text(*c.tree), vars, std::max(horizon, 1));
  c.traj.resize(2 * static_cast<std::size_t>(horizon + 1));
  for (double& v : c.traj) v = rng.uniform(-1, 1);
  return c;
}

// ---------------------------------------------------------------------------

bool smooth_operator_bounds() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  long violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const int k = uniform_int(rng, 1, 12);
    std::vector<double> v(k), b(k);
    for (double& e : v) e = rng.uniform(-5, 5);
    for (double& e : b) e = rng.uniform(-3, 3);
    const double eta = 1.0 + std::exp(rng.uniform(-6, 5));
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    const double sm = semantics::softmin<double>(v, eta);
    if (sm > lo + 1e-12 || lo - sm > std::log(static_cast<double>(k)) / eta + 1e-12) ++violations;
    for (auto form : {WeightForm::squared, WeightForm::softmax}) {
      const double w = semantics::weighted_average<double>(v, b, form);
      if (w < lo - 1e-12 || w > hi + 1e-12) ++violations;
    }
  }
  const double secs = seconds_since(start);
  return report(1, "smooth operator bounds", violations == 0 && secs < 10.0,
                fmt("1e5 cases, %ld violations, %.2f s (limit 10 s)", violations, secs));
}

bool smooth_robustness_soundness() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(202);
  long unsound = 0, above = 0, positive = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto c = random_case(rng, 10, 3);
    const auto form = rng.uniform() < 0.5 ? WeightForm::squared : WeightForm::softmax;
    auto zeta = semantics::init_smooth_params(c.phi, form);
    auto flat = zeta.flatten();
    for (double& z : flat) z = rng.uniform(-3, 3);
    const StateSeq<double> s{c.traj, 2};
    const double g = semantics::stl2cbf<double>(c.phi, s, flat, form);
    if (g > 0) {
      ++positive;
      if (!semantics::bool_sat(c.phi, s)) ++unsound;
    }
    if (g > semantics::hard_robustness(c.phi, s) + 1e-12) ++above;
  }
  const double secs = seconds_since(start);
  return report(2, "smooth robustness soundness", unsound == 0 && above == 0 && secs < 30.0,
                fmt("1e4 formulas (%ld positive), %ld unsound, %ld above hard, %.2f s", positive,
                    unsound, above, secs));
}

bool hard_robustness_oracle() {
  Rng rng(303);
  double worst = 0;
  long mismatched_sat = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto c = random_case(rng, 8, 3);
    const StateSeq<double> s{c.traj, 2};
    const double want = oracle_rob(*c.tree, c.traj, 0);
    const double got = semantics::hard_robustness(c.phi, s);
    worst = std::max(worst, std::abs(got - want));
    if (std::abs(want) > 1e-9 && semantics::bool_sat(c.phi, s) != (want > 0)) ++mismatched_sat;
  }
  return report(3, "hard robustness oracle", worst <= 1e-12 && mismatched_sat == 0,
                fmt("1e4 cases, max |diff| %.2e (limit 1e-12), %ld sign mismatches", worst,
                    mismatched_sat));
}

// Normwise relative error of an analytic gradient against central differences.
double fd_error(const std::function<double(std::span<const double>)>& f, std::vector<double> at,
                std::span<const double> grad, std::size_t count) {
  const double h = 1e-5;
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double keep = at[i];
    at[i] = keep + h;
    const double up = f(at);
    at[i] = keep - h;
    const double down = f(at);
    at[i] = keep;
    const double fd = (up - down) / (2 * h);
    diff = std::max(diff, std::abs(grad[i] - fd));
    scale = std::max(scale, std::abs(fd));
  }
  return diff / std::max(scale, 1e-12);
}

bool gradient_correctness(const std::filesystem::path& configs) {
  const auto cfg = io::load_config(configs / "unicycle_rho03.json");
  const auto& problem = cfg.problem;
  Rng rng(404);
  double worst_gamma = 0, worst_j = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto pi = policy::init_params(cfg.train.layer_dims, problem.dynamics.default_squash(),
                                  problem.horizon, static_cast<std::uint64_t>(trial));
    std::vector<double> theta(pi.num_params());
    for (double& p : theta) p = rng.uniform(-0.3, 0.3);
    pi.set_params(theta);
    auto zeta = semantics::init_smooth_params(problem.formula, cfg.train.wtavg_form,
                                              static_cast<std::uint64_t>(trial), 0.3);
    const auto x0 = plant::sample_init(problem.init, rng);
    const auto delta = plant::sample_model(problem.dynamics, rng);

    const auto g = trainer::gradients(problem, pi, zeta, x0, delta);
    const std::size_t np = theta.size();
    std::vector<double> joint = theta;
    const auto zflat = zeta.flatten();
    joint.insert(joint.end(), zflat.begin(), zflat.end());

    auto gamma_at = [&](std::span<const double> p) {
      auto q = pi;
      q.set_params(p.first(np));
      auto z = zeta;
      z.assign(p.subspan(np));
      return trainer::stl_objective(problem, q, z, x0, delta);
    };
    auto j_at = [&](std::span<const double> p) {
      auto q = pi;
      q.set_params(p.first(np));
      return trainer::evaluate(problem, q, zeta, x0, delta).J;
    };
    worst_gamma = std::max(worst_gamma, fd_error(gamma_at, joint, g.grad_Gamma, joint.size()));
    worst_j = std::max(worst_j, fd_error(j_at, joint, g.grad_J, np));
  }
  return report(4, "gradient correctness", worst_gamma < 1e-4 && worst_j < 1e-4,
                fmt("100 trials, max rel err Gamma %.2e, J %.2e (limit 1e-4)", worst_gamma,
                    worst_j));
}

bool risk_correctness() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::vector<risk::RiskReport> reports;

  Rng rng(505);
  std::vector<double> rob(100000);
  for (double& r : rob) r = -rng.uniform();
  const std::vector<double> betas{0.95, 0.98, 0.99};
  reports.push_back(risk::risk_from_robustness(rob, betas));
  double worst = 0;
  for (const auto& e : reports.back().entries) worst = std::max(worst, std::abs(e.var - e.beta));
  ok = ok && worst < 0.01;

  std::vector<double> ladder(100);
  for (int i = 0; i < 100; ++i) ladder[i] = -(i + 1.0);
  const std::vector<double> b95{0.95};
  reports.push_back(risk::risk_from_robustness(ladder, b95));
  const auto& e = reports.back().entries[0];
  ok = ok && e.var == 95.0 && std::abs(e.cvar - 97.5) < 1e-12;

  for (int i = 0; i < 20; ++i) {
    std::vector<double> r(1000 + 500 * i);
    for (double& v : r) v = rng.uniform(-2, 2) * rng.uniform();
    const std::vector<double> grid{0.5, 0.9, 0.95, 0.98, 0.99, 0.999};
    reports.push_back(risk::risk_from_robustness(r, grid));
  }
  long broken = 0;
  for (const auto& rep : reports) {
    for (std::size_t k = 0; k < rep.entries.size(); ++k) {
      if (rep.entries[k].cvar < rep.entries[k].var) ++broken;
      if (k > 0 && rep.entries[k].var < rep.entries[k - 1].var) ++broken;
    }
  }
  const double secs = seconds_since(start);
  ok = ok && broken == 0 && secs < 30.0;
  return report(7, "risk measure correctness", ok,
                fmt("uniform max |VaR-beta| %.4f, ladder VaR %.1f CVaR %.2f, %ld invariant "
                    "breaks, %.2f s",
                    worst, e.var, e.cvar, broken, secs));
}

// ---------------------------------------------------------------------------
// Training runs, shared between criteria.

struct Run {
  trainer::TrainResult result;
  trainer::ValidationSummary validation;
};

constexpr std::uint64_t kValidationSeed = 777;

class Runs {
 public:
  explicit Runs(std::filesystem::path configs) : configs_(std::move(configs)) {}

  const io::ProjectConfig& config(const std::string& name) {
    auto it = configs_cache_.find(name);
    if (it == configs_cache_.end()) {
      it = configs_cache_.emplace(name, io::load_config(configs_ / (name + ".json"))).first;
    }
    return it->second;
  }

  const Run& get(const std::string& name, std::uint64_t seed, trainer::Mode mode, int samples) {
    const auto key = fmt("%s/%llu/%d/%d", name.c_str(), static_cast<unsigned long long>(seed),
                         static_cast<int>(mode), samples);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    const auto& cfg = config(name);
    auto tc = cfg.train;
    tc.seed = seed;
    tc.mode = mode;
    Run run;
    run.result = trainer::train(cfg.problem, tc);
    run.validation = trainer::validate_policy(cfg.problem, run.result.policy, run.result.zeta,
                                              samples, kValidationSeed);
    return runs_.emplace(key, std::move(run)).first->second;
  }

 private:
  std::filesystem::path configs_;
  std::map<std::string, io::ProjectConfig> configs_cache_;
  std::map<std::string, Run> runs_;
};

bool unicycle_training(Runs& runs) {
  const auto& cfg = runs.config("unicycle_rho03");
  const auto& r = runs.get("unicycle_rho03", cfg.train.seed, trainer::Mode::switching, 10000);
  const auto& v = r.validation;
  const bool ok = r.result.seconds <= 4 * 1048.0 && v.satisfaction_rate >= 0.95 &&
                  v.mean_rho >= 0.3 && v.mean_rho <= 0.9 && v.mean_Gamma <= v.mean_rho;
  return report(5, "unicycle training", ok,
                fmt("%.0f s (limit 4192), satisfaction %.4f, mean rho %.4f, mean Gamma %.4f, "
                    "mean J %.3f",
                    r.result.seconds, v.satisfaction_rate, v.mean_rho, v.mean_Gamma, v.mean_J));
}

bool margin_tradeoff(Runs& runs) {
  const auto& c3 = runs.config("unicycle_rho03");
  const auto& c5 = runs.config("unicycle_rho05");
  const auto& r3 = runs.get("unicycle_rho03", c3.train.seed, trainer::Mode::switching, 10000);
  const auto& r5 = runs.get("unicycle_rho05", c5.train.seed, trainer::Mode::switching, 10000);
  const std::vector<double> betas{0.95};
  const auto k3 = risk::estimate_risk(c3.problem, r3.result.policy, 100000, betas, c3.risk.seed,
                                      c3.train.threads);
  const auto k5 = risk::estimate_risk(c5.problem, r5.result.policy, 100000, betas, c5.risk.seed,
                                      c5.train.threads);
  const double nv3 = k3.at(0.95).neg_var, nv5 = k5.at(0.95).neg_var;
  const bool same_seed = c3.train.seed == c5.train.seed;
  const bool ok = same_seed && r5.validation.mean_rho > r3.validation.mean_rho &&
                  r5.validation.mean_J < r3.validation.mean_J && nv5 > nv3;
  return report(6, "margin trade-off", ok,
                fmt("rho %.4f -> %.4f, J %.3f -> %.3f, -VaR0.95 %.4f -> %.4f", r3.validation.mean_rho,
                    r5.validation.mean_rho, r3.validation.mean_J, r5.validation.mean_J, nv3, nv5));
}

bool quadrotor_smoke(Runs& runs) {
  const auto& cfg = runs.config("quadrotor_rho01");
  const auto& r = runs.get("quadrotor_rho01", cfg.train.seed, trainer::Mode::switching, 1000);
  // Normalized weights of the top-level disjunction (node 0).
  const auto& b = r.result.zeta.betas.at(0);
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    w[i] = r.result.zeta.form == WeightForm::softmax ? std::exp(b[i]) : b[i] * b[i];
  }
  double total = 0;
  for (double x : w) total += x;
  const double smallest = *std::min_element(w.begin(), w.end()) / total;
  const bool ok = r.result.seconds <= 4 * 155.0 && r.validation.satisfaction_rate >= 0.90 &&
                  smallest < 0.05;
  return report(8, "quadrotor smoke", ok,
                fmt("%.0f s (limit 620), satisfaction %.3f, smallest disjunct weight %.4f",
                    r.result.seconds, r.validation.satisfaction_rate, smallest));
}

bool lagrangian_contrast(Runs& runs) {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& sw = runs.get("unicycle_rho03", seed, trainer::Mode::switching, 1000);
    const auto& lg = runs.get("unicycle_rho03", seed, trainer::Mode::lagrangian, 1000);
    const double a = sw.validation.satisfaction_rate, b = lg.validation.satisfaction_rate;
    if (b < a) ++wins;
    detail += fmt("seed %llu %.3f vs %.3f; ", static_cast<unsigned long long>(seed), b, a);
  }
  detail.resize(detail.size() - 2);
  return report(9, "lagrangian baseline contrast", wins >= 2,
                "lagrangian vs switching satisfaction: " + detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stlforge acceptance suite"};
  std::vector<int> selected;
  std::string configs = STLFORGE_CONFIG_DIR;
  app.add_option("criteria", selected, "Criterion numbers to run (default: all)")
      ->check(CLI::Range(1, 9));
  app.add_option("--configs", configs, "Directory holding the shipped configs");
  CLI11_PARSE(app, argc, argv);
  std::set<int> want(selected.begin(), selected.end());
  if (want.empty()) want = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  Runs runs(configs);
  const std::map<int, std::function<bool()>> criteria{
      {1, smooth_operator_bounds},
      {2, smooth_robustness_soundness},
      {3, hard_robustness_oracle},
      {4, [&] { return gradient_correctness(configs); }},
      {5, [&] { return unicycle_training(runs); }},
      {6, [&] { return margin_tradeoff(runs); }},
      {7, risk_correctness},
      {8, [&] { return quadrotor_smoke(runs); }},
      {9, [&] { return lagrangian_contrast(runs); }},
  };
  int failed = 0;
  for (int id : want) {
    try {
      if (!criteria.at(id)()) ++failed;
    } catch (const std::exception& e) {
      report(id, "error", false, e.what());
      ++failed;
    }
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(want.size()) - failed, want.size());
  return failed == 0 ? 0 : 1;
}
