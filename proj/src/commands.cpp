#include "stlforge/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include "stlforge/error.hpp"
#include "stlforge/io.hpp"
#include "stlforge/random.hpp"
#include "stlforge/risk.hpp"
#include "stlforge/trainer.hpp"

namespace stlforge::cli {

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

const char* kind_name(stl::DisjunctionKind k) {
  switch (k) {
    case stl::DisjunctionKind::or_: return "or";
    case stl::DisjunctionKind::eventually: return "eventually";
    case stl::DisjunctionKind::until: return "until";
  }
  return "?";
}

io::ProjectConfig load(const Options& opt) {
  io::ProjectConfig c = io::load_config(opt.config);
  if (opt.seed) c.train.seed = *opt.seed;
  c.train.threads = opt.threads;
  return c;
}

io::Checkpoint load_matching_checkpoint(const Options& opt, const io::ProjectConfig& c) {
  if (!opt.checkpoint) throw ValidationError("this command needs --checkpoint");
  io::Checkpoint ck = io::load_checkpoint(*opt.checkpoint);
  if (ck.horizon != c.problem.horizon) {
    throw ValidationError("checkpoint horizon " + std::to_string(ck.horizon) +
                          " differs from config horizon " + std::to_string(c.problem.horizon));
  }
  if (ck.policy.input_dim() != c.problem.dynamics.state_dim() + 1 ||
      ck.policy.output_dim() != c.problem.dynamics.control_dim()) {
    throw ValidationError("checkpoint policy dimensions do not match the config's plant");
  }
  if (!c.problem.formula.empty()) {
    try {
      ck.zeta.check_bound(c.problem.formula);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("checkpoint does not match the config formula: ") + e.what());
    }
  }
  return ck;
}

std::filesystem::path output_path(const Options& opt, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : opt.out / p;
}

}  // namespace

int cmd_parse(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::ProjectConfig c = load(opt);
    const auto& p = c.problem;
    out << "config: " << c.name << '\n';
    out << "dynamics: " << p.dynamics.name() << " (" << p.dynamics.state_dim() << " states, "
        << p.dynamics.control_dim() << " controls)\n";
    out << "horizon: " << p.horizon << '\n';
    out << "policy: [";
    for (std::size_t i = 0; i < c.train.layer_dims.size(); ++i) {
      out << (i ? "," : "") << c.train.layer_dims[i];
    }
    out << "], " << policy::param_count(c.train.layer_dims) << " parameters\n";
    out << "reward: " << p.reward.to_string() << '\n';
    if (p.formula.empty()) {
      out << "formula: (none)\n";
      return kOk;
    }
    out << "formula: " << p.formula.to_string() << '\n';
    std::size_t total = 0;
    out << "node_id  kind        weights  beta_slots  subformula\n";
    for (const auto& slot : p.formula.disjunctions()) {
      const std::size_t first = total + 1;
      total += static_cast<std::size_t>(slot.weight_count);
      char row[96];
      std::snprintf(row, sizeof row, "%-8d %-11s %-8d %zu..%-8zu ", slot.node_id,
                    kind_name(slot.kind), slot.weight_count, first, total);
      out << row << slot.subformula << '\n';
    }
    out << "total beta slots: " << total << '\n';
    return kOk;
  });
}

int cmd_train(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::ProjectConfig c = load(opt);
    std::filesystem::create_directories(opt.out);
    trainer::TrainResult result;
    try {
      result = trainer::train(c.problem, c.train);
    } catch (const trainer::TrainingAborted& e) {
      io::write_train_log_csv(output_path(opt, c.paths.log_out), e.log());
      throw;
    }
    io::Checkpoint ck{result.policy, result.zeta, c.problem.horizon, c.train.seed};
    io::save_checkpoint(output_path(opt, c.paths.checkpoint_out), ck);
    io::write_train_log_csv(output_path(opt, c.paths.log_out), result.log);
    out << "trained " << c.train.iterations << " iterations in " << result.seconds << " s\n";
    out << "checkpoint: " << output_path(opt, c.paths.checkpoint_out).string() << '\n';
    out << "log: " << output_path(opt, c.paths.log_out).string() << '\n';
    return kOk;
  });
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::ProjectConfig c = load(opt);
    const io::Checkpoint ck = load_matching_checkpoint(opt, c);
    if (opt.count < 0) throw ValidationError("count must be non-negative");
    const auto dir = output_path(opt, c.paths.traj_out);
    std::filesystem::create_directories(dir);
    std::ofstream summary(dir / "summary.csv");
    if (!summary) throw IoError("cannot write " + (dir / "summary.csv").string());
    summary << "index,J,Gamma,rho,satisfied\n";
    const std::uint64_t seed = opt.seed.value_or(c.train.seed);
    int satisfied = 0;
    for (int i = 0; i < opt.count; ++i) {
      Rng rng = Rng::split(seed, static_cast<std::uint64_t>(i));
      const auto x0 = plant::sample_init(c.problem.init, rng);
      const auto delta = plant::sample_model(c.problem.dynamics, rng);
      const auto traj = plant::simulate(c.problem.dynamics, ck.policy, x0, delta, c.problem.horizon);
      const auto ev = trainer::evaluate(c.problem, ck.policy, ck.zeta, x0, delta);
      char name[32];
      std::snprintf(name, sizeof name, "traj_%05d.csv", i);
      io::write_trajectory_csv(dir / name, traj);
      summary << i << ',' << io::format_double(ev.J) << ',' << io::format_double(ev.Gamma) << ','
              << io::format_double(ev.rho) << ',' << (ev.satisfied ? 1 : 0) << '\n';
      if (ev.satisfied) ++satisfied;
    }
    out << "simulated " << opt.count << " trajectories into " << dir.string() << " ("
        << satisfied << " satisfying)\n";
    return kOk;
  });
}

int cmd_eval(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::ProjectConfig c = load(opt);
    if (!opt.trajectory) throw ValidationError("eval needs --trajectory");
    if (c.problem.formula.empty()) throw ValidationError("config has no formula to evaluate");
    const auto traj = io::read_trajectory_csv(*opt.trajectory);
    if (traj.state_dim != c.problem.dynamics.state_dim()) {
      throw ValidationError("trajectory has " + std::to_string(traj.state_dim) +
                            " state columns, config declares " +
                            std::to_string(c.problem.dynamics.state_dim()));
    }
    semantics::SmoothParams zeta =
        opt.checkpoint ? load_matching_checkpoint(opt, c).zeta
                       : semantics::init_smooth_params(c.problem.formula, c.train.wtavg_form);
    const semantics::StateSeq<double> seq{traj.states, traj.state_dim};
    const auto flat = zeta.flatten();
    nlohmann::json result = {
        {"satisfied", semantics::bool_sat(c.problem.formula, seq)},
        {"rho", semantics::hard_robustness(c.problem.formula, seq)},
        {"Gamma", semantics::stl2cbf<double>(c.problem.formula, seq, flat, zeta.form)},
    };
    out << result.dump(2) << '\n';
    return kOk;
  });
}

int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const io::ProjectConfig c = load(opt);
    const io::Checkpoint ck = load_matching_checkpoint(opt, c);
    const std::size_t N = opt.samples.value_or(c.risk.N);
    const std::uint64_t seed = opt.seed.value_or(c.risk.seed);
    const auto report = risk::estimate_risk(c.problem, ck.policy, N, c.risk.betas, seed, opt.threads);
    std::filesystem::create_directories(opt.out);
    nlohmann::json echo = c.source;
    echo["risk"]["N"] = N;
    echo["risk"]["seed"] = seed;
    const nlohmann::json j = io::risk_report_to_json(report, echo);
    {
      std::ofstream f(opt.out / "risk_report.json");
      if (!f) throw IoError("cannot write risk report");
      f << j.dump(2) << '\n';
    }
    if (c.risk.write_samples) {
      std::ofstream f(opt.out / "robustness_samples.csv");
      if (!f) throw IoError("cannot write robustness samples");
      f << "index,rho\n";
      for (std::size_t i = 0; i < report.robustness.size(); ++i) {
        f << i << ',' << io::format_double(report.robustness[i]) << '\n';
      }
    }
    for (const auto& e : report.entries) {
      out << risk::probabilistic_guarantee(report, e.beta).statement << "  (-CVaR "
          << e.neg_cvar << ")\n";
    }
    out << "satisfaction rate: " << report.summary.satisfaction_rate << " over " << N
        << " samples\n";
    return kOk;
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"stlforge: STL-constrained neural controller training and risk verification"};
  app.require_subcommand(1);
  Options opt;
  std::string checkpoint, trajectory;
  std::uint64_t seed = 0;
  std::size_t samples = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "project config (JSON)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory");
  };
  auto* parse = app.add_subcommand("parse", "validate a config and list disjunctive nodes");
  auto* train = app.add_subcommand("train", "train a controller");
  auto* simulate = app.add_subcommand("simulate", "simulate sampled closed-loop trajectories");
  auto* eval = app.add_subcommand("eval", "evaluate the formula on a trajectory CSV");
  auto* verify = app.add_subcommand("verify", "Monte-Carlo VaR/CVaR of the robustness");
  for (auto* sub : {parse, train, simulate, eval, verify}) add_common(sub);
  for (auto* sub : {simulate, eval, verify}) {
    sub->add_option("--checkpoint", checkpoint, "trained checkpoint (JSON)");
  }
  simulate->add_option("--count", opt.count, "number of trajectories");
  eval->add_option("--trajectory", trajectory, "trajectory CSV")->required();
  verify->add_option("--samples", samples, "override risk.N");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidation;
  }
  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* active = app.get_subcommands().front();
  if (given(active, "--seed")) opt.seed = seed;
  if (active != parse && active != train && given(active, "--checkpoint")) opt.checkpoint = checkpoint;
  if (active == eval) opt.trajectory = trajectory;
  if (active == verify && given(active, "--samples")) opt.samples = samples;

  if (active == parse) return cmd_parse(opt, out, err);
  if (active == train) return cmd_train(opt, out, err);
  if (active == simulate) return cmd_simulate(opt, out, err);
  if (active == eval) return cmd_eval(opt, out, err);
  return cmd_verify(opt, out, err);
}

}  // namespace stlforge::cli
