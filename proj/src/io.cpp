#include "stlforge/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stlforge/error.hpp"

namespace stlforge::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

semantics::WeightForm weight_form_from_string(const std::string& s) {
  if (s == "squared") return semantics::WeightForm::squared;
  if (s == "softmax") return semantics::WeightForm::softmax;
  throw ValidationError("unknown weighted-average form '" + s + "' (squared|softmax)");
}

std::string to_string(semantics::WeightForm f) {
  return f == semantics::WeightForm::squared ? "squared" : "softmax";
}

std::vector<policy::Squash> parse_squash(const json& arr) {
  std::vector<policy::Squash> out;
  for (const auto& s : arr) {
    policy::Squash q;
    q.kind = policy::squash_kind_from_string(s.at("kind").get<std::string>());
    q.pre_scale = get_or(s, "pre_scale", 1.0);
    q.gain = get_or(s, "gain", 1.0);
    q.offset = get_or(s, "offset", 0.0);
    out.push_back(q);
  }
  return out;
}

json squash_to_json(const std::vector<policy::Squash>& squash) {
  json arr = json::array();
  for (const auto& q : squash) {
    arr.push_back({{"kind", policy::to_string(q.kind)},
                   {"pre_scale", q.pre_scale},
                   {"gain", q.gain},
                   {"offset", q.offset}});
  }
  return arr;
}

plant::Dynamics parse_dynamics(const json& j) {
  if (j.contains("preset")) return plant::Dynamics::preset(j.at("preset").get<std::string>());
  std::vector<plant::UncertaintyRange> unc;
  for (const auto& u : j.value("uncertainty", json::array())) {
    unc.push_back({u.at("name").get<std::string>(), u.at("lo").get<double>(), u.at("hi").get<double>()});
  }
  const auto updates = j.at("updates").get<std::vector<std::string>>();
  return plant::Dynamics::from_expressions(j.at("states").get<std::vector<std::string>>(),
                                           j.value("controls", std::vector<std::string>{}),
                                           std::move(unc), updates);
}

plant::InitSet parse_init(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "box") {
    return plant::InitSet::box(j.at("lo").get<std::vector<double>>(),
                               j.at("hi").get<std::vector<double>>());
  }
  if (kind == "ball") {
    return plant::InitSet::ball(j.at("center").get<std::vector<double>>(),
                                j.at("radius").get<double>());
  }
  throw ValidationError("unknown initial set kind '" + kind + "' (box|ball)");
}

trainer::Mode mode_from_string(const std::string& s) {
  if (s == "switching") return trainer::Mode::switching;
  if (s == "lagrangian") return trainer::Mode::lagrangian;
  throw ValidationError("unknown training mode '" + s + "' (switching|lagrangian)");
}

}  // namespace

ProjectConfig parse_config(const json& j) {
  try {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    ProjectConfig c;
    c.source = j;
    c.name = get_or<std::string>(j, "name", "project");
    auto& p = c.problem;
    p.dynamics = parse_dynamics(j.at("dynamics"));
    p.init = parse_init(j.at("init_set"));
    p.horizon = j.at("horizon").get<int>();
    if (p.horizon < 1) throw ValidationError("horizon must be at least 1");
    p.gamma = get_or(j, "gamma", 0.9);

    const auto& vars = p.dynamics.state_names();
    lang::Definitions defs;
    if (j.contains("definitions")) {
      for (const auto& [name, text] : j.at("definitions").items()) {
        c.definition_texts[name] = text.get<std::string>();
        defs.emplace(name, lang::parse_expr(c.definition_texts[name], vars, defs));
      }
    }
    c.formula_text = get_or<std::string>(j, "formula", "");
    if (!c.formula_text.empty()) {
      p.formula = stl::parse_stl(c.formula_text, vars, p.horizon, defs);
      if (p.formula.reach() > p.horizon) {
        throw ValidationError("formula needs " + std::to_string(p.formula.reach()) +
                              " steps but the horizon is " + std::to_string(p.horizon));
      }
    }
    c.reward_text = j.at("reward").get<std::string>();
    p.reward = lang::parse_expr(c.reward_text, vars, defs);

    auto& t = c.train;
    const json pol = j.value("policy", json::object());
    t.layer_dims = pol.at("layer_dims").get<std::vector<int>>();
    if (get_or<std::string>(pol, "activation", "tanh") != "tanh") {
      throw ValidationError("only tanh hidden activations are supported");
    }
    if (pol.contains("squash")) {
      t.squash = parse_squash(pol.at("squash"));
    } else if (!p.dynamics.default_squash().empty()) {
      t.squash = p.dynamics.default_squash();
    } else {
      throw ValidationError("expression dynamics need explicit policy.squash descriptors");
    }

    const json tr = j.value("train", json::object());
    t.rho = get_or(tr, "rho", t.rho);
    t.tau = get_or(tr, "tau", t.tau);
    t.iterations = get_or(tr, "iterations", t.iterations);
    t.batch_size = get_or(tr, "batch_size", t.batch_size);
    t.seed = get_or<std::uint64_t>(tr, "seed", 0);
    t.wtavg_form = weight_form_from_string(get_or<std::string>(tr, "wtavg_form", "squared"));
    t.mode = mode_from_string(get_or<std::string>(tr, "mode", "switching"));
    t.lagrange_weight = get_or(tr, "lagrange_weight", t.lagrange_weight);
    t.threads = get_or(tr, "threads", t.threads);
    if (tr.contains("adam")) {
      const auto& a = tr.at("adam");
      t.adam.alpha = get_or(a, "alpha", t.adam.alpha);
      t.adam.beta1 = get_or(a, "beta1", t.adam.beta1);
      t.adam.beta2 = get_or(a, "beta2", t.adam.beta2);
      t.adam.epsilon = get_or(a, "epsilon", t.adam.epsilon);
    }
    trainer::validate(t, p);
    if (static_cast<int>(t.squash.size()) != p.dynamics.control_dim()) {
      throw ValidationError("need one squash descriptor per control input");
    }

    const json rk = j.value("risk", json::object());
    c.risk.N = get_or<std::size_t>(rk, "N", c.risk.N);
    c.risk.betas = get_or(rk, "betas", c.risk.betas);
    c.risk.seed = get_or<std::uint64_t>(rk, "seed", c.risk.seed);
    c.risk.write_samples = get_or(rk, "write_samples", false);
    for (double b : c.risk.betas) {
      if (!(b > 0.0 && b < 1.0)) throw ValidationError("risk betas must lie in (0, 1)");
    }

    const json paths = j.value("paths", json::object());
    c.paths.checkpoint_out = get_or(paths, "checkpoint_out", c.paths.checkpoint_out);
    c.paths.log_out = get_or(paths, "log_out", c.paths.log_out);
    c.paths.traj_out = get_or(paths, "traj_out", c.paths.traj_out);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  if (buf.str().find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("config '" + path.string() + "' is empty");
  }
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j);
}

json checkpoint_to_json(const Checkpoint& ck) {
  const auto& pi = ck.policy;
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < pi.num_layers(); ++l) {
    const auto w0 = pi.weight_offset(l);
    const auto b0 = pi.bias_offset(l);
    const auto b1 = b0 + static_cast<std::size_t>(pi.layer_dims()[l + 1]);
    weights.push_back(std::vector<double>(pi.params().begin() + static_cast<std::ptrdiff_t>(w0),
                                          pi.params().begin() + static_cast<std::ptrdiff_t>(b0)));
    biases.push_back(std::vector<double>(pi.params().begin() + static_cast<std::ptrdiff_t>(b0),
                                         pi.params().begin() + static_cast<std::ptrdiff_t>(b1)));
  }
  json betas = json::object();
  for (const auto& [id, b] : ck.zeta.betas) betas[std::to_string(id)] = b;
  return {
      {"format_version", kFormatVersion},
      {"layer_dims", pi.layer_dims()},
      {"activation", "tanh"},
      {"squash", squash_to_json(pi.squash())},
      {"weights", weights},
      {"biases", biases},
      {"zeta", {{"lambda", ck.zeta.lambda}, {"form", to_string(ck.zeta.form)}, {"betas", betas}}},
      {"horizon", ck.horizon},
      {"seed", ck.seed},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw ValidationError("unsupported checkpoint format version");
    }
    Checkpoint ck;
    ck.horizon = j.at("horizon").get<int>();
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.policy = policy::Policy(j.at("layer_dims").get<std::vector<int>>(),
                               parse_squash(j.at("squash")), ck.horizon);
    std::vector<double> params;
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != ck.policy.num_layers() || biases.size() != ck.policy.num_layers()) {
      throw ValidationError("checkpoint layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l < ck.policy.num_layers(); ++l) {
      const auto w = weights.at(l).get<std::vector<double>>();
      const auto b = biases.at(l).get<std::vector<double>>();
      params.insert(params.end(), w.begin(), w.end());
      params.insert(params.end(), b.begin(), b.end());
    }
    ck.policy.set_params(params);
    const auto& z = j.at("zeta");
    ck.zeta.lambda = z.at("lambda").get<double>();
    ck.zeta.form = weight_form_from_string(z.value("form", std::string("squared")));
    for (const auto& [key, b] : z.at("betas").items()) {
      ck.zeta.betas[std::stoi(key)] = b.get<std::vector<double>>();
    }
    return ck;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(ck).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint '" + path.string() + "': " + e.what());
  }
}

void write_trajectory_csv(std::ostream& out, const plant::RolloutT<double>& traj) {
  out << "k";
  for (int i = 0; i < traj.state_dim; ++i) out << ",x_" << i;
  for (int i = 0; i < traj.control_dim; ++i) out << ",u_" << i;
  out << '\n';
  const int H = traj.horizon();
  for (int k = 0; k <= H; ++k) {
    out << k;
    for (double v : traj.state(k)) out << ',' << format_double(v);
    for (int i = 0; i < traj.control_dim; ++i) {
      out << ',';
      if (k < H) out << format_double(traj.controls[static_cast<std::size_t>(k * traj.control_dim + i)]);
    }
    out << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const plant::RolloutT<double>& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory '" + path.string() + "'");
  write_trajectory_csv(out, traj);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("malformed number '" + cell + "' on line " + std::to_string(line_no));
  }
}

}  // namespace

plant::RolloutT<double> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trajectory CSV is empty");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "k") throw ValidationError("trajectory CSV must start with column k");
  plant::RolloutT<double> traj;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] == "x_" + std::to_string(traj.state_dim)) {
      if (traj.control_dim != 0) throw ValidationError("state columns must precede control columns");
      ++traj.state_dim;
    } else if (header[i] == "u_" + std::to_string(traj.control_dim)) {
      ++traj.control_dim;
    } else {
      throw ValidationError("unexpected trajectory column '" + header[i] + "'");
    }
  }
  if (traj.state_dim == 0) throw ValidationError("trajectory CSV has no state columns");
  int line_no = 1;
  int expected_k = 0;
  std::vector<std::vector<double>> pending_controls;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(header.size()));
    }
    if (parse_cell(cells[0], line_no) != expected_k) {
      throw ValidationError("line " + std::to_string(line_no) + ": step index out of order");
    }
    ++expected_k;
    for (int i = 0; i < traj.state_dim; ++i) {
      traj.states.push_back(parse_cell(cells[static_cast<std::size_t>(1 + i)], line_no));
    }
    std::vector<double> u;
    bool blank = true;
    for (int i = 0; i < traj.control_dim; ++i) {
      const auto& cell = cells[static_cast<std::size_t>(1 + traj.state_dim + i)];
      if (!cell.empty()) blank = false;
    }
    if (!blank) {
      for (int i = 0; i < traj.control_dim; ++i) {
        u.push_back(parse_cell(cells[static_cast<std::size_t>(1 + traj.state_dim + i)], line_no));
      }
    }
    pending_controls.push_back(std::move(u));
  }
  if (expected_k == 0) throw ValidationError("trajectory CSV has no rows");
  // Controls are present on every row but the last.
  for (std::size_t k = 0; k + 1 < pending_controls.size(); ++k) {
    if (static_cast<int>(pending_controls[k].size()) != traj.control_dim) {
      throw ValidationError("missing controls on step " + std::to_string(k));
    }
    traj.controls.insert(traj.controls.end(), pending_controls[k].begin(), pending_controls[k].end());
  }
  return traj;
}

plant::RolloutT<double> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory '" + path.string() + "'");
  return read_trajectory_csv(in);
}

void write_train_log_csv(std::ostream& out, const trainer::TrainLog& log) {
  out << "iter,branch,J,Gamma,norm_d1,norm_d2,b1,b2,Gamma_candidate\n";
  for (const auto& r : log) {
    out << r.iter << ',' << trainer::to_string(r.branch) << ',' << format_double(r.J) << ','
        << format_double(r.Gamma) << ',' << format_double(r.norm_d1) << ','
        << format_double(r.norm_d2) << ',' << r.b1 << ',' << r.b2 << ','
        << format_double(r.Gamma_candidate) << '\n';
  }
}

void write_train_log_csv(const std::filesystem::path& path, const trainer::TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log '" + path.string() + "'");
  write_train_log_csv(out, log);
}

trainer::TrainLog read_train_log_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("training log is empty");
  trainer::TrainLog log;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 9) throw ValidationError("training log line " + std::to_string(line_no) + " malformed");
    trainer::LogRecord r;
    r.iter = static_cast<int>(parse_cell(c[0], line_no));
    if (c[1] == "perf") r.branch = trainer::Branch::perf;
    else if (c[1] == "stl") r.branch = trainer::Branch::stl;
    else if (c[1] == "slow") r.branch = trainer::Branch::slow;
    else if (c[1] == "lagrangian") r.branch = trainer::Branch::lagrangian;
    else throw ValidationError("unknown branch '" + c[1] + "'");
    auto num = [&](const std::string& s) {
      if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      return parse_cell(s, line_no);
    };
    r.J = num(c[2]);
    r.Gamma = num(c[3]);
    r.norm_d1 = num(c[4]);
    r.norm_d2 = num(c[5]);
    r.b1 = static_cast<int>(parse_cell(c[6], line_no));
    r.b2 = static_cast<int>(parse_cell(c[7], line_no));
    r.Gamma_candidate = num(c[8]);
    log.push_back(r);
  }
  return log;
}

json risk_report_to_json(const risk::RiskReport& report, const json& config_echo) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"beta", e.beta},
                       {"VaR", e.var},
                       {"CVaR", e.cvar},
                       {"neg_VaR", e.neg_var},
                       {"neg_CVaR", e.neg_cvar}});
  }
  return {
      {"config", config_echo},
      {"N", report.N},
      {"seed", report.seed},
      {"entries", entries},
      {"summary",
       {{"min_rho", report.summary.min_rho},
        {"max_rho", report.summary.max_rho},
        {"mean_rho", report.summary.mean_rho},
        {"satisfaction_rate", report.summary.satisfaction_rate}}},
  };
}

}  // namespace stlforge::io
