#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stlforge/io.hpp"
#include "stlforge/random.hpp"

using namespace stlforge;
using nlohmann::json;

namespace {

std::filesystem::path config_dir() { return STLFORGE_CONFIG_DIR; }

std::filesystem::path scratch(const char* name) {
  auto p = std::filesystem::temp_directory_path() / "stlforge_test_io" / name;
  std::filesystem::create_directories(p.parent_path());
  return p;
}

json minimal_config() {
  return json::parse(R"json({
    "name": "toy",
    "dynamics": {"states": ["p", "q"], "controls": ["a"],
                 "uncertainty": [{"name": "d", "lo": -0.01, "hi": 0.01}],
                 "updates": ["(1 + d)*p + 0.1*q", "q + 0.1*a"]},
    "init_set": {"kind": "ball", "center": [0, 0], "radius": 0.5},
    "horizon": 6,
    "definitions": {"band": "1 - p^2"},
    "formula": "G[0,6](band >= 0)",
    "reward": "-q^2",
    "policy": {"layer_dims": [3, 4, 1],
               "squash": [{"kind": "tanh", "pre_scale": 1, "gain": 1, "offset": 0}]},
    "train": {"rho": 0.1, "tau": 10, "iterations": 5, "seed": 4}
  })json");
}

}  // namespace

TEST_CASE("shipped configs load") {
  const auto u = io::load_config(config_dir() / "unicycle_rho03.json");
  CHECK(u.problem.dynamics.name() == "unicycle");
  CHECK(u.problem.horizon == 20);
  CHECK(u.train.rho == 0.3);
  CHECK(u.train.tau == 100);
  CHECK(u.train.iterations == 40000);
  CHECK(u.train.layer_dims == std::vector<int>{4, 5, 2, 2});
  CHECK(u.problem.gamma == 0.9);
  CHECK(u.problem.formula.disjunctions().size() == 3);

  const auto u5 = io::load_config(config_dir() / "unicycle_rho05.json");
  CHECK(u5.train.rho == 0.5);

  const auto q = io::load_config(config_dir() / "quadrotor_rho01.json");
  CHECK(q.problem.dynamics.name() == "quadrotor");
  CHECK(q.train.tau == 50000);
  CHECK(q.train.iterations == 10000);
  CHECK(q.train.layer_dims == std::vector<int>{7, 10, 3, 3});
  CHECK(q.train.wtavg_form == semantics::WeightForm::softmax);
  CHECK(q.problem.init.kind == plant::InitSet::Kind::ball);
  CHECK(q.problem.init.radius == 0.0125);
}

TEST_CASE("inline dynamics config") {
  const auto c = io::parse_config(minimal_config());
  CHECK(c.problem.dynamics.state_dim() == 2);
  CHECK(c.problem.dynamics.uncertainty().size() == 1);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.adam.alpha == 1e-3);
  CHECK(c.risk.N == 1000000);
  CHECK(c.paths.checkpoint_out == "checkpoint.json");
}

TEST_CASE("config errors") {
  json j = minimal_config();
  j["formula"] = "F[3,2](band >= 0)";
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j["formula"] = "G[0,7](band >= 0)";
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j["dynamics"] = {{"preset", "bicycle"}};
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j.erase("reward");
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j["policy"]["layer_dims"] = {2, 4, 1};
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j["train"]["tau"] = 0.5;
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j["risk"] = {{"betas", {0.9, 1.0}}};
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);
  j = minimal_config();
  j["policy"].erase("squash");
  CHECK_THROWS_AS(io::parse_config(j), ValidationError);

  const auto empty = scratch("empty.json");
  std::ofstream(empty) << "  \n";
  CHECK_THROWS_AS(io::load_config(empty), ValidationError);
  const auto broken = scratch("broken.json");
  std::ofstream(broken) << "{\"name\": ";
  CHECK_THROWS_AS(io::load_config(broken), ValidationError);
  CHECK_THROWS_AS(io::load_config(scratch("missing.json")), IoError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto c = io::load_config(config_dir() / "unicycle_rho03.json");
  auto pi = policy::init_params(c.train.layer_dims, c.train.squash, 20, 77);
  Rng rng(3);
  std::vector<double> p(pi.num_params());
  for (auto& v : p) v = rng.uniform(-1, 1) * 1e-3 + rng.uniform() / 3.0;
  pi.set_params(p);
  auto zeta = semantics::init_smooth_params(c.problem.formula, semantics::WeightForm::squared, 1, 0.7);
  zeta.lambda = 1.0 / 7.0;
  const io::Checkpoint ck{pi, zeta, 20, 12345678901234567ULL};

  const auto path = scratch("ck.json");
  io::save_checkpoint(path, ck);
  const auto back = io::load_checkpoint(path);
  CHECK(std::vector<double>(back.policy.params().begin(), back.policy.params().end()) == p);
  CHECK(back.policy.layer_dims() == pi.layer_dims());
  CHECK(back.policy.squash().size() == 2);
  CHECK(back.policy.squash()[0].kind == policy::SquashKind::sigmoid);
  CHECK(back.policy.squash()[1].gain == 0.5);
  CHECK(back.zeta.flatten() == zeta.flatten());
  CHECK(back.zeta.form == zeta.form);
  CHECK(back.horizon == 20);
  CHECK(back.seed == 12345678901234567ULL);

  const json j = io::checkpoint_to_json(ck);
  CHECK(j.at("format_version") == io::kFormatVersion);
  CHECK(j.at("weights").size() == 3);
  CHECK(j.at("zeta").at("betas").contains("0"));
  json bad = j;
  bad["format_version"] = 99;
  CHECK_THROWS_AS(io::checkpoint_from_json(bad), ValidationError);
  bad = j;
  bad["biases"].erase(0);
  CHECK_THROWS_AS(io::checkpoint_from_json(bad), ValidationError);
}

TEST_CASE("trajectory csv round trip") {
  const auto d = plant::Dynamics::unicycle();
  const auto pi = policy::init_params({4, 5, 2, 2}, d.default_squash(), 20, 2);
  const std::vector<double> x0{1.0, 1.0 / 3.0, 1.5};
  const std::vector<double> delta{0.00123};
  const auto traj = plant::simulate(d, pi, x0, delta, 20);
  std::stringstream ss;
  io::write_trajectory_csv(ss, traj);
  const std::string text = ss.str();
  CHECK(text.rfind("k,x_0,x_1,x_2,u_0,u_1\n", 0) == 0);
  const auto back = io::read_trajectory_csv(ss);
  CHECK(back.state_dim == 3);
  CHECK(back.control_dim == 2);
  CHECK(back.states == traj.states);
  CHECK(back.controls == traj.controls);
}

TEST_CASE("malformed trajectory csv") {
  auto read = [](const std::string& s) {
    std::stringstream ss(s);
    return io::read_trajectory_csv(ss);
  };
  CHECK_THROWS_AS(read(""), ValidationError);
  CHECK_THROWS_AS(read("x_0,u_0\n"), ValidationError);
  CHECK_THROWS_AS(read("k,x_0,u_0\n"), ValidationError);
  CHECK_THROWS_AS(read("k,x_0,u_0\n0,abc,1\n1,2,\n"), ValidationError);
  CHECK_THROWS_AS(read("k,x_0,u_0\n0,1\n"), ValidationError);
  CHECK_THROWS_AS(read("k,x_0,u_0\n1,1,1\n2,2,\n"), ValidationError);
  CHECK_THROWS_AS(read("k,x_0,u_0\n0,1,\n1,2,\n"), ValidationError);
  CHECK_THROWS_AS(read("k,x_0,q\n0,1,1\n"), ValidationError);
  const auto ok = read("k,x_0\n0,1\n1,2.5\n");
  CHECK(ok.states == std::vector<double>{1, 2.5});
}

TEST_CASE("training log csv round trip") {
  trainer::TrainLog log(2);
  log[0] = {0, trainer::Branch::stl, 1.0 / 3.0, -0.2, 4.5, 0.25, 3, 1, -0.4};
  log[1] = {1, trainer::Branch::slow, 2.0, 0.7, 1.0, 2.0, 0, 2};
  std::stringstream ss;
  io::write_train_log_csv(ss, log);
  CHECK(ss.str().rfind("iter,branch,J,Gamma,norm_d1,norm_d2,b1,b2,Gamma_candidate\n", 0) == 0);
  const auto back = io::read_train_log_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].branch == trainer::Branch::stl);
  CHECK(back[0].J == 1.0 / 3.0);
  CHECK(back[0].Gamma_candidate == -0.4);
  CHECK(back[1].b2 == 2);
  CHECK(std::isnan(back[1].Gamma_candidate));
}

TEST_CASE("risk report json") {
  const std::vector<double> rob{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> betas{0.5, 0.75};
  auto r = risk::risk_from_robustness(rob, betas);
  r.seed = 9;
  const json j = io::risk_report_to_json(r, json{{"name", "x"}});
  CHECK(j.at("N") == 4);
  CHECK(j.at("seed") == 9);
  CHECK(j.at("entries").size() == 2);
  CHECK(j.at("entries")[0].at("neg_VaR").get<double>() == doctest::Approx(0.3));
  CHECK(j.at("summary").at("satisfaction_rate") == 1.0);
  CHECK(j.at("config").at("name") == "x");
}

TEST_CASE("format_double keeps every digit") {
  const double v = 0.1 + 0.2;
  CHECK(std::stod(io::format_double(v)) == v);
  CHECK(io::format_double(1.0) == "1");
}
