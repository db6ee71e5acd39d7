#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "stlforge/commands.hpp"

using namespace stlforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "stlforge");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "stlforge_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json shipped(const char* name) {
  std::ifstream in(fs::path(STLFORGE_CONFIG_DIR) / name);
  return json::parse(in);
}

fs::path write_json(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2);
  return path;
}

// The unicycle task with a short training budget.
fs::path small_config(const fs::path& dir, int iterations = 30) {
  json j = shipped("unicycle_rho03.json");
  j["train"]["iterations"] = iterations;
  j["train"]["batch_size"] = 4;
  j["risk"]["betas"] = {0.9, 0.95};
  return write_json(dir / "config.json", j);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("parse reports the disjunctive weight slots") {
  const auto r = run({"parse", "--config", std::string(STLFORGE_CONFIG_DIR) + "/unicycle_rho03.json"});
  CHECK(r.code == 0);
  CHECK(r.out.find("total beta slots: 22") != std::string::npos);
  CHECK(r.out.find("43 parameters") != std::string::npos);
  CHECK(r.out.find("or") != std::string::npos);
  const auto q = run({"parse", "--config", std::string(STLFORGE_CONFIG_DIR) + "/quadrotor_rho01.json"});
  CHECK(q.code == 0);
  CHECK(q.out.find("total beta slots: 22") != std::string::npos);
  CHECK(q.out.find("125 parameters") != std::string::npos);
}

TEST_CASE("validation failures exit with code 1") {
  const auto dir = workdir("invalid");
  json j = shipped("unicycle_rho03.json");
  j["formula"] = "F[3,2](e1 >= 0)";
  CHECK(run({"parse", "--config", write_json(dir / "interval.json", j).string()}).code == 1);

  std::ofstream(dir / "empty.json") << "";
  const auto e = run({"parse", "--config", (dir / "empty.json").string()});
  CHECK(e.code == 1);
  CHECK(e.err.find("empty") != std::string::npos);

  j = shipped("unicycle_rho03.json");
  j["dynamics"] = {{"preset", "hovercraft"}};
  CHECK(run({"train", "--config", write_json(dir / "preset.json", j).string(), "--out",
             dir.string()}).code == 1);

  CHECK(run({"bogus"}).code == 1);
  CHECK(run({"parse"}).code == 1);
  CHECK(run({"parse", "--config", (dir / "nope.json").string()}).code == 3);
}

TEST_CASE("train, simulate, eval and verify") {
  const auto dir = workdir("pipeline");
  const auto cfg = small_config(dir).string();
  const auto out = (dir / "run").string();

  const auto t = run({"train", "--config", cfg, "--out", out});
  REQUIRE(t.code == 0);
  REQUIRE(fs::exists(dir / "run" / "checkpoint.json"));
  REQUIRE(fs::exists(dir / "run" / "train_log.csv"));
  CHECK(read_csv(dir / "run" / "train_log.csv").size() == 31);

  SUBCASE("training is reproducible") {
    const auto again = (dir / "again").string();
    REQUIRE(run({"train", "--config", cfg, "--out", again}).code == 0);
    CHECK(slurp(dir / "again" / "checkpoint.json") == slurp(dir / "run" / "checkpoint.json"));
    CHECK(slurp(dir / "again" / "train_log.csv") == slurp(dir / "run" / "train_log.csv"));
  }

  const auto ck = (dir / "run" / "checkpoint.json").string();

  SUBCASE("simulate writes one csv per trajectory and a summary") {
    const auto s = run({"simulate", "--config", cfg, "--checkpoint", ck, "--count", "5", "--out",
                        out});
    REQUIRE(s.code == 0);
    const auto tdir = dir / "run" / "trajectories";
    const auto summary = read_csv(tdir / "summary.csv");
    REQUIRE(summary.size() == 6);
    CHECK(summary[0] == std::vector<std::string>{"index", "J", "Gamma", "rho", "satisfied"});
    for (int i = 0; i < 5; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "traj_%05d.csv", i);
      REQUIRE(fs::exists(tdir / name));
      const auto e = run({"eval", "--config", cfg, "--checkpoint", ck, "--trajectory",
                          (tdir / name).string()});
      REQUIRE(e.code == 0);
      const json r = json::parse(e.out);
      const auto& row = summary[static_cast<std::size_t>(i) + 1];
      CHECK(r.at("rho").get<double>() == std::stod(row[3]));
      CHECK(r.at("Gamma").get<double>() == std::stod(row[2]));
      CHECK(r.at("satisfied").get<bool>() == (row[4] == "1"));
      CHECK(r.at("Gamma").get<double>() <= r.at("rho").get<double>());
    }
  }

  SUBCASE("simulate with zero trajectories") {
    const auto s = run({"simulate", "--config", cfg, "--checkpoint", ck, "--count", "0", "--out",
                        out});
    REQUIRE(s.code == 0);
    CHECK(read_csv(dir / "run" / "trajectories" / "summary.csv").size() == 1);
  }

  SUBCASE("checkpoint from a different formula is rejected") {
    json j = shipped("unicycle_rho03.json");
    j["formula"] = "F[1,10](e1 >= 0) && G[1,20](e3 >= 0)";
    const auto other = write_json(dir / "other.json", j).string();
    const auto s = run({"simulate", "--config", other, "--checkpoint", ck, "--count", "2",
                        "--out", out});
    CHECK(s.code == 1);
    CHECK(s.err.find("formula") != std::string::npos);
  }

  SUBCASE("verify") {
    const auto start = std::chrono::steady_clock::now();
    const auto v = run({"verify", "--config", cfg, "--checkpoint", ck, "--samples", "1000",
                        "--out", out});
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(v.code == 0);
    CHECK(secs < 10.0);
    const json rep = json::parse(slurp(dir / "run" / "risk_report.json"));
    CHECK(rep.at("N") == 1000);
    CHECK(rep.at("entries").size() == 2);
    CHECK(rep.at("entries")[0].at("VaR").get<double>() <= rep.at("entries")[1].at("VaR").get<double>());
    CHECK(v.out.find("with probability >= 0.95") != std::string::npos);

    const auto again = run({"verify", "--config", cfg, "--checkpoint", ck, "--samples", "1000",
                            "--out", (dir / "v2").string()});
    REQUIRE(again.code == 0);
    CHECK(slurp(dir / "v2" / "risk_report.json") == slurp(dir / "run" / "risk_report.json"));

    CHECK(run({"verify", "--config", cfg, "--checkpoint", ck, "--samples", "10", "--out", out})
              .code == 1);
    json j = json::parse(slurp(cfg));
    j["risk"]["betas"] = {0.95, 1.2};
    const auto bad = write_json(dir / "badbeta.json", j).string();
    CHECK(run({"verify", "--config", bad, "--checkpoint", ck, "--samples", "1000", "--out", out})
              .code == 1);
  }
}

TEST_CASE("eval on hand-written trajectories") {
  const auto dir = workdir("eval");
  const auto cfg = small_config(dir).string();
  {
    std::ofstream f(dir / "center.csv");
    f << "k,x_0,x_1,x_2,u_0,u_1\n";
    for (int k = 0; k <= 20; ++k) {
      f << k << ",2,8,0";
      f << (k < 20 ? ",0.5,0\n" : ",,\n");
    }
  }
  const auto e = run({"eval", "--config", cfg, "--trajectory", (dir / "center.csv").string()});
  REQUIRE(e.code == 0);
  const json r = json::parse(e.out);
  CHECK(r.at("satisfied").get<bool>());
  CHECK(r.at("rho").get<double>() > 0.0);
  CHECK(r.at("Gamma").get<double>() <= r.at("rho").get<double>());

  std::ofstream(dir / "bad.csv") << "k,x_0,x_1,x_2\n0,1,2\n";
  CHECK(run({"eval", "--config", cfg, "--trajectory", (dir / "bad.csv").string()}).code == 1);
  std::ofstream(dir / "dims.csv") << "k,x_0,x_1\n0,1,2\n";
  CHECK(run({"eval", "--config", cfg, "--trajectory", (dir / "dims.csv").string()}).code == 1);
  CHECK(run({"eval", "--config", cfg, "--trajectory", (dir / "none.csv").string()}).code == 3);
}

TEST_CASE("executable exit codes") {
  const std::string exe = STLFORGE_CLI_PATH;
  const auto dir = workdir("exe");
  const std::string cfg = std::string(STLFORGE_CONFIG_DIR) + "/unicycle_rho03.json";
  const int ok = std::system((exe + " parse --config " + cfg + " > " + (dir / "o.txt").string()).c_str());
  CHECK(ok == 0);
  std::ofstream(dir / "empty.json") << "";
  const int bad = std::system((exe + " parse --config " + (dir / "empty.json").string() + " 2> " +
                               (dir / "e.txt").string())
                                  .c_str());
  CHECK(WEXITSTATUS(bad) == 1);
}
