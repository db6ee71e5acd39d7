#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stlforge/plant.hpp"
#include "stlforge/policy.hpp"
#include "stlforge/risk.hpp"
#include "stlforge/semantics.hpp"
#include "stlforge/trainer.hpp"

namespace stlforge::io {

inline constexpr int kFormatVersion = 1;

struct RiskConfig {
  std::size_t N = 1000000;
  std::vector<double> betas{0.95, 0.98, 0.99, 0.999};
  std::uint64_t seed = 0;
  bool write_samples = false;
};

struct Paths {
  std::string checkpoint_out = "checkpoint.json";
  std::string log_out = "train_log.csv";
  std::string traj_out = "trajectories";
};

// A full project: the control problem, training and verification settings.
struct ProjectConfig {
  std::string name;
  trainer::Problem problem;
  trainer::TrainConfig train;
  RiskConfig risk;
  Paths paths;
  std::string formula_text;
  std::string reward_text;
  std::map<std::string, std::string> definition_texts;
  nlohmann::json source;  // as read, echoed into reports
};

ProjectConfig parse_config(const nlohmann::json& j);
ProjectConfig load_config(const std::filesystem::path& path);

struct Checkpoint {
  policy::Policy policy;
  semantics::SmoothParams zeta;
  int horizon = 0;
  std::uint64_t seed = 0;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// CSV with header k,x_0..x_{n-1},u_0..u_{m-1}; the final row leaves the
// control cells empty.
void write_trajectory_csv(std::ostream& out, const plant::RolloutT<double>& traj);
void write_trajectory_csv(const std::filesystem::path& path, const plant::RolloutT<double>& traj);
plant::RolloutT<double> read_trajectory_csv(std::istream& in);
plant::RolloutT<double> read_trajectory_csv(const std::filesystem::path& path);

void write_train_log_csv(std::ostream& out, const trainer::TrainLog& log);
void write_train_log_csv(const std::filesystem::path& path, const trainer::TrainLog& log);
trainer::TrainLog read_train_log_csv(std::istream& in);

nlohmann::json risk_report_to_json(const risk::RiskReport& report, const nlohmann::json& config_echo);

// "%.17g"
std::string format_double(double v);

}  // namespace stlforge::io
