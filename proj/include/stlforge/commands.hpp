#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace stlforge::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

struct Options {
  std::filesystem::path config;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> trajectory;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;  // verify: overrides risk.N
  std::filesystem::path out = ".";
  int threads = 1;
  int count = 500;  // simulate
};

// Each command reports to `out`, diagnostics to `err`, and returns an ExitCode.
int cmd_parse(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_train(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace stlforge::cli
