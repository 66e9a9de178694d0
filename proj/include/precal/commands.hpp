#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace precal::cli {

struct CommonOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the seed in the config file
  int threads = 1;
};

// Each command reads a JSON config, writes its manifest before computing, and
// returns a process exit code: 0 success, 2 config error, 3 data error,
// 4 numeric failure.  Failures print one line on stderr.
int cmd_simulate(const std::string& config_path, const CommonOptions& options);
int cmd_train(const std::string& config_path, const CommonOptions& options);
int cmd_evaluate(const std::string& config_path, const CommonOptions& options);
int cmd_nulldist(const std::string& config_path, const CommonOptions& options);

// Argument parsing and dispatch for the precal binary.
int run_cli(int argc, const char* const* argv);

}  // namespace precal::cli
