#pragma once

// The command-line subcommands as library functions. Each writes its files
// under config.output_dir and returns the exit code plus a JSON summary.

#include <string>
#include <vector>

#include "lpflow/config.hpp"
#include "lpflow/serialize.hpp"

namespace lpflow {

namespace exit_codes {
inline constexpr int kOk = 0;
inline constexpr int kEmptyCensus = 2;
inline constexpr int kConfig = 64;
inline constexpr int kIntegration = 65;
inline constexpr int kSurgery = 66;
inline constexpr int kInternal = 70;
}  // namespace exit_codes

/// Maps an error to its exit code; surgery-specific failures map to 66 only
/// when raised by the surgery command.
int exit_code_for(ErrorCode code, bool surgery_command);

struct CommandResult {
  int exit_code = exit_codes::kOk;
  Json summary = Json::object();
  std::vector<std::string> files;  // relative to the output directory
  std::vector<std::string> warnings;
};

CommandResult cmd_orbits(const AnalysisConfig& config);
CommandResult cmd_analyze(const AnalysisConfig& config);
CommandResult cmd_basin(const AnalysisConfig& config);
CommandResult cmd_surgery(const AnalysisConfig& config);
/// Reads report.json from `out_dir`, checks that every listed artifact exists
/// and, when `config` is given, that its hash matches.
CommandResult cmd_report(const std::string& out_dir, const AnalysisConfig* config = nullptr);

/// Human-readable lines for a summary.
std::string describe(const std::string& command, const CommandResult& result);

}  // namespace lpflow
