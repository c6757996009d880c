// lpflow: periodic-orbit census, splitting certificates, basin estimates and
// cocycle surgery reports for three-dimensional flows.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lpflow/error.hpp"
#include "lpflow/pipeline.hpp"

using namespace lpflow;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool json = false;
};

AnalysisConfig load(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required for this command");
  AnalysisConfig c = load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.threads > 0) c.threads = g.threads;
  if (!g.out.empty()) c.output_dir = g.out;
  c.propagate();
  return c;
}

void emit(const Globals& g, const std::string& command, const CommandResult& r) {
  for (const auto& w : r.warnings) std::cerr << "lpflow: warning: " << w << "\n";
  if (g.json) {
    Json line = {{"command", command}, {"exit_code", r.exit_code}, {"summary", r.summary}, {"files", r.files},
                 {"warnings", r.warnings}};
    std::cout << line.dump() << "\n";
  } else {
    std::cout << describe(command, r) << "\n";
  }
}

int fail(const Globals& g, const std::string& command, int code, const std::string& kind, const std::string& what) {
  std::cerr << "lpflow: error: " << what << "\n";
  if (g.json) {
    Json line = {{"command", command}, {"exit_code", code}, {"error", {{"code", kind}, {"message", what}}}};
    std::cout << line.dump() << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lpflow: linear Poincare flow toolkit for three-dimensional flows"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "YAML analysis config");
  app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (overrides config and OUTPUT_DIR)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json, "print one JSON summary line on stdout");

  app.add_subcommand("orbits", "periodic-orbit census: orbits.json, orbits.csv")->fallthrough();
  app.add_subcommand("analyze", "census, region, certificates, attractors and basin: report.json")->fallthrough();
  app.add_subcommand("basin", "weak-basin and trapped-set estimates with plot data")->fallthrough();
  app.add_subcommand("surgery", "cocycle perturbation constructions: surgery.json")->fallthrough();
  app.add_subcommand("report", "check and summarize an existing report bundle")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : exit_codes::kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    CommandResult r;
    if (command == "orbits") {
      r = cmd_orbits(load(g));
    } else if (command == "analyze") {
      r = cmd_analyze(load(g));
    } else if (command == "basin") {
      r = cmd_basin(load(g));
    } else if (command == "surgery") {
      r = cmd_surgery(load(g));
    } else {
      std::optional<AnalysisConfig> c;
      if (!g.config.empty()) c = load(g);
      const std::string dir = !g.out.empty() ? g.out : c ? c->output_dir : std::getenv("OUTPUT_DIR") ? std::getenv("OUTPUT_DIR") : "lpflow-out";
      r = cmd_report(dir, c ? &*c : nullptr);
    }
    emit(g, command, r);
    return r.exit_code;
  } catch (const Error& e) {
    return fail(g, command, exit_code_for(e.code(), command == "surgery"), std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return fail(g, command, exit_codes::kInternal, "Internal", e.what());
  }
}
