#pragma once

// Analysis configuration: one YAML file with nested sections for the flow,
// domain, census, certificates, Monte Carlo budgets and surgery inputs.
//
//   seed: 0
//   threads: 1
//   output_dir: lpflow-out      # OUTPUT_DIR in the environment overrides
//   tolerance: 1.0e-10
//   flow:
//     builtin: cylinder         # or `expression: {x: ..., y: ..., z: ...}`
//     params: {c: -1}
//     constants: {a: 0.5}       # names usable inside expressions
//   domain:                     # required for expression flows
//     kind: box                 # box | torus
//     lo: [-3, -3, -3]
//     hi: [3, 3, 3]
//     periods: [1, 1, 1]        # torus only
//     sampling: {kind: cylinder_shell, r_in: 0.5, r_out: 1.5, z_lo: -0.5, z_hi: 0.5}
//   sections:
//     - {anchor: [1, 0, 0], normal: [0, 1, 0], half_width: 1000}
//   census: {seeds: 200, period_bound: 10, max_returns: 8, dedup: 1.0e-4}
//   certificates: {alpha: 0.1, rate: 0.05, T: 1, spacing: 0.25, K: 10, horizon: 10}
//   basin: {samples: 1000, horizon: 200, transient: 100, sample_dt: 0.1, batch: 64, running_step: 100}
//   trapped: {samples: 2000, N: [1, 2, 5, 10, 20], sample_dt: 0.05, region: {...}}
//   attractor: {boundary_samples: 256, interior_samples: 256, trap_time: 0.5, horizon: 40, neighborhood: {...}}
//   surgery:
//     lambda: 0.5
//     mu: 1.6
//     gamma: 0.1
//     tau: 40.5                 # optional
//     budget: {C: 10, eps: 0.1, lambda_rate: 0.9, alpha: 0.5}

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpflow/builtins.hpp"
#include "lpflow/dissipative.hpp"
#include "lpflow/periodic.hpp"
#include "lpflow/surgery.hpp"

namespace lpflow {

struct FlowConfig {
  std::string builtin;
  ParamMap params;
  std::array<std::string, 3> expression;
  ParamMap constants;

  bool is_expression() const { return builtin.empty(); }
};

struct CertificateConfig {
  double alpha = 0.1;
  double rate = 0.05;
  double T = 1.0;
  double spacing = 0.25;
  double K = 10.0;
  double horizon = 10.0;
};

struct BudgetInputs {
  double C = 10.0;
  double eps = 0.1;
  double lambda_rate = 0.9;
  double alpha = 0.5;
};

struct SurgeryConfig {
  SaddleData saddle;
  bool tau_given = false;  // otherwise tau = 2m + 10.5 for the perturbation family
  std::optional<BudgetInputs> budget;
  bool present = false;
};

struct AnalysisConfig {
  std::string path;
  std::uint64_t hash = 0;  // FNV-1a of the file bytes
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "lpflow-out";
  double tolerance = 1e-10;

  FlowConfig flow;  // may be absent in surgery-only files
  std::optional<DomainSpec> domain;
  std::vector<SectionSpec> sections;
  CensusBudget census;
  CertificateConfig certificates;
  BasinOptions basin;
  int running_step = 100;
  TrappedOptions trapped;
  std::vector<double> trapped_N{1, 2, 5, 10, 20};
  std::optional<Shape> trapped_region;
  AttractorOptions attractor;
  std::optional<Shape> neighborhood;
  SurgeryConfig surgery;

  /// Applies seed and thread count to every budget that carries them.
  void propagate();
};

/// Throws ConfigError (with line and column) for malformed files, unknown
/// keys, wrong types or invalid values.
AnalysisConfig parse_config(const std::string& text, const std::string& origin = "<string>");
AnalysisConfig load_config(const std::string& path);

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Builds the vector field and its sections. Expression errors surface as
/// ConfigError naming the component and column.
BuiltinFlow build_flow(const AnalysisConfig& config);

}  // namespace lpflow
