#include "lpflow/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>

#include "lpflow/error.hpp"
#include "lpflow/version.hpp"

namespace lpflow {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code, bool surgery_command) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ParseError:
      return exit_codes::kConfig;
    case ErrorCode::SingularityDetected:
    case ErrorCode::OutOfDomain:
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::NoReturn:
    case ErrorCode::LeftDomain:
    case ErrorCode::NewtonDiverged:
    case ErrorCode::NonTransversalSection:
      return exit_codes::kIntegration;
    default:
      break;
  }
  if (surgery_command) return exit_codes::kSurgery;
  return code == ErrorCode::InvalidArgument ? exit_codes::kConfig : exit_codes::kInternal;
}

namespace {

class Stopwatch {
 public:
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    timings_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  const Json& timings() const { return timings_; }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  Json timings_ = Json::object();
};

struct Output {
  std::string dir;
  CommandResult* result;

  void write(const std::string& name, const std::string& contents) const {
    write_file((fs::path(dir) / name).string(), contents);
    result->files.push_back(name);
  }
  void json(const std::string& name, const Json& j) const { write(name, j.dump(2) + "\n"); }
};

Json metadata(const AnalysisConfig& config, const BuiltinFlow& flow) {
  Json params = Json::object();
  for (const auto& [k, v] : flow.params) params[k] = v;
  return {{"tool", "lpflow"},
          {"version", kVersion},
          {"config_hash", hex64(config.hash)},
          {"seed", config.seed},
          {"flow", flow.spec.name},
          {"params", params},
          {"tolerance", config.tolerance}};
}

// Run-dependent facts that must stay out of the deterministic bundle.
void write_run_info(const Output& out, const AnalysisConfig& config, const Stopwatch& clock) {
  out.json("run.json", document("run", {{"threads", config.threads}, {"timings_seconds", clock.timings()}}));
}

OrbitCatalog run_census(const AnalysisConfig& config, const BuiltinFlow& flow) {
  return enumerate_orbits(flow.spec, flow.sections, config.census, config.tolerance);
}

void census_warning(const OrbitCatalog& catalog, CommandResult& r) {
  if (!catalog.orbits.empty()) return;
  std::ostringstream msg;
  msg << "census found no periodic orbits with period <= " << catalog.period_bound << " (" << catalog.seeds_tried
      << " seeds, " << catalog.failures << " failed searches)";
  r.warnings.push_back(msg.str());
  r.exit_code = exit_codes::kEmptyCensus;
}

Json catalog_summary(const OrbitCatalog& c) {
  return {{"orbits", c.orbits.size()},
          {"sinks", c.count(OrbitClass::Sink)},
          {"saddles", c.count(OrbitClass::Saddle)},
          {"dissipative", c.dissipative_count()},
          {"dissipative_saddles", c.dissipative_saddles()}};
}

Json basin_summary(const BasinEstimate& b) {
  return {{"estimate", b.estimate},
          {"ci_low", b.ci_low},
          {"ci_high", b.ci_high},
          {"n", b.n},
          {"flag", b.empty_region ? "EmptyRegion" : ""}};
}

// Runs `f`, turning certificate-level failures into a recorded error entry.
Json guarded(const std::function<Json()>& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (exit_code_for(e.code(), false) == exit_codes::kIntegration) throw;
    return {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  }
}

Json certificates_for(const VectorFieldSpec& spec, const OrbitCatalog& catalog, const AnalysisConfig& config) {
  const CertificateConfig& k = config.certificates;
  Json per_orbit = Json::array();
  std::vector<PeriodicOrbit> saddles;
  for (const PeriodicOrbit& o : catalog.orbits) {
    if (!o.is_saddle()) continue;
    saddles.push_back(o);
    Json entry = {{"orbit", o.name}};
    entry["contraction_rate"] = guarded([&] { return to_json(check_contraction_rate(o, k.rate)); });
    const NormalCocycle coc = periodic_cocycle(spec, o.point, o.period, k.spacing, config.tolerance);
    const auto dirs = transport_directions(coc, eigen_directions(o));
    const double gap = o.period / static_cast<double>(coc.size());
    const double T = std::max(1.0, std::round(k.T / gap)) * gap;
    entry["dominated"] = guarded([&] {
      Json j = to_json(check_dominated(coc, dirs, T));
      j["requested_T"] = k.T;
      return j;
    });
    entry["smallest_dominating_time"] = guarded([&] {
      const double t = smallest_dominating_time(coc, dirs, k.horizon);
      return t < 0 ? Json(nullptr) : Json(t);
    });
    entry["hyperbolic"] = guarded([&] { return to_json(check_hyperbolic(coc, dirs, k.K, k.rate, k.horizon)); });
    entry["non_domination_witness"] = guarded([&] {
      const auto w = non_domination_witness(coc, dirs, T);
      return Json{{"T", T}, {"witness", w.witness}, {"first_failure", w.first_failure < 0 ? Json(nullptr) : Json(w.first_failure)}};
    });
    per_orbit.push_back(entry);
  }
  // det DX and det P over one period agree on a closed orbit; the sampled
  // difference is reported rather than assumed.
  Json determinants = Json::array();
  for (const PeriodicOrbit& o : catalog.orbits) {
    Json j = guarded([&] { return to_json(determinant_discrepancy(spec, o.point, o.period, config.tolerance)); });
    j["orbit"] = o.name;
    determinants.push_back(j);
  }
  Json out = {{"saddles", per_orbit}, {"determinant_discrepancy", determinants}};
  out["angle"] = saddles.empty() ? Json(nullptr) : guarded([&] { return to_json(check_angle_bound(saddles, k.alpha)); });
  return out;
}

Shape neighborhood_for(const AnalysisConfig& config, const VectorFieldSpec& spec) {
  return config.neighborhood ? *config.neighborhood : spec.domain.sampling;
}

Json attractors_for(const VectorFieldSpec& spec, const OrbitCatalog& catalog, const AnalysisConfig& config,
                    std::vector<std::string>& evidence) {
  Json out = Json::array();
  const Shape U = neighborhood_for(config, spec);
  for (const PeriodicOrbit& o : catalog.orbits) {
    if (!o.dissipative) continue;
    Json j = guarded([&] {
      const auto v = attractor_check(spec, candidate_from_orbit(spec, o, 0.0, config.tolerance), U, config.attractor);
      if (v.evidence) evidence.push_back(o.name);
      return to_json(v);
    });
    j["orbit"] = o.name;
    out.push_back(j);
  }
  return out;
}

std::string dichotomy(const OrbitCatalog& catalog, const RegionApprox& region, const BasinEstimate& basin,
                      const std::vector<std::string>& evidence) {
  const int sinks = catalog.count(OrbitClass::Sink);
  if (region.empty()) return "no dissipative periodic orbits at this budget; the dissipative region is empty";
  std::ostringstream s;
  if (!evidence.empty() && basin.ci_low >= 0.99) {
    s << "finitely many attractors: " << evidence.size()
      << " orbit(s) with attractor evidence whose weak basin covers the sampled volume (CI lower "
      << basin.ci_low << ")";
  } else if (basin.ci_high <= 0.01) {
    s << "the dissipative region has a measure-zero weak basin at this budget (CI upper " << basin.ci_high << ")";
  } else {
    s << "inconclusive at this budget: " << sinks << " sink(s), basin CI [" << basin.ci_low << ", " << basin.ci_high
      << "]";
  }
  return s.str();
}

CsvTable running_csv(const BasinEstimate& b, int step) {
  CsvTable t({"n", "estimate"});
  for (const auto& [n, est] : b.running(step)) t.add({std::to_string(n), CsvTable::num(est)});
  return t;
}

CsvTable trapped_plot(const std::vector<TrappedRow>& rows) {
  CsvTable t({"N", "trapped_measure"});
  for (const auto& r : rows) t.add({CsvTable::num(r.N), CsvTable::num(r.estimate)});
  return t;
}

}  // namespace

CommandResult cmd_orbits(const AnalysisConfig& config) {
  CommandResult r;
  Stopwatch clock;
  const BuiltinFlow flow = build_flow(config);
  const OrbitCatalog catalog = run_census(config, flow);
  clock.lap("census");
  const Output out{config.output_dir, &r};
  out.json("orbits.json", document("orbit-catalog", {{"metadata", metadata(config, flow)}, {"catalog", to_json(catalog)}}));
  out.write("orbits.csv", catalog_csv(catalog).str());
  write_run_info(out, config, clock);
  census_warning(catalog, r);
  r.summary = catalog_summary(catalog);
  return r;
}

CommandResult cmd_analyze(const AnalysisConfig& config) {
  CommandResult r;
  Stopwatch clock;
  const BuiltinFlow flow = build_flow(config);
  const OrbitCatalog catalog = run_census(config, flow);
  clock.lap("census");
  const RegionApprox region = dissipative_region(flow.spec, catalog, 0.0, config.tolerance);
  clock.lap("region");
  const Json certificates = certificates_for(flow.spec, catalog, config);
  clock.lap("certificates");
  std::vector<std::string> evidence;
  const Json attractors = attractors_for(flow.spec, catalog, config, evidence);
  clock.lap("attractors");
  const BasinEstimate basin = weak_basin_estimate(flow.spec, region, config.basin);
  clock.lap("basin");

  const Output out{config.output_dir, &r};
  out.write("orbits.csv", catalog_csv(catalog).str());
  out.write("basin.csv", basin_csv(basin).str());
  out.write("basin_plot.csv", running_csv(basin, config.running_step).str());

  Json summary = catalog_summary(catalog);
  summary["region_empty"] = region.empty();
  summary["attractor_evidence"] = evidence;
  summary["basin"] = basin_summary(basin);
  summary["dichotomy"] = dichotomy(catalog, region, basin, evidence);
  census_warning(catalog, r);
  summary["warnings"] = r.warnings;

  Json artifacts = r.files;
  artifacts.push_back("report.json");
  const Json bundle = document("report", {{"metadata", metadata(config, flow)},
                                          {"summary", summary},
                                          {"catalog", to_json(catalog)},
                                          {"region", to_json(region)},
                                          {"certificates", certificates},
                                          {"attractors", attractors},
                                          {"basin", to_json(basin)},
                                          {"artifacts", artifacts}});
  out.json("report.json", bundle);
  write_run_info(out, config, clock);
  r.summary = summary;
  return r;
}

CommandResult cmd_basin(const AnalysisConfig& config) {
  CommandResult r;
  Stopwatch clock;
  const BuiltinFlow flow = build_flow(config);
  const OrbitCatalog catalog = run_census(config, flow);
  clock.lap("census");
  const RegionApprox region = dissipative_region(flow.spec, catalog, 0.0, config.tolerance);
  const BasinEstimate basin = weak_basin_estimate(flow.spec, region, config.basin);
  clock.lap("basin");
  const Shape U = config.trapped_region ? *config.trapped_region : flow.spec.domain.sampling;
  const auto trapped = trapped_set_measure(flow.spec, U, config.trapped_N, config.trapped);
  clock.lap("trapped");

  const Output out{config.output_dir, &r};
  out.json("basin.json", document("basin", {{"metadata", metadata(config, flow)},
                                            {"region", to_json(region)},
                                            {"basin", to_json(basin)},
                                            {"trapped", {{"region", U.describe()}, {"rows", to_json(trapped)}}}}));
  out.write("basin.csv", basin_csv(basin).str());
  out.write("basin_plot.csv", running_csv(basin, config.running_step).str());
  out.write("trapped.csv", trapped_csv(trapped).str());
  out.write("trapped_plot.csv", trapped_plot(trapped).str());
  write_run_info(out, config, clock);
  census_warning(catalog, r);
  if (region.empty()) r.warnings.push_back("dissipative region is empty; basin estimate flagged EmptyRegion");
  r.summary = {{"basin", basin_summary(basin)}, {"trapped_final", trapped.back().estimate}};
  return r;
}

CommandResult cmd_surgery(const AnalysisConfig& config) {
  if (!config.surgery.present) throw Error(ErrorCode::ConfigError, config.path + ": missing 'surgery' section");
  CommandResult r;
  SaddleData d = config.surgery.saddle;
  d.validate();
  Json report = {{"input", {{"lambda", d.lambda}, {"mu", d.mu}, {"gamma", d.gamma}, {"dissipative", d.dissipative()}}}};
  report["saddle_matrix"] = to_json(saddle_matrix_form(d));
  report["shear_matrix"] = to_json(shear_matrix(d));
  const SinkReport sink = sink_via_shear(d);
  report["sink_via_shear"] = to_json(sink);
  r.summary = {{"trace", sink.trace}, {"det", sink.det}, {"modulus", sink.modulus}, {"sink", sink.sink}};

  if (const auto& in = config.surgery.budget) {
    const PerturbationBudget b = choose_budget(in->C, in->eps, in->lambda_rate, in->alpha);
    report["budget"] = to_json(b);
    report["angle_collapse_bound"] = angle_collapse_bound(b.eps1, b.m);
    if (!config.surgery.tau_given) d.tau = 2.0 * static_cast<double>(b.m) + 10.5;
    const PerturbedCocycle family = graph_perturbation_family(d, b);
    report["graph_perturbation"] = to_json(family);
    r.summary["m"] = b.m;
    r.summary["budget_valid"] = b.valid();
    r.summary["lambda_forced"] = family.lambda_out.real();
    r.summary["max_deviation"] = family.max_deviation();
  }
  const Output out{config.output_dir, &r};
  out.json("surgery.json", document("surgery", report));
  return r;
}

CommandResult cmd_report(const std::string& out_dir, const AnalysisConfig* config) {
  CommandResult r;
  const std::string path = (fs::path(out_dir) / "report.json").string();
  if (!fs::exists(path)) throw Error(ErrorCode::ConfigError, "no report bundle at " + path);
  Json bundle;
  try {
    bundle = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  if (bundle.value("schema", "") != kSchemaVersion) {
    throw Error(ErrorCode::ConfigError, path + ": unsupported schema " + bundle.value("schema", "<none>"));
  }
  std::vector<std::string> missing;
  for (const auto& a : bundle["artifacts"]) {
    if (!fs::exists(fs::path(out_dir) / a.get<std::string>())) missing.push_back(a.get<std::string>());
  }
  const std::string hash = bundle["metadata"].value("config_hash", "");
  bool hash_ok = true;
  if (config) hash_ok = hash == hex64(config->hash);
  r.summary = bundle["summary"];
  r.summary["config_hash"] = hash;
  r.summary["artifacts_missing"] = missing;
  if (config) r.summary["config_hash_matches"] = hash_ok;
  if (!missing.empty() || !hash_ok) {
    if (!missing.empty()) r.warnings.push_back(std::to_string(missing.size()) + " referenced artifact(s) missing");
    if (!hash_ok) r.warnings.push_back("config hash does not match the bundle");
    r.exit_code = exit_codes::kConfig;
  }
  return r;
}

std::string describe(const std::string& command, const CommandResult& result) {
  std::ostringstream s;
  const Json& j = result.summary;
  s << command << ":";
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "warnings") continue;
    s << "\n  " << it.key() << ": " << (it.value().is_string() ? it.value().get<std::string>() : it.value().dump());
  }
  if (!result.files.empty()) {
    s << "\n  files:";
    for (const auto& f : result.files) s << " " << f;
  }
  return s.str();
}

}  // namespace lpflow
