#include "lpflow/serialize.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpflow/error.hpp"

namespace lpflow {

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const Mat2& m) { return Json::array({Json::array({m(0, 0), m(0, 1)}), Json::array({m(1, 0), m(1, 1)})}); }

Json to_json(const Mat3& m) {
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(Json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

Json to_json(std::complex<double> z) { return {{"re", z.real()}, {"im", z.imag()}, {"abs", std::abs(z)}}; }

Json to_json(const NormalFrame& f) {
  return {{"base", to_json(f.base)}, {"direction", to_json(f.direction)}, {"e1", to_json(f.e1)}, {"e2", to_json(f.e2)}};
}

Json to_json(const NormalCocycle& c) {
  Json frames = Json::array(), maps = Json::array();
  for (const auto& f : c.frames) frames.push_back(to_json(f));
  for (const auto& m : c.maps) maps.push_back(to_json(m));
  // Map entries depend on the chosen frames; their spectra do not.
  return {{"partition", c.times}, {"closed", c.closed}, {"frame_dependent", {"maps"}}, {"frames", frames},
          {"maps", maps}};
}

Json to_json(const PeriodicOrbit& o) {
  return {{"name", o.name},
          {"point", to_json(o.point)},
          {"period", o.period},
          {"monodromy", to_json(o.monodromy)},
          {"frame_dependent", {"monodromy"}},
          {"frame", to_json(o.frame)},
          {"lambda", to_json(o.lambda)},
          {"mu", to_json(o.mu)},
          {"det_full", o.det_full},
          {"det_monodromy", o.det_monodromy},
          {"class", to_string(o.cls)},
          {"dissipative", o.dissipative},
          {"residual", o.residual},
          {"section", o.section},
          {"returns", o.returns}};
}

Json to_json(const OrbitCatalog& c) {
  Json orbits = Json::array();
  for (const auto& o : c.orbits) orbits.push_back(to_json(o));
  return {{"period_bound", c.period_bound},
          {"counts",
           {{"sink", c.count(OrbitClass::Sink)},
            {"source", c.count(OrbitClass::Source)},
            {"saddle", c.count(OrbitClass::Saddle)},
            {"nonhyperbolic", c.count(OrbitClass::NonHyperbolic)},
            {"dissipative", c.dissipative_count()},
            {"dissipative_saddles", c.dissipative_saddles()}}},
          {"search",
           {{"seeds_tried", c.seeds_tried},
            {"newton_attempts", c.newton_attempts},
            {"converged", c.converged},
            {"failures", c.failures},
            {"duplicates", c.duplicates},
            {"over_period_bound", c.over_period_bound}}},
          {"orbits", orbits}};
}

Json to_json(const RegionApprox& r, bool with_samples) {
  Json comps = Json::array();
  for (const auto& c : r.components) {
    Json j = {{"orbit", c.orbit},
              {"kind", to_string(c.kind)},
              {"period", c.period},
              {"eps_fat", c.eps_fat},
              {"sample_count", c.samples.size()}};
    if (with_samples) {
      Json pts = Json::array();
      for (const auto& p : c.samples) pts.push_back(to_json(p));
      j["samples"] = pts;
    }
    comps.push_back(j);
  }
  return {{"empty", r.empty()}, {"sinks", r.sinks()}, {"saddles", r.saddles()}, {"note", r.note}, {"components", comps}};
}

Json to_json(const Margin& m) {
  return {{"time", m.time}, {"lhs", m.lhs}, {"bound", m.bound}, {"pass", m.pass}, {"label", m.label}};
}

Json to_json(const SplittingCertificate& c) {
  Json margins = Json::array();
  for (const auto& m : c.margins) margins.push_back(to_json(m));
  Json params = Json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  return {{"subject", c.subject},
          {"kind", to_string(c.kind)},
          {"params", params},
          {"verdict", c.verdict},
          {"spacing", c.spacing},
          {"worst_lhs", c.margins.empty() ? Json(nullptr) : Json(c.worst_lhs())},
          {"margins", margins}};
}

Json to_json(const BasinEstimate& b) {
  Json fates = Json::array();
  for (Fate f : b.fates) fates.push_back(to_string(f));
  return {{"region", b.region},
          {"empty_region", b.empty_region},
          {"flag", b.empty_region ? "EmptyRegion" : ""},
          {"n", b.n},
          {"hits", b.hits},
          {"misses", b.misses},
          {"left_domain", b.left_domain},
          {"undecided", b.undecided},
          {"estimate", b.estimate},
          {"ci_low", b.ci_low},
          {"ci_high", b.ci_high},
          {"horizon", b.horizon},
          {"t_transient", b.t_transient},
          {"seed", b.seed},
          {"fates", fates}};
}

Json to_json(const std::vector<TrappedRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"N", r.N},
                   {"n", r.n},
                   {"trapped", r.trapped},
                   {"estimate", r.estimate},
                   {"ci_low", r.ci_low},
                   {"ci_high", r.ci_high}});
  }
  return out;
}

Json to_json(const AttractorVerdict& v) {
  return {{"candidate", v.candidate},
          {"neighborhood", v.neighborhood},
          {"trapping", v.trapping},
          {"convergence", v.convergence},
          {"attractor_evidence", v.evidence},
          {"boundary_checked", v.boundary_checked},
          {"boundary_outward", v.boundary_outward},
          {"interior_checked", v.interior_checked},
          {"interior_converged", v.interior_converged},
          {"max_final_distance", std::isfinite(v.max_final_distance) ? Json(v.max_final_distance) : Json(nullptr)}};
}

Json to_json(const Inequality& i) {
  return {{"label", i.label}, {"lhs", i.lhs}, {"rhs", i.rhs}, {"strict", i.strict}, {"margin", i.margin()},
          {"pass", i.pass}};
}

namespace {

Json checks(const std::vector<Inequality>& list) {
  Json out = Json::array();
  for (const auto& i : list) out.push_back(to_json(i));
  return out;
}

Json saddle(const SaddleData& d) {
  return {{"lambda", d.lambda}, {"mu", d.mu}, {"gamma", d.gamma}, {"tau", d.tau}, {"dissipative", d.dissipative()}};
}

}  // namespace

Json to_json(const SinkReport& r) {
  return {{"input", saddle(r.input)},
          {"saddle_matrix", to_json(r.saddle)},
          {"shear_matrix", to_json(r.shear)},
          {"product", to_json(r.product)},
          {"trace", r.trace},
          {"det", r.det},
          {"eigenvalues", Json::array({to_json(r.ev1), to_json(r.ev2)})},
          {"modulus", r.modulus},
          {"shear_deviation", r.shear_deviation},
          {"sink", r.sink}};
}

Json to_json(const PerturbationBudget& b) {
  return {{"C", b.C},       {"eps", b.eps}, {"lambda_rate", b.lambda_rate}, {"alpha", b.alpha},
          {"eps0", b.eps0}, {"eps1", b.eps1}, {"m", b.m},                   {"delta", b.delta},
          {"valid", b.valid()}, {"inequalities", checks(b.checks)}};
}

Json to_json(const PerturbedCocycle& p) {
  Json T = Json::array();
  for (const auto& t : p.T) T.push_back(to_json(t));
  return {{"input", saddle(p.input)},
          {"P", to_json(p.P)},
          {"S", to_json(p.S)},
          {"s_coefficient", p.s_coefficient},
          {"T", T},
          {"maps", p.perturbed.maps.size()},
          {"deviations", p.deviations},
          {"max_deviation", p.max_deviation()},
          {"lambda_target", p.lambda_target},
          {"lambda_out", to_json(p.lambda_out)},
          {"mu_out", to_json(p.mu_out)},
          {"det_out", p.det_out},
          {"valid", p.valid()},
          {"inequalities", checks(p.checks)}};
}

Json to_json(const DeterminantDiscrepancy& d) {
  return {{"t", d.t},
          {"mean_log_det_flow", d.mean_log_det_flow},
          {"mean_log_det_normal", d.mean_log_det_normal},
          {"difference", d.difference}};
}

Json document(const std::string& kind, Json payload) {
  Json doc = {{"schema", kSchemaVersion}, {"kind", kind}};
  for (auto it = payload.begin(); it != payload.end(); ++it) doc[it.key()] = it.value();
  return doc;
}

// -------------------------------------------------------------------- CSV

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw Error(ErrorCode::InvalidArgument, "CSV row width mismatch");
  rows_.push_back(std::move(row));
}

std::string CsvTable::quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string CsvTable::num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += quote(fields[i]);
    }
    out += "\r\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

CsvTable catalog_csv(const OrbitCatalog& c) {
  CsvTable t({"name", "px", "py", "pz", "period", "lambda_re", "lambda_im", "mu_re", "mu_im", "det", "class",
              "dissipative", "residual"});
  for (const auto& o : c.orbits) {
    t.add({o.name, CsvTable::num(o.point.x()), CsvTable::num(o.point.y()), CsvTable::num(o.point.z()),
           CsvTable::num(o.period), CsvTable::num(o.lambda.real()), CsvTable::num(o.lambda.imag()),
           CsvTable::num(o.mu.real()), CsvTable::num(o.mu.imag()), CsvTable::num(o.det_full), to_string(o.cls),
           o.dissipative ? "true" : "false", CsvTable::num(o.residual)});
  }
  return t;
}

CsvTable basin_csv(const BasinEstimate& b) {
  CsvTable t({"region", "horizon", "t_transient", "n", "hits", "misses", "left_domain", "undecided", "estimate",
              "ci_low", "ci_high", "flag"});
  t.add({b.region, CsvTable::num(b.horizon), CsvTable::num(b.t_transient), std::to_string(b.n),
         std::to_string(b.hits), std::to_string(b.misses), std::to_string(b.left_domain),
         std::to_string(b.undecided), CsvTable::num(b.estimate), CsvTable::num(b.ci_low), CsvTable::num(b.ci_high),
         b.empty_region ? "EmptyRegion" : ""});
  return t;
}

CsvTable trapped_csv(const std::vector<TrappedRow>& rows) {
  CsvTable t({"N", "n", "trapped", "estimate", "ci_low", "ci_high"});
  for (const auto& r : rows) {
    t.add({CsvTable::num(r.N), std::to_string(r.n), std::to_string(r.trapped), CsvTable::num(r.estimate),
           CsvTable::num(r.ci_low), CsvTable::num(r.ci_high)});
  }
  return t;
}

void write_file(const std::string& path, const std::string& contents) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << contents;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace lpflow
