#include "lpflow/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "lpflow/error.hpp"
#include "lpflow/expression.hpp"

namespace lpflow {

namespace {

std::string where(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  if (m.is_null()) return "";
  return "line " + std::to_string(m.line + 1) + " column " + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, where(n) + msg);
}

void only_keys(const YAML::Node& map, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!map.IsMap()) fail(map, "'" + section + "' must be a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "' in " + section);
  }
}

template <class T>
T as(const YAML::Node& n, const std::string& key, const char* expected) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, "'" + key + "' expects " + expected);
  }
}

double number(const YAML::Node& map, const char* key, double fallback) {
  const YAML::Node n = map[key];
  return n ? as<double>(n, key, "a number") : fallback;
}

double positive(const YAML::Node& map, const char* key, double fallback) {
  const double v = number(map, key, fallback);
  if (!(v > 0)) fail(map[key] ? map[key] : map, std::string("'") + key + "' must be positive");
  return v;
}

int count(const YAML::Node& map, const char* key, int fallback, int minimum = 1) {
  const YAML::Node n = map[key];
  const int v = n ? as<int>(n, key, "an integer") : fallback;
  if (v < minimum) fail(n ? n : map, std::string("'") + key + "' must be at least " + std::to_string(minimum));
  return v;
}

Vec3 vec3(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence() || n.size() != 3) fail(n, "'" + key + "' expects a list of three numbers");
  return {as<double>(n[0], key, "a number"), as<double>(n[1], key, "a number"), as<double>(n[2], key, "a number")};
}

ParamMap params(const YAML::Node& n, const std::string& key) {
  if (!n.IsMap()) fail(n, "'" + key + "' must be a mapping of names to numbers");
  ParamMap out;
  for (const auto& kv : n) out[kv.first.as<std::string>()] = as<double>(kv.second, kv.first.as<std::string>(), "a number");
  return out;
}

Shape shape(const YAML::Node& n, const std::string& section) {
  only_keys(n, section, {"kind", "lo", "hi", "r_in", "r_out", "z_lo", "z_hi"});
  const std::string kind = n["kind"] ? as<std::string>(n["kind"], "kind", "a string") : "box";
  if (kind == "box") {
    if (!n["lo"] || !n["hi"]) fail(n, section + " box needs lo and hi");
    const Vec3 lo = vec3(n["lo"], "lo"), hi = vec3(n["hi"], "hi");
    if (!(lo.array() < hi.array()).all()) fail(n, section + " box needs lo < hi");
    return Shape::box(lo, hi);
  }
  if (kind == "cylinder_shell") {
    const double r_in = number(n, "r_in", 0.5), r_out = number(n, "r_out", 1.5);
    const double z_lo = number(n, "z_lo", -0.5), z_hi = number(n, "z_hi", 0.5);
    if (!(0 <= r_in && r_in < r_out && z_lo < z_hi)) fail(n, section + " shell needs 0 <= r_in < r_out and z_lo < z_hi");
    return Shape::cylinder_shell(r_in, r_out, z_lo, z_hi);
  }
  fail(n["kind"], "unknown shape kind '" + kind + "' (box, cylinder_shell)");
}

DomainSpec domain(const YAML::Node& n) {
  only_keys(n, "domain", {"kind", "lo", "hi", "periods", "sampling"});
  const std::string kind = n["kind"] ? as<std::string>(n["kind"], "kind", "a string") : "box";
  if (kind == "torus") {
    const Vec3 periods = n["periods"] ? vec3(n["periods"], "periods") : Vec3::Ones();
    if (!(periods.array() > 0).all()) fail(n["periods"], "torus periods must be positive");
    if (n["lo"] || n["hi"] || n["sampling"]) fail(n, "torus domains take only 'periods'");
    return DomainSpec::flat_torus(periods);
  }
  if (kind != "box") fail(n["kind"], "unknown domain kind '" + kind + "' (box, torus)");
  if (!n["lo"] || !n["hi"]) fail(n, "box domain needs lo and hi");
  const Vec3 lo = vec3(n["lo"], "lo"), hi = vec3(n["hi"], "hi");
  if (!(lo.array() < hi.array()).all()) fail(n, "box domain needs lo < hi");
  if (n["sampling"]) return DomainSpec::box(lo, hi, shape(n["sampling"], "domain.sampling"));
  return DomainSpec::box(lo, hi);
}

}  // namespace

void AnalysisConfig::propagate() {
  census.rng_seed = seed;
  census.threads = threads;
  basin.seed = seed;
  basin.threads = threads;
  trapped.seed = seed;
  trapped.threads = threads;
  attractor.seed = seed;
  attractor.threads = threads;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

AnalysisConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::ConfigError, origin + ": line " + std::to_string(e.mark.line + 1) + " column " +
                                            std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw Error(ErrorCode::ConfigError, origin + ": top level must be a mapping");

  AnalysisConfig c;
  c.path = origin;
  c.hash = fnv1a(text);
  try {
    only_keys(root, "config", {"seed", "threads", "output_dir", "tolerance", "flow", "domain", "sections", "census",
                               "certificates", "basin", "trapped", "attractor", "surgery"});
    if (root["seed"]) c.seed = as<std::uint64_t>(root["seed"], "seed", "a non-negative integer");
    c.threads = static_cast<unsigned>(count(root, "threads", 1));
    if (root["output_dir"]) c.output_dir = as<std::string>(root["output_dir"], "output_dir", "a path");
    c.tolerance = positive(root, "tolerance", c.tolerance);

    const YAML::Node flow = root["flow"];
    if (!flow && !root["surgery"]) fail(root, "missing 'flow' section");
    if (flow) {
      only_keys(flow, "flow", {"builtin", "params", "expression", "constants"});
      if (flow["builtin"] && flow["expression"]) fail(flow, "flow takes either 'builtin' or 'expression', not both");
      if (flow["builtin"]) {
        c.flow.builtin = as<std::string>(flow["builtin"], "builtin", "a name");
        if (flow["params"]) c.flow.params = params(flow["params"], "params");
      } else if (flow["expression"]) {
        const YAML::Node e = flow["expression"];
        only_keys(e, "flow.expression", {"x", "y", "z"});
        const char* axes[] = {"x", "y", "z"};
        for (int i = 0; i < 3; ++i) {
          if (!e[axes[i]]) fail(e, std::string("expression needs component '") + axes[i] + "'");
          c.flow.expression[static_cast<std::size_t>(i)] = as<std::string>(e[axes[i]], axes[i], "an expression string");
        }
        if (flow["constants"]) c.flow.constants = params(flow["constants"], "constants");
        if (!root["domain"]) fail(flow, "expression flows need a 'domain' section");
      } else {
        fail(flow, "flow needs 'builtin' or 'expression'");
      }
    }
    if (root["domain"]) {
      if (!flow || !c.flow.is_expression()) fail(root["domain"], "'domain' applies to expression flows only");
      c.domain = domain(root["domain"]);
    }

    if (const YAML::Node s = root["sections"]) {
      if (!s.IsSequence()) fail(s, "'sections' must be a list");
      for (const auto& item : s) {
        only_keys(item, "sections[]", {"anchor", "normal", "half_width"});
        if (!item["anchor"] || !item["normal"]) fail(item, "a section needs anchor and normal");
        SectionSpec sec{vec3(item["anchor"], "anchor"), vec3(item["normal"], "normal"),
                        positive(item, "half_width", 1.0)};
        if (sec.normal.norm() == 0) fail(item["normal"], "section normal must be nonzero");
        sec.normal.normalize();
        c.sections.push_back(sec);
      }
    }

    if (const YAML::Node n = root["census"]) {
      only_keys(n, "census", {"seeds", "period_bound", "max_returns", "dedup"});
      c.census.seeds = count(n, "seeds", c.census.seeds);
      c.census.period_bound = positive(n, "period_bound", c.census.period_bound);
      c.census.max_returns = count(n, "max_returns", c.census.max_returns);
      c.census.dedup_threshold = positive(n, "dedup", c.census.dedup_threshold);
    }
    if (const YAML::Node n = root["certificates"]) {
      only_keys(n, "certificates", {"alpha", "rate", "T", "spacing", "K", "horizon"});
      auto& k = c.certificates;
      k.alpha = positive(n, "alpha", k.alpha);
      k.rate = positive(n, "rate", k.rate);
      k.T = positive(n, "T", k.T);
      k.spacing = positive(n, "spacing", k.spacing);
      k.K = positive(n, "K", k.K);
      k.horizon = positive(n, "horizon", k.horizon);
      if (k.K < 1) fail(n["K"], "'K' must be at least 1");
    }
    if (const YAML::Node n = root["basin"]) {
      only_keys(n, "basin", {"samples", "horizon", "transient", "sample_dt", "batch", "running_step"});
      c.basin.samples = count(n, "samples", c.basin.samples, 100);
      c.basin.horizon = positive(n, "horizon", c.basin.horizon);
      c.basin.t_transient = number(n, "transient", c.basin.t_transient);
      c.basin.sample_dt = positive(n, "sample_dt", c.basin.sample_dt);
      c.basin.batch = count(n, "batch", c.basin.batch);
      c.running_step = count(n, "running_step", c.running_step);
      if (c.basin.t_transient >= c.basin.horizon) fail(n, "'transient' must be below 'horizon'");
    }
    if (const YAML::Node n = root["trapped"]) {
      only_keys(n, "trapped", {"samples", "N", "sample_dt", "batch", "region"});
      c.trapped.samples = count(n, "samples", c.trapped.samples);
      c.trapped.sample_dt = positive(n, "sample_dt", c.trapped.sample_dt);
      c.trapped.batch = count(n, "batch", c.trapped.batch);
      if (const YAML::Node N = n["N"]) {
        if (!N.IsSequence() || N.size() == 0) fail(N, "'N' must be a nonempty list of times");
        c.trapped_N.clear();
        for (const auto& v : N) {
          const double t = as<double>(v, "N", "a number");
          if (!(t > 0)) fail(v, "'N' entries must be positive");
          c.trapped_N.push_back(t);
        }
      }
      if (n["region"]) c.trapped_region = shape(n["region"], "trapped.region");
    }
    if (const YAML::Node n = root["attractor"]) {
      only_keys(n, "attractor", {"boundary_samples", "interior_samples", "trap_time", "horizon", "neighborhood"});
      auto& a = c.attractor;
      a.boundary_samples = count(n, "boundary_samples", a.boundary_samples);
      a.interior_samples = count(n, "interior_samples", a.interior_samples);
      a.trap_time = positive(n, "trap_time", a.trap_time);
      a.horizon = positive(n, "horizon", a.horizon);
      if (n["neighborhood"]) c.neighborhood = shape(n["neighborhood"], "attractor.neighborhood");
    }
    if (const YAML::Node n = root["surgery"]) {
      only_keys(n, "surgery", {"lambda", "mu", "gamma", "tau", "budget"});
      auto& s = c.surgery;
      s.present = true;
      if (!n["lambda"] || !n["mu"]) fail(n, "surgery needs lambda and mu");
      s.saddle.lambda = number(n, "lambda", 0);
      s.saddle.mu = number(n, "mu", 0);
      s.saddle.gamma = number(n, "gamma", 1.0);
      s.tau_given = static_cast<bool>(n["tau"]);
      s.saddle.tau = positive(n, "tau", 1.0);
      if (const YAML::Node b = n["budget"]) {
        only_keys(b, "surgery.budget", {"C", "eps", "lambda_rate", "alpha"});
        BudgetInputs in;
        in.C = positive(b, "C", in.C);
        in.eps = positive(b, "eps", in.eps);
        in.lambda_rate = positive(b, "lambda_rate", in.lambda_rate);
        in.alpha = positive(b, "alpha", in.alpha);
        s.budget = in;
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, origin + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, origin + ": " + std::string(e.what()).substr(std::string("ConfigError: ").size()));
  }
  if (const char* env = std::getenv("OUTPUT_DIR"); env && *env) c.output_dir = env;
  c.propagate();
  return c;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

BuiltinFlow build_flow(const AnalysisConfig& config) {
  BuiltinFlow out;
  if (config.flow.builtin.empty() && config.flow.expression[0].empty()) {
    throw Error(ErrorCode::ConfigError, config.path + ": missing 'flow' section");
  }
  if (!config.flow.is_expression()) {
    try {
      out = make_builtin(config.flow.builtin, config.flow.params);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InvalidArgument) throw;
      throw Error(ErrorCode::ConfigError, config.path + ": " + e.what());
    }
  } else {
    auto exprs = std::make_shared<std::array<Expression, 3>>();
    const char* axes[] = {"x", "y", "z"};
    for (std::size_t i = 0; i < 3; ++i) {
      try {
        (*exprs)[i] = Expression::parse(config.flow.expression[i], config.flow.constants);
      } catch (const ExpressionError& e) {
        throw Error(ErrorCode::ConfigError, config.path + ": flow.expression." + axes[i] + " column " +
                                                std::to_string(e.column()) + ": " + e.what());
      }
    }
    out.spec.name = "expression";
    out.spec.domain = *config.domain;
    out.spec.field = [exprs](const Vec3& p) {
      return Vec3((*exprs)[0].eval(p), (*exprs)[1].eval(p), (*exprs)[2].eval(p));
    };
    out.params = config.flow.constants;
  }
  if (!config.sections.empty()) out.sections = config.sections;
  if (out.sections.empty()) out.sections = auto_sections(out.spec, 4, config.seed);
  return out;
}

}  // namespace lpflow
