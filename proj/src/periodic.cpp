#include "lpflow/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "lpflow/error.hpp"
#include "lpflow/parallel.hpp"

namespace lpflow {

std::string to_string(OrbitClass c) {
  switch (c) {
    case OrbitClass::Sink: return "sink";
    case OrbitClass::Source: return "source";
    case OrbitClass::Saddle: return "saddle";
    case OrbitClass::NonHyperbolic: return "nonhyperbolic";
  }
  return "unknown";
}

namespace {

// Signed distance to a section. On tori the section normal must be a
// coordinate axis and the distance wraps with that axis' period.
struct SectionGeometry {
  const DomainSpec* domain = nullptr;
  SectionSpec section;
  int axis = -1;
  double period = 0.0;
  Mat32 basis;

  double signed_distance(const Vec3& y) const {
    double g = section.normal.dot(y - section.anchor);
    if (axis >= 0) g -= period * std::floor(g / period + 0.5);
    return g;
  }

  bool within(const Vec3& y) const {
    const Vec3 d = domain->displacement(section.anchor, domain->reduce(y));
    const Vec3 in_plane = d - section.normal * section.normal.dot(d);
    return in_plane.norm() <= section.half_width;
  }
};

SectionGeometry make_geometry(const DomainSpec& domain, SectionSpec section) {
  const double len = section.normal.norm();
  if (!(len > 0) || !(section.half_width > 0)) {
    throw Error(ErrorCode::InvalidArgument, "section needs a nonzero normal and positive half-width");
  }
  section.normal /= len;
  SectionGeometry g;
  g.domain = &domain;
  g.section = section;
  if (domain.is_torus()) {
    Eigen::Index axis = 0;
    const double m = section.normal.cwiseAbs().maxCoeff(&axis);
    if (m < 1.0 - 1e-12) {
      throw Error(ErrorCode::InvalidArgument, "sections on a torus must be normal to a coordinate axis");
    }
    g.axis = static_cast<int>(axis);
    g.period = domain.periods[axis];
  }
  g.basis = frame_from_seed(section.anchor, section.normal, section.normal.unitOrthogonal()).basis();
  return g;
}

struct EigenPair {
  std::complex<double> small;
  std::complex<double> large;
};

EigenPair multipliers(const Mat2& m, double det) {
  const double tr = m.trace();
  const double disc = tr * tr - 4 * det;
  if (disc >= 0) {
    const double s = std::sqrt(disc);
    const double big = tr >= 0 ? 0.5 * (tr + s) : 0.5 * (tr - s);
    if (big == 0.0) return {0.0, 0.0};
    double small = det / big;
    double large = big;
    if (std::abs(small) > std::abs(large)) std::swap(small, large);
    return {small, large};
  }
  const double mod = std::sqrt(det);
  const double th = std::acos(std::clamp(tr / (2 * mod), -1.0, 1.0));
  return {std::polar(mod, -th), std::polar(mod, th)};
}

}  // namespace

void check_transversal(const VectorFieldSpec& spec, const SectionSpec& section) {
  const Vec3 v = evaluate_field(spec, section.anchor);
  const Vec3 n = section.normal.normalized();
  if (std::abs(v.dot(n)) < 0.1 * v.norm()) {
    throw Error(ErrorCode::NonTransversalSection, "field is nearly tangent to the section at its anchor");
  }
}

ReturnResult return_map(const VectorFieldSpec& spec, const SectionSpec& section, const Vec3& x,
                        const ReturnOptions& opts) {
  const SectionGeometry geo = make_geometry(spec.domain, section);
  const double scale = 1.0 + x.norm();
  if (std::abs(geo.signed_distance(x)) > 1e-7 * scale || !geo.within(x)) {
    throw Error(ErrorCode::InvalidArgument, "return map start point is not on the section");
  }
  if (opts.returns < 1) throw Error(ErrorCode::InvalidArgument, "returns must be >= 1");
  const Vec3 v0 = evaluate_field(spec, x);

  detail::Augmented a{x, Mat3::Identity(), 0.0, v0.unitOrthogonal()};
  using Stepper = ode::DormandPrince<16, detail::TangentRhs>;
  Stepper stepper(detail::TangentRhs{&spec}, 0.0, detail::pack(a), detail::control_for(opts.tol));

  int found = 0;
  std::optional<ReturnResult> result;
  constexpr double kMinReturnTime = 1e-8;

  auto observer = [&](const ode::StepRecord<16>& rec) {
    const Vec3 y1 = rec.y1.segment<3>(0);
    if (!spec.domain.contains(y1)) {
      throw Error(ErrorCode::LeftDomain, "trajectory left the domain before returning");
    }
    const double g0 = geo.signed_distance(rec.y0.segment<3>(0));
    const double g1 = geo.signed_distance(y1);
    const bool crossing = g0 < 0 && g1 >= 0 && (geo.axis < 0 || g1 - g0 < 0.5 * geo.period);
    if (!crossing) return true;

    // Bracket on the cubic interpolant, then polish with exact partial steps.
    double lo = rec.t0;
    double hi = rec.t1;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (geo.signed_distance(rec.hermite(mid).template segment<3>(0)) < 0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    double tc = 0.5 * (lo + hi);
    detail::AugState yc = stepper.single_step(rec.t0, rec.y0, rec.f0, tc - rec.t0);
    for (int it = 0; it < 4; ++it) {
      const Vec3 p = yc.segment<3>(0);
      const double g = geo.signed_distance(p);
      const double rate = geo.section.normal.dot(spec.field(p));
      if (rate == 0.0 || std::abs(g) < 1e-15 * scale) break;
      tc = std::clamp(tc - g / rate, rec.t0, rec.t1);
      yc = stepper.single_step(rec.t0, rec.y0, rec.f0, tc - rec.t0);
    }
    const Vec3 pc = yc.segment<3>(0);
    if (tc <= kMinReturnTime || !geo.within(pc)) return true;
    if (++found < opts.returns) return true;

    const detail::Augmented s = detail::unpack(yc);
    ReturnResult r;
    r.cover_point = s.x;
    r.point = spec.domain.reduce(s.x);
    r.time = tc;
    r.fundamental = s.phi;
    r.log_det = s.log_det;
    result = r;
    return false;
  };

  try {
    stepper.advance(opts.horizon, observer);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::OutOfDomain) {
      throw Error(ErrorCode::LeftDomain, e.what());
    }
    throw;
  }
  if (!result) {
    throw Error(ErrorCode::NoReturn, "no return to the section within the horizon");
  }
  return *result;
}

Classification classify(std::complex<double> lambda, std::complex<double> mu, double det_full,
                        double tol_eig) {
  double m1 = std::abs(lambda);
  double m2 = std::abs(mu);
  if (m1 > m2) std::swap(m1, m2);
  Classification c;
  if (std::abs(m1 - 1.0) <= tol_eig || std::abs(m2 - 1.0) <= tol_eig) {
    c.cls = OrbitClass::NonHyperbolic;
  } else if (m2 < 1.0) {
    c.cls = OrbitClass::Sink;
  } else if (m1 > 1.0) {
    c.cls = OrbitClass::Source;
  } else {
    c.cls = OrbitClass::Saddle;
  }
  c.dissipative = std::abs(det_full) < 1.0 - kDissipativeMargin;
  return c;
}

Classification classify(std::complex<double> lambda, std::complex<double> mu) {
  return classify(lambda, mu, std::abs(lambda * mu), kEigenTolerance);
}

PeriodicOrbit analyze_orbit(const VectorFieldSpec& spec, const Vec3& p, double period, double tol) {
  if (!(period > 0)) throw Error(ErrorCode::InvalidArgument, "period must be positive");
  const LinearPoincare m = monodromy(spec, p, period, tol);
  PeriodicOrbit o;
  o.point = spec.domain.reduce(p);
  o.period = period;
  o.monodromy = m.matrix;
  o.frame = m.source;
  o.fundamental = m.fundamental;
  o.det_full = std::exp(m.log_det);
  // Determinant transfer: det P = det DX * |X(p)| / |X(X_t p)|.
  o.det_monodromy = o.det_full * spec.field(p).norm() / spec.field(m.end).norm();
  const EigenPair ev = multipliers(m.matrix, o.det_monodromy);
  o.lambda = ev.small;
  o.mu = ev.large;
  const Classification c = classify(o.lambda, o.mu, o.det_full);
  o.cls = c.cls;
  o.dissipative = c.dissipative;
  o.residual = spec.domain.distance(o.point, spec.domain.reduce(m.end));
  return o;
}

PeriodicOrbit find_periodic_orbit(const VectorFieldSpec& spec, const SectionSpec& section,
                                  const Vec3& seed, const OrbitOptions& opts) {
  check_transversal(spec, section);
  const SectionGeometry geo = make_geometry(spec.domain, section);
  const Mat32& basis = geo.basis;
  const Vec3 n = geo.section.normal;
  auto point_of = [&](const Vec2& xi) -> Vec3 { return geo.section.anchor + basis * xi; };

  struct Eval {
    Vec2 residual;
    Mat2 jacobian;
    ReturnResult ret;
    double gap;
  };
  // Displacement of the k-th return from its start in section coordinates.
  // On the twisted torus the tangent data is already expressed in the frame
  // that absorbs the gluing, so no reduction derivative is applied.
  auto evaluate = [&](const Vec2& xi) -> Eval {
    const Vec3 x = point_of(xi);
    const ReturnResult r =
        return_map(spec, geo.section, x, {opts.tol, opts.horizon, opts.returns});
    const Vec3 d = spec.domain.displacement(x, r.point);
    const Vec3 v = spec.field(r.cover_point);
    const Mat3 project = Mat3::Identity() - v * n.transpose() / n.dot(v);
    Eval e;
    e.residual = basis.transpose() * d;
    e.jacobian = basis.transpose() * project * r.fundamental * basis - Mat2::Identity();
    e.ret = r;
    e.gap = d.norm();
    return e;
  };

  Vec2 xi = basis.transpose() * spec.domain.displacement(geo.section.anchor, seed);
  Eval cur = evaluate(xi);
  const double scale = 1.0 + geo.section.anchor.norm();
  bool converged = cur.gap <= opts.newton_tol * scale;
  for (int it = 0; it < opts.max_iterations && !converged; ++it) {
    const double det = cur.jacobian.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-13) {
      throw Error(ErrorCode::NewtonDiverged, "singular return-map Jacobian");
    }
    const Vec2 delta = -cur.jacobian.partialPivLu().solve(cur.residual);
    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 12; ++halving, step *= 0.5) {
      const Vec2 trial_xi = xi + step * delta;
      if (!geo.within(point_of(trial_xi))) continue;
      try {
        Eval trial = evaluate(trial_xi);
        if (trial.residual.norm() < cur.residual.norm() || trial.gap <= opts.newton_tol * scale) {
          xi = trial_xi;
          cur = std::move(trial);
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::LeftDomain && e.code() != ErrorCode::NoReturn &&
            e.code() != ErrorCode::OutOfDomain) {
          throw;
        }
      }
    }
    if (!accepted) throw Error(ErrorCode::NewtonDiverged, "damped Newton made no progress");
    converged = cur.gap <= opts.newton_tol * scale;
    if (!converged && (step * delta).norm() < 1e-14 * scale) break;
  }
  if (!converged) {
    throw Error(ErrorCode::NewtonDiverged, "Newton iteration did not converge");
  }

  const Vec3 p = spec.domain.reduce(point_of(xi));
  double period = cur.ret.time;
  int returns = opts.returns;

  // Newton may land on an iterate of a shorter orbit.
  const double closure = std::max(1e-7, 1e3 * cur.gap);
  for (bool shrunk = true; shrunk;) {
    shrunk = false;
    for (int k = 5; k >= 2; --k) {
      try {
        const TrajectorySegment seg = flow(spec, p, period / k, {opts.tol, 0.0});
        if (spec.domain.distance(p, seg.end) < closure) {
          period /= k;
          returns = std::max(1, returns / k);
          shrunk = true;
          break;
        }
      } catch (const Error&) {
        // A failed partial flow cannot close.
      }
    }
  }

  PeriodicOrbit orbit = analyze_orbit(spec, p, period, opts.tol);
  orbit.returns = returns;
  return orbit;
}

int OrbitCatalog::count(OrbitClass c) const {
  return static_cast<int>(std::count_if(orbits.begin(), orbits.end(),
                                        [c](const PeriodicOrbit& o) { return o.cls == c; }));
}

int OrbitCatalog::dissipative_count() const {
  return static_cast<int>(std::count_if(orbits.begin(), orbits.end(),
                                        [](const PeriodicOrbit& o) { return o.dissipative; }));
}

int OrbitCatalog::dissipative_saddles() const {
  return static_cast<int>(std::count_if(orbits.begin(), orbits.end(), [](const PeriodicOrbit& o) {
    return o.dissipative && o.is_saddle();
  }));
}

std::vector<SectionSpec> auto_sections(const VectorFieldSpec& spec, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SectionSpec> out;
  for (int i = 0; i < count; ++i) {
    const Vec3 x = spec.domain.sample(rng);
    const Vec3 v = evaluate_field(spec, x);
    SectionSpec s;
    s.anchor = x;
    if (spec.domain.is_torus()) {
      Eigen::Index axis = 0;
      v.cwiseAbs().maxCoeff(&axis);
      s.normal = Vec3::Unit(axis) * (v[axis] >= 0 ? 1.0 : -1.0);
      s.half_width = spec.domain.periods.maxCoeff();
    } else {
      s.normal = v.normalized();
      s.half_width = 0.25 * (spec.domain.sampling.hi - spec.domain.sampling.lo).minCoeff();
    }
    out.push_back(s);
  }
  return out;
}

std::vector<Vec3> orbit_samples(const VectorFieldSpec& spec, const PeriodicOrbit& orbit, int count,
                                double tol) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(count) + 1);
  const double dt = orbit.period / count;
  for_each_sample(spec, orbit.point, orbit.period - 0.5 * dt, dt, tol, [&](double, const Vec3& p) {
    pts.push_back(p);
    return true;
  });
  return pts;
}

double orbit_distance(const DomainSpec& domain, const std::vector<Vec3>& candidate,
                      const std::vector<Vec3>& reference) {
  double jump = 1e300;
  if (domain.is_torus()) jump = 0.25 * domain.periods.minCoeff();
  const std::size_t n = reference.size();
  auto segment_distance = [&](const Vec3& a, const Vec3& d, const Vec3& q) {
    const Vec3 v = domain.displacement(a, q);
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return v.norm();
    const double s = std::clamp(v.dot(d) / len2, 0.0, 1.0);
    return (v - s * d).norm();
  };
  double worst = 0.0;
  for (const Vec3& q : candidate) {
    double best = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& a = reference[i];
      const Vec3& b = reference[(i + 1) % n];
      const Vec3 d = domain.displacement(a, b);
      if (d.norm() < jump) {
        best = std::min(best, segment_distance(a, d, q));
        continue;
      }
      // Across a gluing seam the chord is meaningless; extend the neighbouring
      // segments up to the seam instead.
      const Vec3& prev = reference[(i + n - 1) % n];
      const Vec3& next = reference[(i + 2) % n];
      const Vec3 before = domain.displacement(prev, a);
      const Vec3 after = domain.displacement(b, next);
      best = std::min(best, segment_distance(a, before.norm() < jump ? before : Vec3::Zero().eval(), q));
      best = std::min(best, segment_distance(b, after.norm() < jump ? (-after).eval() : Vec3::Zero().eval(), q));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

namespace {

double radical_inverse(unsigned base, std::uint64_t i) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

struct SeedTask {
  int section;
  Vec3 point;
};

struct SeedOutcome {
  std::vector<PeriodicOrbit> orbits;
  int attempts = 0;
  int failures = 0;
};

}  // namespace

OrbitCatalog enumerate_orbits(const VectorFieldSpec& spec, std::vector<SectionSpec> sections,
                              const CensusBudget& budget, double tol) {
  if (budget.seeds <= 0 || !(budget.period_bound > 0)) {
    throw Error(ErrorCode::InvalidArgument, "census budget must be positive");
  }
  if (sections.empty()) sections = auto_sections(spec, 4, budget.rng_seed);

  // Grid plus low-discrepancy seeds over each section patch.
  std::vector<SeedTask> tasks;
  const int per_section = std::max(1, budget.seeds / static_cast<int>(sections.size()));
  std::mt19937_64 rng(budget.rng_seed);
  std::uniform_real_distribution<double> shift(0.0, 1.0);
  for (std::size_t si = 0; si < sections.size(); ++si) {
    const SectionGeometry geo = make_geometry(spec.domain, sections[si]);
    const double hw = geo.section.half_width;
    // Seed patch: the section disc, clipped on box domains to the projection
    // of the sampling region's bounding box.
    Vec2 lo(-hw, -hw);
    Vec2 hi(hw, hw);
    if (!spec.domain.is_torus()) {
      const Shape& shape = spec.domain.sampling;
      Vec2 plo = Vec2::Constant(1e300);
      Vec2 phi = Vec2::Constant(-1e300);
      for (int c = 0; c < 8; ++c) {
        const Vec3 corner((c & 1) ? shape.hi.x() : shape.lo.x(), (c & 2) ? shape.hi.y() : shape.lo.y(),
                          (c & 4) ? shape.hi.z() : shape.lo.z());
        const Vec2 l = geo.basis.transpose() * (corner - geo.section.anchor);
        plo = plo.cwiseMin(l);
        phi = phi.cwiseMax(l);
      }
      lo = lo.cwiseMax(plo);
      hi = hi.cwiseMin(phi);
      if ((hi.array() <= lo.array()).any()) continue;
    }
    const Vec2 span = hi - lo;
    const int grid_n = std::max(1, static_cast<int>(std::floor(std::sqrt(per_section / 2.0))));
    const int halton_n = per_section - grid_n * grid_n;
    std::vector<Vec2> local;
    for (int i = 0; i < grid_n; ++i) {
      for (int j = 0; j < grid_n; ++j) {
        local.emplace_back(lo.x() + span.x() * (i + 0.5) / grid_n, lo.y() + span.y() * (j + 0.5) / grid_n);
      }
    }
    const double u0 = shift(rng);
    const double v0 = shift(rng);
    for (int k = 0; k < halton_n; ++k) {
      const double u = std::fmod(radical_inverse(2, static_cast<std::uint64_t>(k) + 1) + u0, 1.0);
      const double v = std::fmod(radical_inverse(3, static_cast<std::uint64_t>(k) + 1) + v0, 1.0);
      local.emplace_back(lo.x() + span.x() * u, lo.y() + span.y() * v);
    }
    for (const Vec2& l : local) {
      const Vec3 p = geo.section.anchor + geo.basis * l;
      if (!spec.domain.contains(p) || !geo.within(p)) continue;
      if (!spec.domain.is_torus() && !spec.domain.sampling.contains(p)) continue;
      tasks.push_back({static_cast<int>(si), p});
    }
  }

  std::vector<SeedOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), budget.threads, [&](std::size_t i) {
    const SeedTask& task = tasks[i];
    SeedOutcome& out = outcomes[i];
    const SectionSpec& section = sections[static_cast<std::size_t>(task.section)];
    int max_returns = 1;
    try {
      const ReturnResult first = return_map(spec, section, task.point,
                                            {tol, budget.period_bound * 1.5 + 1.0, 1});
      max_returns = std::clamp(static_cast<int>(std::floor(budget.period_bound / first.time + 1e-9)),
                               1, budget.max_returns);
    } catch (const Error&) {
      ++out.failures;
      return;
    }
    for (int k = 1; k <= max_returns; ++k) {
      ++out.attempts;
      try {
        OrbitOptions opts;
        opts.tol = tol;
        opts.returns = k;
        opts.horizon = budget.period_bound * 1.5 + 1.0;
        PeriodicOrbit o = find_periodic_orbit(spec, section, task.point, opts);
        o.section = task.section;
        out.orbits.push_back(std::move(o));
      } catch (const Error&) {
        ++out.failures;
      }
    }
  });

  OrbitCatalog catalog;
  catalog.period_bound = budget.period_bound;
  catalog.seeds_tried = static_cast<int>(tasks.size());
  std::vector<std::vector<Vec3>> dense;  // reference polylines for dedup
  for (SeedOutcome& out : outcomes) {
    catalog.newton_attempts += out.attempts;
    catalog.failures += out.failures;
    for (PeriodicOrbit& o : out.orbits) {
      ++catalog.converged;
      if (o.period > budget.period_bound * (1 + 1e-9)) {
        ++catalog.over_period_bound;
        continue;
      }
      const std::vector<Vec3> probe = orbit_samples(spec, o, 64, tol);
      bool duplicate = false;
      for (std::size_t j = 0; j < catalog.orbits.size() && !duplicate; ++j) {
        const PeriodicOrbit& known = catalog.orbits[j];
        if (std::abs(known.period - o.period) > 1e-6 * std::max(1.0, o.period)) continue;
        duplicate = orbit_distance(spec.domain, probe, dense[j]) <= budget.dedup_threshold;
      }
      if (duplicate) {
        ++catalog.duplicates;
        continue;
      }
      dense.push_back(orbit_samples(spec, o, 1024, tol));
      catalog.orbits.push_back(std::move(o));
    }
  }

  std::vector<std::size_t> order(catalog.orbits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return catalog.orbits[a].period < catalog.orbits[b].period - 1e-9;
  });
  std::vector<PeriodicOrbit> sorted;
  for (std::size_t i : order) sorted.push_back(std::move(catalog.orbits[i]));
  catalog.orbits = std::move(sorted);
  for (std::size_t i = 0; i < catalog.orbits.size(); ++i) {
    catalog.orbits[i].name = "orbit-" + std::to_string(i);
  }
  return catalog;
}

}  // namespace lpflow
