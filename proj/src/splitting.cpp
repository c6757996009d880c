#include "lpflow/splitting.hpp"

#include <algorithm>
#include <cmath>

#include "lpflow/error.hpp"

namespace lpflow {

namespace {

Vec2 canonical_sign(Vec2 v) {
  v.normalize();
  if (v.x() < 0 || (v.x() == 0 && v.y() < 0)) v = -v;
  return v;
}

// Unit eigenvector of a 2x2 matrix for the real eigenvalue ev.
Vec2 eigenvector(const Mat2& m, double ev) {
  const Vec2 a(m(0, 1), ev - m(0, 0));
  const Vec2 b(ev - m(1, 1), m(1, 0));
  const Vec2& v = a.squaredNorm() >= b.squaredNorm() ? a : b;
  if (v.squaredNorm() == 0.0) {
    // m is a multiple of the identity; any direction works.
    return Vec2::UnitX();
  }
  return canonical_sign(v);
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Number of partition gaps from index i spanning exactly T, or -1.
long gaps_for(const NormalCocycle& c, std::size_t i, double T) {
  const std::size_t n = c.size();
  const double tol = 1e-9 * std::max(1.0, T);
  double elapsed = 0.0;
  for (long k = 0;; ++k) {
    if (std::abs(elapsed - T) <= tol) return k;
    if (elapsed > T + tol) return -1;
    const std::size_t j = i + static_cast<std::size_t>(k);
    if (j >= n && !c.closed) return -1;
    elapsed += c.times[j % n + 1] - c.times[j % n];
  }
}

void require_directions(const NormalCocycle& c, const std::vector<DirectionPair>& dirs) {
  c.validate();
  if (dirs.size() != c.frames.size()) {
    throw Error(ErrorCode::MissingDirections, "need one direction pair per partition point");
  }
}

}  // namespace

std::string to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::Dominated: return "dominated";
    case CertificateKind::ContractionRate: return "contraction-rate";
    case CertificateKind::Angle: return "angle";
    case CertificateKind::Hyperbolic: return "hyperbolic";
  }
  return "unknown";
}

double SplittingCertificate::worst_lhs() const {
  double w = -std::numeric_limits<double>::infinity();
  for (const Margin& m : margins) w = std::max(w, m.lhs);
  return w;
}

void SplittingCertificate::finalize() {
  verdict = std::all_of(margins.begin(), margins.end(), [](const Margin& m) { return m.pass; });
}

DirectionPair eigen_directions(const Mat2& m) {
  const double tr = m.trace();
  const double det = m.determinant();
  const double disc = tr * tr - 4 * det;
  if (!(disc > 0)) throw Error(ErrorCode::NotASaddle, "eigenvalues are not real and distinct");
  const double s = std::sqrt(disc);
  const double big = tr >= 0 ? 0.5 * (tr + s) : 0.5 * (tr - s);
  const double small = det / big;
  if (!(std::abs(small) < 1.0 && std::abs(big) > 1.0)) {
    throw Error(ErrorCode::NotASaddle, "eigenvalues do not straddle the unit circle");
  }
  DirectionPair d;
  d.stable = eigenvector(m, small);
  d.unstable = eigenvector(m, big);
  return d;
}

DirectionPair eigen_directions(const PeriodicOrbit& orbit) {
  if (!orbit.is_saddle()) throw Error(ErrorCode::NotASaddle, "orbit " + orbit.name + " is not a saddle");
  DirectionPair d = eigen_directions(orbit.monodromy);
  d.base = orbit.point;
  d.frame = orbit.frame;
  d.source = orbit.name;
  return d;
}

double graph_angle(const Vec2& e, const Vec2& f) {
  if (e.squaredNorm() == 0.0 || f.squaredNorm() == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "graph_angle needs nonzero directions");
  }
  const Vec2 eu = e.normalized();
  const Vec2 fu = f.normalized();
  const double along = eu.dot(fu);
  const double across = cross2(eu, fu);
  if (std::abs(along) <= 1e-12) throw Error(ErrorCode::PerpendicularPair, "F is the orthogonal complement of E");
  return std::abs(across / along);
}

std::vector<DirectionPair> transport_directions(const NormalCocycle& cocycle,
                                                const DirectionPair& at_start) {
  cocycle.validate();
  std::vector<DirectionPair> out;
  out.reserve(cocycle.frames.size());
  DirectionPair cur = at_start;
  cur.base = cocycle.frames.front().base;
  cur.frame = cocycle.frames.front();
  out.push_back(cur);
  for (std::size_t i = 0; i < cocycle.size(); ++i) {
    DirectionPair next = cur;
    next.stable = (cocycle.maps[i] * cur.stable).normalized();
    next.unstable = (cocycle.maps[i] * cur.unstable).normalized();
    next.frame = cocycle.frames[i + 1];
    next.base = next.frame.base;
    out.push_back(next);
    cur = next;
  }
  return out;
}

SplittingCertificate check_contraction_rate(const PeriodicOrbit& orbit, double rate) {
  if (!(rate > 0 && rate < 1)) throw Error(ErrorCode::InvalidArgument, "contraction rate must lie in (0, 1)");
  if (!orbit.is_saddle() || !orbit.dissipative) {
    throw Error(ErrorCode::NotADissipativeSaddle, "orbit " + orbit.name + " is not a dissipative saddle");
  }
  SplittingCertificate c;
  c.subject = orbit.name;
  c.kind = CertificateKind::ContractionRate;
  c.params = {{"rate", rate}, {"period", orbit.period}};
  const double lhs = std::abs(orbit.lambda);
  const double bound = std::pow(rate, orbit.period);
  c.margins.push_back({orbit.period, lhs, bound, lhs < bound, "stable-multiplier"});
  c.finalize();
  return c;
}

SplittingCertificate check_angle_bound(const std::vector<DirectionPair>& pairs, double alpha) {
  if (!(alpha > 0)) throw Error(ErrorCode::InvalidArgument, "angle floor must be positive");
  SplittingCertificate c;
  c.subject = "directions";
  c.kind = CertificateKind::Angle;
  double min_angle = std::numeric_limits<double>::max();
  int perpendicular = 0;
  for (const DirectionPair& p : pairs) {
    double inverse = 0.0;
    try {
      const double a = graph_angle(p.stable, p.unstable);
      min_angle = std::min(min_angle, a);
      inverse = a > 0 ? 1.0 / a : std::numeric_limits<double>::max();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PerpendicularPair) throw;
      ++perpendicular;
    }
    c.margins.push_back({0.0, inverse, 1.0 / alpha, inverse < 1.0 / alpha, p.source});
  }
  c.params = {{"alpha", alpha},
              {"min_angle", min_angle},
              {"perpendicular_pairs", static_cast<double>(perpendicular)}};
  c.finalize();
  return c;
}

SplittingCertificate check_angle_bound(const std::vector<PeriodicOrbit>& orbits, double alpha) {
  std::vector<DirectionPair> pairs;
  for (const PeriodicOrbit& o : orbits) {
    if (o.is_saddle()) pairs.push_back(eigen_directions(o));
  }
  SplittingCertificate c = check_angle_bound(pairs, alpha);
  c.subject = "saddles";
  return c;
}

SplittingCertificate check_dominated(const NormalCocycle& cocycle,
                                     const std::vector<DirectionPair>& directions, double T) {
  require_directions(cocycle, directions);
  if (!(T > 0)) throw Error(ErrorCode::InvalidArgument, "domination time must be positive");
  SplittingCertificate c;
  c.subject = directions.front().source;
  c.kind = CertificateKind::Dominated;
  c.params = {{"T", T}};
  const std::size_t n = cocycle.size();
  c.spacing = cocycle.duration() / static_cast<double>(n);
  const std::size_t starts = cocycle.closed ? n : n + 1;
  for (std::size_t i = 0; i < starts; ++i) {
    const long k = gaps_for(cocycle, i, T);
    if (k <= 0) continue;
    const std::size_t j = (i + static_cast<std::size_t>(k)) % (cocycle.closed ? n : n + 1);
    const Mat2 m = cocycle.product(i, static_cast<std::size_t>(k));
    const double forward = (m * directions[i].stable).norm();
    const double backward = m.partialPivLu().solve(directions[j].unstable).norm();
    const double lhs = forward * backward;
    c.margins.push_back({cocycle.times[i], lhs, kDominationBound, lhs <= kDominationBound, ""});
  }
  if (c.margins.empty()) {
    throw Error(ErrorCode::BadPartition, "no partition point reaches exactly T later");
  }
  c.finalize();
  return c;
}

SplittingCertificate check_hyperbolic(const NormalCocycle& cocycle,
                                      const std::vector<DirectionPair>& directions, double K,
                                      double rate, double horizon) {
  require_directions(cocycle, directions);
  if (!(K >= 1) || !(rate > 0) || !(horizon > 0)) {
    throw Error(ErrorCode::InvalidArgument, "hyperbolicity needs K >= 1, rate > 0, horizon > 0");
  }
  SplittingCertificate c;
  c.subject = directions.front().source;
  c.kind = CertificateKind::Hyperbolic;
  c.params = {{"K", K}, {"rate", rate}, {"horizon", horizon}};
  const std::size_t n = cocycle.size();
  c.spacing = cocycle.duration() / static_cast<double>(n);
  const std::size_t starts = cocycle.closed ? n : 1;
  for (std::size_t i = 0; i < starts; ++i) {
    Mat2 m = Mat2::Identity();
    double t = 0.0;
    for (std::size_t k = 0;; ++k) {
      const std::size_t j = i + k;
      if (j >= n && !cocycle.closed) break;
      const std::size_t a = j % n;
      const double dt = cocycle.times[a + 1] - cocycle.times[a];
      if (t + dt > horizon * (1 + 1e-12)) break;
      m = cocycle.maps[a] * m;
      t += dt;
      const std::size_t end = cocycle.closed ? (j + 1) % n : j + 1;
      const double bound = K * std::exp(-rate * t);
      const double s = (m * directions[i].stable).norm();
      const double u = m.partialPivLu().solve(directions[end].unstable).norm();
      c.margins.push_back({t, s, bound, s <= bound, "stable"});
      c.margins.push_back({t, u, bound, u <= bound, "unstable"});
    }
  }
  c.finalize();
  return c;
}

double smallest_dominating_time(const NormalCocycle& cocycle,
                                const std::vector<DirectionPair>& directions, double T_max) {
  require_directions(cocycle, directions);
  const std::size_t n = cocycle.size();
  double T = 0.0;
  for (std::size_t k = 0;; ++k) {
    const std::size_t j = k;
    if (j >= n && !cocycle.closed) return -1.0;
    T += cocycle.times[j % n + 1] - cocycle.times[j % n];
    if (T > T_max * (1 + 1e-12)) return -1.0;
    try {
      if (check_dominated(cocycle, directions, T).verdict) return T;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BadPartition) throw;
    }
  }
}

namespace {

double drift(const Vec2& a, const Vec2& b) { return std::abs(cross2(a.normalized(), b.normalized())); }

Vec2 stable_input(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return canonical_sign(svd.matrixV().col(1));
}

Vec2 unstable_output(const LinearPoincare& lp, const NormalFrame& at) {
  Eigen::JacobiSVD<Mat2> svd(lp.matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 u = lp.target.basis() * svd.matrixU().col(0);
  return canonical_sign(project_normal(at, u));
}

}  // namespace

OseledetsDirections oseledets_directions(const VectorFieldSpec& spec, const Vec3& x, double horizon,
                                         double tol) {
  if (!(horizon > 0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  OseledetsDirections out;
  out.horizon = horizon;
  const NormalFrame frame = normal_frame(spec, x);
  out.directions.base = x;
  out.directions.frame = frame;
  out.directions.source = "oseledets";

  const Vec2 s_h = stable_input(linear_poincare(spec, frame, horizon, tol).matrix);
  const Vec2 s_h1 = stable_input(linear_poincare(spec, frame, horizon + 1, tol).matrix);
  // Backward start points come from the unreduced flow so tangent frames stay
  // consistent with x.
  auto back = [&](double h) {
    const TrajectorySegment seg = flow(spec, x, -h, {tol, 0.0});
    const Vec3 y = spec.domain.displacement(x, seg.end) + x;
    return unstable_output(linear_poincare(spec, y, h, tol), frame);
  };
  const Vec2 u_h = back(horizon);
  const Vec2 u_h1 = back(horizon + 1);
  out.directions.stable = s_h;
  out.directions.unstable = u_h;
  out.stable_drift = drift(s_h, s_h1);
  out.unstable_drift = drift(u_h, u_h1);
  out.converged = out.stable_drift < 1e-8 && out.unstable_drift < 1e-8;
  return out;
}

}  // namespace lpflow
