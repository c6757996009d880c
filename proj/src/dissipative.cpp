#include "lpflow/dissipative.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lpflow/error.hpp"
#include "lpflow/parallel.hpp"

namespace lpflow {

// ---------------------------------------------------------------- PointIndex

std::size_t PointIndex::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t h = static_cast<std::size_t>(k.i) * 73856093u;
  h ^= static_cast<std::size_t>(k.j) * 19349663u;
  h ^= static_cast<std::size_t>(k.k) * 83492791u;
  return h;
}

PointIndex::PointIndex(const DomainSpec& domain, std::vector<Vec3> points, double radius)
    : domain_(domain), points_(std::move(points)), radius_(radius) {
  if (!(radius > 0)) throw Error(ErrorCode::InvalidArgument, "index radius must be positive");
  if (domain_.is_torus()) {
    for (int a = 0; a < 3; ++a) {
      cells_[a] = std::max(1, static_cast<int>(std::floor(domain_.periods[a] / radius)));
      cell_[a] = domain_.periods[a] / cells_[a];
    }
  } else {
    cell_ = Vec3::Constant(radius);
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    points_[i] = domain_.reduce(points_[i]);
    buckets_[key_of(points_[i])].push_back(static_cast<std::uint32_t>(i));
  }
}

PointIndex::Key PointIndex::key_of(const Vec3& x) const {
  const Vec3 r = domain_.reduce(x);
  return wrap({static_cast<long>(std::floor(r.x() / cell_.x())), static_cast<long>(std::floor(r.y() / cell_.y())),
               static_cast<long>(std::floor(r.z() / cell_.z()))});
}

PointIndex::Key PointIndex::wrap(Key k) const {
  if (!domain_.is_torus()) return k;
  auto w = [](long v, long n) { return ((v % n) + n) % n; };
  return {w(k.i, cells_[0]), w(k.j, cells_[1]), w(k.k, cells_[2])};
}

double PointIndex::nearest(const Vec3& x) const {
  if (points_.empty()) return std::numeric_limits<double>::infinity();
  const Key c = key_of(x);
  double best = std::numeric_limits<double>::infinity();
  for (long di = -1; di <= 1; ++di) {
    for (long dj = -1; dj <= 1; ++dj) {
      for (long dk = -1; dk <= 1; ++dk) {
        auto it = buckets_.find(wrap({c.i + di, c.j + dj, c.k + dk}));
        if (it == buckets_.end()) continue;
        for (std::uint32_t idx : it->second) best = std::min(best, domain_.distance(x, points_[idx]));
      }
    }
  }
  return best <= radius_ ? best : std::numeric_limits<double>::infinity();
}

// ------------------------------------------------------------------- region

std::string to_string(ComponentKind k) {
  switch (k) {
    case ComponentKind::Sink: return "sink";
    case ComponentKind::Saddle: return "saddle";
    case ComponentKind::Other: return "other";
  }
  return "unknown";
}

int RegionApprox::sinks() const {
  return static_cast<int>(std::count_if(components.begin(), components.end(),
                                        [](const RegionComponent& c) { return c.kind == ComponentKind::Sink; }));
}

int RegionApprox::saddles() const {
  return static_cast<int>(std::count_if(components.begin(), components.end(),
                                        [](const RegionComponent& c) { return c.kind == ComponentKind::Saddle; }));
}

void RegionApprox::index(const DomainSpec& domain) {
  indices_.clear();
  for (const RegionComponent& c : components) indices_.emplace_back(domain, c.samples, c.eps_fat);
}

bool RegionApprox::contains(const Vec3& x) const {
  if (indices_.size() != components.size()) {
    throw Error(ErrorCode::InvalidArgument, "region must be indexed before membership queries");
  }
  return std::any_of(indices_.begin(), indices_.end(), [&](const PointIndex& i) { return i.contains(x); });
}

double default_fattening(const PeriodicOrbit& orbit) { return std::max(1e-3, 10.0 * orbit.residual); }

namespace {

// Orbit samples no farther apart than `spacing` in space.
std::vector<Vec3> dense_orbit(const VectorFieldSpec& spec, const PeriodicOrbit& orbit, double spacing,
                              double tol) {
  double vmax = 0.0;
  for (const Vec3& p : orbit_samples(spec, orbit, 256, tol)) vmax = std::max(vmax, spec.field(p).norm());
  const double dt = 0.9 * spacing / std::max(vmax, kSingularityFloor);
  const auto count = static_cast<long>(std::ceil(orbit.period / dt));
  PeriodicOrbit copy = orbit;
  return orbit_samples(spec, copy, static_cast<int>(std::min<long>(count, 50'000'000L)), tol);
}

}  // namespace

RegionApprox dissipative_region(const VectorFieldSpec& spec, const OrbitCatalog& catalog, double eps_fat,
                                double tol) {
  RegionApprox region;
  region.note = "Saddle*_d approximated by the closure of cataloged dissipative saddles";
  for (const PeriodicOrbit& o : catalog.orbits) {
    if (!o.dissipative) continue;
    RegionComponent c;
    c.orbit = o.name;
    c.kind = o.is_sink() ? ComponentKind::Sink : o.is_saddle() ? ComponentKind::Saddle : ComponentKind::Other;
    c.period = o.period;
    c.eps_fat = eps_fat > 0 ? eps_fat : default_fattening(o);
    c.samples = dense_orbit(spec, o, c.eps_fat, tol);
    region.components.push_back(std::move(c));
  }
  region.index(spec.domain);
  return region;
}

// --------------------------------------------------------- divergence probes

double mean_divergence(const VectorFieldSpec& spec, const Vec3& x, double t, double tol) {
  if (!(t > 0)) throw Error(ErrorCode::InvalidArgument, "averaging time must be positive");
  return liouville_logdet(spec, x, t, tol) / t;
}

namespace {

// Position + log-det stepper sampled at the given increasing times.
template <class Visit>
void logdet_samples(const VectorFieldSpec& spec, const Vec3& x, const std::vector<double>& times, double tol,
                    Visit&& visit) {
  evaluate_field(spec, x);
  Eigen::Vector4d s;
  s << x, 0.0;
  auto stepper = ode::make_stepper<4>(detail::LogDetRhs{&spec}, 0.0, s, detail::control_for(tol));
  for (double t : times) {
    stepper.advance(t, [&](const ode::StepRecord<4>& rec) {
      detail::check_in_domain(spec, rec.y1.head<3>());
      return true;
    });
    if (!visit(t, stepper.state()[3])) return;
  }
}

std::mt19937_64 batch_rng(std::uint64_t seed, std::size_t batch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
  return std::mt19937_64(seq);
}

// Draws samples batch by batch so results do not depend on thread count.
std::vector<Vec3> batched_samples(const Shape& shape, int n, int batch, std::uint64_t seed) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  const int batches = (n + batch - 1) / batch;
  for (int b = 0; b < batches; ++b) {
    std::mt19937_64 rng = batch_rng(seed, static_cast<std::size_t>(b));
    const int count = std::min(batch, n - b * batch);
    for (int i = 0; i < count; ++i) out.push_back(shape.sample(rng));
  }
  return out;
}

}  // namespace

LambdaDeltaResult lambda_delta_member(const VectorFieldSpec& spec, const Vec3& x, double delta, double n_probe,
                                      double horizon, double dt, double tol) {
  if (!(delta > 0) || !(horizon > n_probe) || !(n_probe >= 0) || !(dt > 0)) {
    throw Error(ErrorCode::InvalidArgument, "need delta > 0, dt > 0 and horizon > N_probe >= 0");
  }
  std::vector<double> times;
  for (double t = n_probe; t <= horizon * (1 + 1e-12); t += dt) {
    if (t > 0) times.push_back(t);
  }
  LambdaDeltaResult r;
  const double rate = std::log1p(delta);
  logdet_samples(spec, x, times, tol, [&](double t, double logdet) {
    ++r.samples;
    if (!(logdet < t * rate)) {
      r.member = false;
      r.violation_time = t;
      r.violation_logdet = logdet;
      return false;
    }
    return true;
  });
  return r;
}

bool MarkovProbe::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const MarkovRow& r) { return r.pass; });
}

MarkovProbe markov_tail_probe(const VectorFieldSpec& spec, double rho, double s, int n_max, int samples,
                              std::uint64_t seed, unsigned threads, double tol) {
  if (!(rho > 0) || !(s > 0) || n_max < 0 || samples <= 0) {
    throw Error(ErrorCode::InvalidArgument, "markov probe needs rho, s > 0, n_max >= 0, samples > 0");
  }
  constexpr int kBatch = 256;
  const std::vector<Vec3> xs = batched_samples(spec.domain.sampling, samples, kBatch, seed);
  std::vector<double> times;
  for (int n = 1; n <= n_max; ++n) times.push_back(n * s);
  const double log_rate = std::log1p(rho);

  // counts[b][n]: samples in batch b with log|det| >= n s log(1+rho).
  const std::size_t batches = (xs.size() + kBatch - 1) / kBatch;
  std::vector<std::vector<int>> counts(batches, std::vector<int>(static_cast<std::size_t>(n_max) + 1, 0));
  parallel_for(batches, threads, [&](std::size_t b) {
    auto& row = counts[b];
    const std::size_t end = std::min(xs.size(), (b + 1) * kBatch);
    for (std::size_t i = b * kBatch; i < end; ++i) {
      ++row[0];  // |det DX_0| = 1 always satisfies n = 0
      try {
        logdet_samples(spec, xs[i], times, tol, [&](double t, double logdet) {
          const auto n = static_cast<std::size_t>(std::lround(t / s));
          if (logdet >= static_cast<double>(n) * s * log_rate) ++row[n];
          return true;
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OutOfDomain) throw;
      }
    }
  });

  MarkovProbe probe;
  probe.rho = rho;
  probe.s = s;
  probe.samples = samples;
  probe.seed = seed;
  probe.normalized = !spec.domain.is_torus();
  for (int n = 0; n <= n_max; ++n) {
    int hits = 0;
    for (const auto& row : counts) hits += row[static_cast<std::size_t>(n)];
    MarkovRow r;
    r.n = n;
    r.fraction = static_cast<double>(hits) / samples;
    r.bound = std::pow(1 + rho, -n * s);
    r.standard_error = std::sqrt(r.fraction * (1 - r.fraction) / samples);
    r.pass = r.fraction <= r.bound + 3 * r.standard_error;
    probe.rows.push_back(r);
  }
  return probe;
}

// ------------------------------------------------------- empirical measures

double EmpiricalMeasure::integrate(const std::function<double(const Vec3&)>& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) acc += weights[i] * f(points[i]);
  return acc;
}

EmpiricalMeasure birkhoff_measure(const VectorFieldSpec& spec, const Vec3& x, double t, double spacing,
                                  double tol) {
  if (!(t > 0) || !(spacing > 0)) throw Error(ErrorCode::InvalidArgument, "t and spacing must be positive");
  long n = static_cast<long>(std::ceil(t / spacing));
  if (n % 2) ++n;
  const double h = t / static_cast<double>(n);
  EmpiricalMeasure m;
  m.base = x;
  m.t = t;
  m.points.reserve(static_cast<std::size_t>(n) + 1);
  evaluate_field(spec, x);
  m.points.push_back(spec.domain.reduce(x));
  auto stepper = ode::make_stepper<3>(detail::PositionRhs{&spec}, 0.0, x, detail::control_for(tol));
  for (long k = 1; k <= n; ++k) {
    // Grid times are hit exactly, so the quadrature nodes are exact.
    stepper.advance(k == n ? t : static_cast<double>(k) * h, [&](const ode::StepRecord<3>& rec) {
      detail::check_in_domain(spec, rec.y1);
      return true;
    });
    m.points.push_back(spec.domain.reduce(stepper.state()));
  }
  m.weights.resize(m.points.size());
  for (long k = 0; k <= n; ++k) {
    const double c = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    m.weights[static_cast<std::size_t>(k)] = c / (3.0 * static_cast<double>(n));
  }
  return m;
}

OmegaSample omega_limit_sample(const VectorFieldSpec& spec, const Vec3& x, double t_transient, double t_window,
                               double grid, double tol) {
  if (!(t_transient > 0) || !(t_window > 0) || !(grid > 0)) {
    throw Error(ErrorCode::InvalidArgument, "omega-limit sampling needs positive times and grid");
  }
  OmegaSample out;
  out.grid = grid;
  out.t_transient = t_transient;
  out.t_window = t_window;
  evaluate_field(spec, x);
  auto stepper = ode::make_stepper<3>(detail::PositionRhs{&spec}, 0.0, x, detail::control_for(tol));
  auto guard = [&](const ode::StepRecord<3>& rec) {
    detail::check_in_domain(spec, rec.y1);
    return true;
  };
  stepper.advance(t_transient, guard);

  struct KeyHash {
    std::size_t operator()(const Eigen::Matrix<long, 3, 1>& k) const noexcept {
      return static_cast<std::size_t>(k.x() * 73856093L ^ k.y() * 19349663L ^ k.z() * 83492791L);
    }
  };
  std::unordered_set<Eigen::Matrix<long, 3, 1>, KeyHash> seen;
  const double end = t_transient + t_window;
  constexpr std::size_t kMaxVisits = 20'000'000;
  for (std::size_t visits = 0; stepper.time() < end && visits < kMaxVisits; ++visits) {
    const Vec3 p = spec.domain.reduce(stepper.state());
    const Eigen::Matrix<long, 3, 1> key = (p / grid).array().round().cast<long>();
    if (seen.insert(key).second) out.points.push_back(key.cast<double>() * grid);
    // Half a grid cell of arc length per sample.
    const double dt = 0.5 * grid / spec.field(stepper.state()).norm();
    stepper.advance(std::min(end, stepper.time() + dt), guard);
  }
  return out;
}

// -------------------------------------------------------------- Monte Carlo

namespace {

double wilson(int hits, int n, double z, double sign) {
  if (n <= 0) return sign < 0 ? 0.0 : 1.0;
  if (sign < 0 && hits <= 0) return 0.0;
  if (sign > 0 && hits >= n) return 1.0;
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / denom;
  return std::clamp(center + sign * half, 0.0, 1.0);
}

}  // namespace

double wilson_lower(int hits, int n, double z) { return wilson(hits, n, z, -1.0); }
double wilson_upper(int hits, int n, double z) { return wilson(hits, n, z, 1.0); }

std::string to_string(Fate f) {
  switch (f) {
    case Fate::Hit: return "hits-region";
    case Fate::Miss: return "misses-region";
    case Fate::LeftDomain: return "left-domain";
    case Fate::Undecided: return "undecided";
  }
  return "unknown";
}

std::vector<std::pair<int, double>> BasinEstimate::running(int step) const {
  std::vector<std::pair<int, double>> out;
  if (step <= 0) return out;
  int hit = 0;
  for (std::size_t i = 0; i < fates.size(); ++i) {
    if (fates[i] == Fate::Hit) ++hit;
    const int k = static_cast<int>(i) + 1;
    if (k % step == 0 || k == static_cast<int>(fates.size())) {
      out.emplace_back(k, static_cast<double>(hit) / k);
    }
  }
  return out;
}

BasinEstimate weak_basin_estimate(const VectorFieldSpec& spec, const RegionApprox& region,
                                  const BasinOptions& opts) {
  if (opts.samples < 100) throw Error(ErrorCode::InvalidArgument, "basin estimates need at least 100 samples");
  if (!(opts.horizon > 0) || !(opts.sample_dt > 0) || opts.batch <= 0) {
    throw Error(ErrorCode::InvalidArgument, "basin horizon, spacing and batch must be positive");
  }
  BasinEstimate est;
  est.region = region.empty() ? "empty" : region.components.front().orbit;
  est.horizon = opts.horizon;
  est.t_transient = opts.t_transient >= 0 ? opts.t_transient : 0.5 * opts.horizon;
  est.seed = opts.seed;
  est.n = opts.samples;
  if (!(est.t_transient < est.horizon)) {
    throw Error(ErrorCode::InvalidArgument, "transient time must precede the horizon");
  }
  if (region.empty()) {
    est.empty_region = true;
    est.ci_high = wilson_upper(0, est.n);
    est.fates.assign(static_cast<std::size_t>(est.n), Fate::Undecided);
    est.undecided = est.n;
    return est;
  }

  const std::vector<Vec3> xs = batched_samples(spec.domain.sampling, opts.samples, opts.batch, opts.seed);
  const double final_start = est.horizon - 0.25 * (est.horizon - est.t_transient);
  est.fates.assign(xs.size(), Fate::Undecided);
  const std::size_t batches = (xs.size() + static_cast<std::size_t>(opts.batch) - 1) / opts.batch;
  parallel_for(batches, opts.threads, [&](std::size_t b) {
    const std::size_t end = std::min(xs.size(), (b + 1) * static_cast<std::size_t>(opts.batch));
    for (std::size_t i = b * static_cast<std::size_t>(opts.batch); i < end; ++i) {
      bool entered = false;
      bool recurred = false;
      try {
        for_each_sample(spec, xs[i], est.horizon, opts.sample_dt, opts.tol, [&](double t, const Vec3& p) {
          if (t + 1e-12 < est.t_transient || !region.contains(p)) return true;
          entered = true;
          if (t + 1e-12 >= final_start) {
            recurred = true;
            return false;
          }
          return true;
        });
        est.fates[i] = recurred ? Fate::Hit : entered ? Fate::Miss : Fate::Undecided;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OutOfDomain) throw;
        est.fates[i] = Fate::LeftDomain;
      }
    }
  });
  for (Fate f : est.fates) {
    switch (f) {
      case Fate::Hit: ++est.hits; break;
      case Fate::Miss: ++est.misses; break;
      case Fate::LeftDomain: ++est.left_domain; break;
      case Fate::Undecided: ++est.undecided; break;
    }
  }
  est.estimate = static_cast<double>(est.hits) / est.n;
  est.ci_low = wilson_lower(est.hits, est.n);
  est.ci_high = wilson_upper(est.hits, est.n);
  return est;
}

std::vector<TrappedRow> trapped_set_measure(const VectorFieldSpec& spec, const Shape& U,
                                            const std::vector<double>& Ns, const TrappedOptions& opts) {
  if (Ns.empty() || opts.samples <= 0 || !(opts.sample_dt > 0) || opts.batch <= 0) {
    throw Error(ErrorCode::InvalidArgument, "trapped-set measure needs N values and positive budgets");
  }
  const double n_max = *std::max_element(Ns.begin(), Ns.end());
  const std::vector<Vec3> xs = batched_samples(spec.domain.sampling, opts.samples, opts.batch, opts.seed);
  std::vector<double> exit_time(xs.size(), 0.0);
  const std::size_t batches = (xs.size() + static_cast<std::size_t>(opts.batch) - 1) / opts.batch;
  parallel_for(batches, opts.threads, [&](std::size_t b) {
    const std::size_t end = std::min(xs.size(), (b + 1) * static_cast<std::size_t>(opts.batch));
    for (std::size_t i = b * static_cast<std::size_t>(opts.batch); i < end; ++i) {
      double left = std::numeric_limits<double>::infinity();
      double last = 0.0;
      try {
        for_each_sample(spec, xs[i], n_max, opts.sample_dt, opts.tol, [&](double t, const Vec3& p) {
          last = t;
          if (U.contains(p)) return true;
          left = t;
          return false;
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OutOfDomain) throw;
        left = last;
      }
      exit_time[i] = left;
    }
  });
  std::vector<TrappedRow> rows;
  for (double N : Ns) {
    TrappedRow r;
    r.N = N;
    r.n = opts.samples;
    for (double t : exit_time) r.trapped += t > N ? 1 : 0;
    r.estimate = static_cast<double>(r.trapped) / r.n;
    r.ci_low = wilson_lower(r.trapped, r.n);
    r.ci_high = wilson_upper(r.trapped, r.n);
    rows.push_back(r);
  }
  return rows;
}

// --------------------------------------------------------------- attractors

AttractorCandidate candidate_from_orbit(const VectorFieldSpec& spec, const PeriodicOrbit& orbit, double eps,
                                        double tol) {
  AttractorCandidate c;
  c.name = orbit.name;
  c.eps = eps > 0 ? eps : default_fattening(orbit);
  c.samples = dense_orbit(spec, orbit, c.eps, tol);
  return c;
}

AttractorVerdict attractor_check(const VectorFieldSpec& spec, const AttractorCandidate& candidate, const Shape& U,
                                 const AttractorOptions& opts) {
  AttractorVerdict v;
  v.candidate = candidate.name;
  v.neighborhood = U.describe();
  if (!candidate.whole_space) {
    if (candidate.samples.empty()) throw Error(ErrorCode::InvalidArgument, "candidate set has no samples");
    for (const Vec3& p : candidate.samples) {
      if (!U.contains(p)) throw Error(ErrorCode::NotContained, "candidate set is not contained in U");
    }
  } else if (U.kind != Shape::Kind::Whole) {
    throw Error(ErrorCode::NotContained, "the whole space is not contained in a proper neighborhood");
  }

  std::mt19937_64 rng(opts.seed);
  if (U.has_boundary()) {
    std::vector<std::pair<Vec3, Vec3>> faces;
    for (int i = 0; i < opts.boundary_samples; ++i) faces.push_back(U.sample_boundary(rng));
    std::vector<char> outward(faces.size(), 0);
    parallel_for(faces.size(), opts.threads, [&](std::size_t i) {
      const auto& [b, normal] = faces[i];
      try {
        if (!(evaluate_field(spec, b).dot(normal) < 0)) {
          outward[i] = 1;
          return;
        }
        for_each_sample(spec, b, opts.trap_time, opts.trap_time / 10, opts.tol, [&](double t, const Vec3& p) {
          if (t > 0 && !U.contains(p)) {
            outward[i] = 1;
            return false;
          }
          return true;
        });
      } catch (const Error&) {
        outward[i] = 1;
      }
    });
    v.boundary_checked = static_cast<int>(faces.size());
    v.boundary_outward = static_cast<int>(std::count(outward.begin(), outward.end(), 1));
  }
  v.trapping = v.boundary_outward == 0;

  if (candidate.whole_space) {
    v.interior_checked = opts.interior_samples;
    v.interior_converged = opts.interior_samples;
    v.convergence = true;
  } else {
    std::vector<Vec3> starts;
    for (int i = 0; i < opts.interior_samples; ++i) starts.push_back(U.sample(rng));
    std::vector<double> dist(starts.size(), std::numeric_limits<double>::infinity());
    parallel_for(starts.size(), opts.threads, [&](std::size_t i) {
      try {
        const Vec3 end = flow(spec, starts[i], opts.horizon, {opts.tol, opts.horizon}).end;
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : candidate.samples) best = std::min(best, spec.domain.distance(end, p));
        dist[i] = best;
      } catch (const Error&) {
        // Left the domain or hit a singularity: counts as not converged.
      }
    });
    v.interior_checked = static_cast<int>(starts.size());
    for (double d : dist) {
      v.interior_converged += d <= candidate.eps ? 1 : 0;
      v.max_final_distance = std::max(v.max_final_distance, d);
    }
    v.convergence = v.interior_converged == v.interior_checked;
  }
  v.evidence = v.trapping && v.convergence;
  return v;
}

}  // namespace lpflow
