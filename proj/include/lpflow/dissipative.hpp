#pragma once

// The dissipative region as fattened dissipative orbits, and the finite-time
// measure-theoretic probes: mean divergence, Lambda_delta membership, Markov
// tail bound, Birkhoff measures, omega-limit samples, weak-basin and
// trapped-set Monte Carlo estimates, attractor evidence.

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "lpflow/flowcore.hpp"
#include "lpflow/periodic.hpp"

namespace lpflow {

/// Points with a uniform search radius, hashed on a grid of that cell size.
/// Torus domains wrap cell indices.
class PointIndex {
 public:
  PointIndex() = default;
  PointIndex(const DomainSpec& domain, std::vector<Vec3> points, double radius);

  /// Distance to the nearest indexed point if it is within the radius,
  /// otherwise +infinity.
  double nearest(const Vec3& x) const;
  bool contains(const Vec3& x) const { return nearest(x) <= radius_; }
  bool empty() const { return points_.empty(); }
  const std::vector<Vec3>& points() const { return points_; }
  double radius() const { return radius_; }

 private:
  struct Key {
    long i, j, k;
    bool operator==(const Key& o) const { return i == o.i && j == o.j && k == o.k; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  Key key_of(const Vec3& x) const;
  Key wrap(Key k) const;

  DomainSpec domain_;
  std::vector<Vec3> points_;
  double radius_ = 0.0;
  Vec3 cell_ = Vec3::Ones();
  Eigen::Vector3i cells_ = Eigen::Vector3i::Zero();  // per-axis wrap count on tori
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> buckets_;
};

enum class ComponentKind { Sink, Saddle, Other };
std::string to_string(ComponentKind k);

struct RegionComponent {
  std::string orbit;
  ComponentKind kind = ComponentKind::Other;
  double period = 0.0;
  double eps_fat = 1e-3;
  std::vector<Vec3> samples;
};

/// Union of fattened dissipative orbits. Saddle*_d is approximated by the
/// closure of the cataloged dissipative saddles.
struct RegionApprox {
  std::vector<RegionComponent> components;
  std::string note;

  bool empty() const { return components.empty(); }
  int sinks() const;
  int saddles() const;
  /// Builds the lookup structure; must be called before contains().
  void index(const DomainSpec& domain);
  bool contains(const Vec3& x) const;

 private:
  std::vector<PointIndex> indices_;
};

/// Default fattening: 10x the closure residual, at least 1e-3.
double default_fattening(const PeriodicOrbit& orbit);

/// eps_fat <= 0 selects default_fattening per orbit. Samples along each orbit
/// are spaced no farther apart than eps_fat.
RegionApprox dissipative_region(const VectorFieldSpec& spec, const OrbitCatalog& catalog,
                                double eps_fat = 0.0, double tol = 1e-10);

double mean_divergence(const VectorFieldSpec& spec, const Vec3& x, double t, double tol = 1e-10);

struct LambdaDeltaResult {
  bool member = true;
  double violation_time = std::numeric_limits<double>::quiet_NaN();
  double violation_logdet = std::numeric_limits<double>::quiet_NaN();
  int samples = 0;
};

/// Tests log|det DX_t(x)| < t log(1 + delta) at t = N_probe, N_probe + dt, ...
/// up to horizon.
LambdaDeltaResult lambda_delta_member(const VectorFieldSpec& spec, const Vec3& x, double delta,
                                      double n_probe, double horizon, double dt = 1.0,
                                      double tol = 1e-10);

struct MarkovRow {
  int n = 0;
  double fraction = 0.0;
  double bound = 1.0;
  double standard_error = 0.0;
  bool pass = true;
};

struct MarkovProbe {
  double rho = 0.1;
  double s = 1.0;
  int samples = 0;
  std::uint64_t seed = 0;
  bool normalized = false;  // box domains report the analog normalized on the sampling region
  std::vector<MarkovRow> rows;
  bool pass() const;
};

/// Fraction of uniform samples with |det DX_{ns}(x)| >= (1+rho)^{ns} for
/// n = 0..n_max, against the Markov bound (1+rho)^{-ns}.
MarkovProbe markov_tail_probe(const VectorFieldSpec& spec, double rho, double s, int n_max,
                              int samples, std::uint64_t seed = 0, unsigned threads = 1,
                              double tol = 1e-8);

struct EmpiricalMeasure {
  Vec3 base = Vec3::Zero();
  double t = 0.0;
  std::vector<Vec3> points;
  std::vector<double> weights;

  double integrate(const std::function<double(const Vec3&)>& f) const;
};

/// Time-uniform measure on the orbit segment [0, t], sampled on an even grid
/// no coarser than `spacing` with composite Simpson weights.
EmpiricalMeasure birkhoff_measure(const VectorFieldSpec& spec, const Vec3& x, double t,
                                  double spacing = 0.001, double tol = 1e-11);

struct OmegaSample {
  std::vector<Vec3> points;
  double grid = 0.0;
  double t_transient = 0.0;
  double t_window = 0.0;
};

/// Positions in [t_transient, t_transient + t_window] snapped to a grid of
/// size `grid` and deduplicated; an outer approximation of the omega-limit.
OmegaSample omega_limit_sample(const VectorFieldSpec& spec, const Vec3& x, double t_transient,
                               double t_window, double grid, double tol = 1e-9);

double wilson_lower(int hits, int n, double z = 1.959963984540054);
double wilson_upper(int hits, int n, double z = 1.959963984540054);

enum class Fate : std::uint8_t { Hit, Miss, LeftDomain, Undecided };
std::string to_string(Fate f);

struct BasinOptions {
  int samples = 1000;
  double horizon = 200.0;
  double t_transient = -1.0;  // negative selects horizon / 2
  double sample_dt = 0.1;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int batch = 64;
};

struct BasinEstimate {
  std::string region;
  int n = 0;
  int hits = 0;
  int misses = 0;
  int left_domain = 0;
  int undecided = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double horizon = 0.0;
  double t_transient = 0.0;
  std::uint64_t seed = 0;
  bool empty_region = false;
  std::vector<Fate> fates;

  /// Running estimate over the first k samples for k = step, 2 step, ..., n.
  std::vector<std::pair<int, double>> running(int step) const;
};

/// A hit enters the region during [t_transient, horizon] and is inside it
/// again during the final quarter of that window. Undecided samples count as
/// misses in the estimate and interval.
BasinEstimate weak_basin_estimate(const VectorFieldSpec& spec, const RegionApprox& region,
                                  const BasinOptions& opts);

struct TrappedRow {
  double N = 0.0;
  int trapped = 0;
  int n = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct TrappedOptions {
  int samples = 2000;
  double sample_dt = 0.05;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int batch = 64;
};

/// Estimates m{x : X_t(x) in U for 0 <= t <= N} for each requested N from one
/// set of samples, so the profile is monotone in N by construction.
std::vector<TrappedRow> trapped_set_measure(const VectorFieldSpec& spec, const Shape& U,
                                            const std::vector<double>& Ns,
                                            const TrappedOptions& opts);

struct AttractorCandidate {
  std::string name;
  std::vector<Vec3> samples;
  double eps = 1e-3;
  bool whole_space = false;
};

AttractorCandidate candidate_from_orbit(const VectorFieldSpec& spec, const PeriodicOrbit& orbit,
                                        double eps = 0.0, double tol = 1e-10);

struct AttractorOptions {
  int boundary_samples = 256;
  int interior_samples = 256;
  double trap_time = 0.5;
  double horizon = 40.0;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct AttractorVerdict {
  std::string candidate;
  std::string neighborhood;
  bool trapping = false;
  bool convergence = false;
  bool evidence = false;
  int boundary_checked = 0;
  int boundary_outward = 0;
  int interior_checked = 0;
  int interior_converged = 0;
  double max_final_distance = 0.0;
};

/// Trapping: boundary samples of U have inward velocity and stay in U over
/// (0, trap_time]. Convergence: U samples end within eps of the candidate at
/// the horizon. Throws NotContained when the candidate is not inside U.
AttractorVerdict attractor_check(const VectorFieldSpec& spec, const AttractorCandidate& candidate,
                                 const Shape& U, const AttractorOptions& opts = {});

}  // namespace lpflow
