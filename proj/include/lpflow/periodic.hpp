#pragma once

// Periodic orbits: first-return maps to transversal sections, damped Newton
// shooting, Floquet multipliers and the sink/saddle/dissipative census.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "lpflow/linpoincare.hpp"

namespace lpflow {

struct SectionSpec {
  Vec3 anchor = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double half_width = 1.0;
};

/// Throws NonTransversalSection unless |<X(anchor), n>| >= 0.1 |X(anchor)|.
void check_transversal(const VectorFieldSpec& spec, const SectionSpec& section);

struct ReturnOptions {
  double tol = 1e-10;
  double horizon = 100.0;
  int returns = 1;  // number of section crossings to follow
};

struct ReturnResult {
  Vec3 point = Vec3::Zero();        // reduced to the fundamental domain
  Vec3 cover_point = Vec3::Zero();  // unreduced integration coordinates
  double time = 0.0;
  Mat3 fundamental = Mat3::Identity();
  double log_det = 0.0;
};

ReturnResult return_map(const VectorFieldSpec& spec, const SectionSpec& section, const Vec3& x,
                        const ReturnOptions& opts = {});

enum class OrbitClass { Sink, Source, Saddle, NonHyperbolic };
std::string to_string(OrbitClass c);

/// Hyperbolicity boundary for multiplier moduli, relative to 1.
inline constexpr double kEigenTolerance = 1e-6;
/// |det| must fall below 1 by more than this to count as dissipative.
inline constexpr double kDissipativeMargin = 1e-10;

struct Classification {
  OrbitClass cls = OrbitClass::NonHyperbolic;
  bool dissipative = false;
};

Classification classify(std::complex<double> lambda, std::complex<double> mu, double det_full,
                        double tol_eig = kEigenTolerance);
/// Uses |lambda * mu| as the determinant.
Classification classify(std::complex<double> lambda, std::complex<double> mu);

struct PeriodicOrbit {
  Vec3 point = Vec3::Zero();
  double period = 0.0;
  Mat2 monodromy = Mat2::Identity();
  NormalFrame frame;
  std::complex<double> lambda;  // |lambda| <= |mu|
  std::complex<double> mu;
  double det_full = 1.0;        // det DX_period(p) from Liouville's formula
  double det_monodromy = 1.0;   // det of the 2x2 monodromy (= lambda * mu)
  Mat3 fundamental = Mat3::Identity();
  OrbitClass cls = OrbitClass::NonHyperbolic;
  bool dissipative = false;
  double residual = 0.0;
  int section = -1;
  int returns = 1;
  std::string name;

  bool is_saddle() const { return cls == OrbitClass::Saddle; }
  bool is_sink() const { return cls == OrbitClass::Sink; }
};

struct OrbitOptions {
  double tol = 1e-11;
  double horizon = 100.0;
  int returns = 1;
  int max_iterations = 40;
  double newton_tol = 1e-9;
};

PeriodicOrbit find_periodic_orbit(const VectorFieldSpec& spec, const SectionSpec& section,
                                  const Vec3& seed, const OrbitOptions& opts = {});

/// Multipliers and classification for a known closed orbit through p.
PeriodicOrbit analyze_orbit(const VectorFieldSpec& spec, const Vec3& p, double period,
                            double tol = 1e-11);

struct CensusBudget {
  int seeds = 200;
  double period_bound = 10.0;
  std::uint64_t rng_seed = 0;
  int max_returns = 8;
  unsigned threads = 1;
  double dedup_threshold = 1e-4;
};

struct OrbitCatalog {
  std::vector<PeriodicOrbit> orbits;
  int seeds_tried = 0;
  int newton_attempts = 0;
  int converged = 0;
  int failures = 0;
  int duplicates = 0;
  int over_period_bound = 0;
  double period_bound = 0.0;

  int count(OrbitClass c) const;
  int dissipative_count() const;
  int dissipative_saddles() const;
};

OrbitCatalog enumerate_orbits(const VectorFieldSpec& spec, std::vector<SectionSpec> sections,
                              const CensusBudget& budget, double tol = 1e-11);

/// Sections orthogonal to the field at random probe points (axis aligned on
/// tori).
std::vector<SectionSpec> auto_sections(const VectorFieldSpec& spec, int count, std::uint64_t seed);

/// `count` reduced positions evenly spaced in time over one period.
std::vector<Vec3> orbit_samples(const VectorFieldSpec& spec, const PeriodicOrbit& orbit,
                                int count, double tol = 1e-10);

/// Largest distance from a sample in `candidate` to the polyline through
/// `reference` (a closed orbit sampled in time order).
double orbit_distance(const DomainSpec& domain, const std::vector<Vec3>& candidate,
                      const std::vector<Vec3>& reference);

}  // namespace lpflow
