#pragma once

// Stable/unstable normal directions, the graph-norm angle and sampled
// certificates for domination, contraction rate, angle floor and
// hyperbolicity.

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lpflow/linpoincare.hpp"
#include "lpflow/periodic.hpp"

namespace lpflow {

/// Unit directions of N^s and N^u in `frame` at `base`.
struct DirectionPair {
  Vec3 base = Vec3::Zero();
  NormalFrame frame;
  Vec2 stable = Vec2::UnitX();
  Vec2 unstable = Vec2::UnitY();
  std::string source;
};

/// Eigenvectors of a 2x2 matrix with real eigenvalues |lambda| < 1 < |mu|.
DirectionPair eigen_directions(const Mat2& m);
DirectionPair eigen_directions(const PeriodicOrbit& orbit);

/// ||L|| where F is the graph of L : E -> E^perp; |tan| of the angle in 2D.
/// Throws PerpendicularPair when F = E^perp.
double graph_angle(const Vec2& e, const Vec2& f);

/// Pushes the directions at partition point 0 through the cocycle, giving one
/// pair per frame.
std::vector<DirectionPair> transport_directions(const NormalCocycle& cocycle,
                                                const DirectionPair& at_start);

enum class CertificateKind { Dominated, ContractionRate, Angle, Hyperbolic };
std::string to_string(CertificateKind k);

struct Margin {
  double time = 0.0;
  double lhs = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string label;
};

/// Every margin compares lhs against bound (lhs <= bound passes, or lhs <
/// bound for strict inequalities). The angle certificate stores 1/angle
/// against 1/alpha so a perpendicular pair yields the finite value 0.
struct SplittingCertificate {
  std::string subject;
  CertificateKind kind = CertificateKind::Dominated;
  std::map<std::string, double> params;
  std::vector<Margin> margins;
  bool verdict = false;
  double spacing = 0.0;

  double worst_lhs() const;
  void finalize();
};

SplittingCertificate check_contraction_rate(const PeriodicOrbit& orbit, double rate);

SplittingCertificate check_angle_bound(const std::vector<DirectionPair>& pairs, double alpha);
/// Saddles only; other orbits in the list are skipped.
SplittingCertificate check_angle_bound(const std::vector<PeriodicOrbit>& orbits, double alpha);

/// Fixed domination constant: the product must not exceed 1/2.
inline constexpr double kDominationBound = 0.5;

/// ||P_T|E|| * ||P_{-T}|F|| at every partition point from which the partition
/// reaches exactly T later (closed cocycles wrap around).
SplittingCertificate check_dominated(const NormalCocycle& cocycle,
                                     const std::vector<DirectionPair>& directions, double T);

/// ||P_t|N^s|| <= K e^{-rate t} and ||P_{-t}|N^u|| <= K e^{-rate t} on the
/// partition grid for 0 < t <= horizon.
SplittingCertificate check_hyperbolic(const NormalCocycle& cocycle,
                                      const std::vector<DirectionPair>& directions, double K,
                                      double rate, double horizon = 10.0);

/// Smallest partition-aligned T <= T_max at which check_dominated passes;
/// negative when none does.
double smallest_dominating_time(const NormalCocycle& cocycle,
                                const std::vector<DirectionPair>& directions, double T_max);

/// Finite-time Oseledets directions at x: N^s from the most contracted input
/// direction of P_H(x), N^u from the most expanded output direction of
/// P_H(X_{-H}(x)).
struct OseledetsDirections {
  DirectionPair directions;
  double horizon = 20.0;
  double stable_drift = 0.0;    // change per extra unit of horizon
  double unstable_drift = 0.0;
  bool converged = false;
};

OseledetsDirections oseledets_directions(const VectorFieldSpec& spec, const Vec3& x,
                                         double horizon = 20.0, double tol = 1e-10);

}  // namespace lpflow
