#pragma once

// Vector fields on flat 3-tori and Euclidean boxes, trajectory integration,
// the variational equation and Liouville's determinant formula.

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lpflow/geometry.hpp"
#include "lpflow/integrator.hpp"
#include "lpflow/types.hpp"

namespace lpflow {

/// Phase space. A flat torus wraps positions per axis; with a non-identity
/// `twist` the z wrap also applies the integer matrix to (x, y), giving the
/// mapping torus of a toral automorphism. A box domain is a Euclidean region
/// whose `sampling` shape is the declared forward-invariant trapping region.
struct DomainSpec {
  enum class Kind { FlatTorus, Box };

  Kind kind = Kind::Box;
  Vec3 periods = Vec3::Ones();
  Eigen::Matrix2i twist = Eigen::Matrix2i::Identity();
  Vec3 lo = -Vec3::Ones();
  Vec3 hi = Vec3::Ones();
  Shape sampling;

  static DomainSpec flat_torus(const Vec3& periods = Vec3::Ones());
  static DomainSpec mapping_torus(const Eigen::Matrix2i& twist);
  static DomainSpec box(const Vec3& lo, const Vec3& hi);
  static DomainSpec box(const Vec3& lo, const Vec3& hi, const Shape& trapping);

  bool is_torus() const { return kind == Kind::FlatTorus; }
  bool twisted() const { return twist != Eigen::Matrix2i::Identity(); }

  /// Box domains: inside the bounds. Tori contain everything.
  bool contains(const Vec3& x) const;
  /// Representative of x in the fundamental domain.
  Vec3 reduce(const Vec3& x) const;
  /// Minimal-image displacement from a to b (componentwise on tori).
  Vec3 displacement(const Vec3& a, const Vec3& b) const;
  double distance(const Vec3& a, const Vec3& b) const { return displacement(a, b).norm(); }

  Vec3 sample(std::mt19937_64& rng) const { return sampling.sample(rng); }
  void validate() const;
};

/// A nonsingular vector field. `jacobian` is expressed in the tangent frame
/// used for all linear data (the coordinate frame on flat domains); when it is
/// absent a central-difference Jacobian of `field` is used.
struct VectorFieldSpec {
  std::string name;
  DomainSpec domain;
  std::function<Vec3(const Vec3&)> field;
  std::function<Mat3(const Vec3&)> jacobian;
  std::function<double(const Vec3&)> divergence;
};

struct FlowOptions {
  double tol = 1e-9;
  /// Spacing of recorded samples; 0 records every accepted step.
  double sample_dt = 0.0;
};

struct TrajectorySegment {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  double elapsed = 0.0;
  std::vector<double> times;
  std::vector<Vec3> points;
  ode::IntegrationStats stats;
};

struct TangentState {
  Vec3 base = Vec3::Zero();
  double elapsed = 0.0;
  Mat3 fundamental = Mat3::Identity();
  double log_det = 0.0;
};

Vec3 evaluate_field(const VectorFieldSpec& spec, const Vec3& x);
Mat3 evaluate_jacobian(const VectorFieldSpec& spec, const Vec3& x);
double divergence(const VectorFieldSpec& spec, const Vec3& x);

TrajectorySegment flow(const VectorFieldSpec& spec, const Vec3& x, double t,
                       const FlowOptions& opts = {});

std::pair<TrajectorySegment, TangentState> flow_with_tangent(const VectorFieldSpec& spec,
                                                             const Vec3& x, double t,
                                                             const FlowOptions& opts = {});

/// Integral of the divergence along the orbit segment [0, t]; equals
/// log det DX_t(x).
double liouville_logdet(const VectorFieldSpec& spec, const Vec3& x, double t, double tol = 1e-9);

/// Calls `visit(t, reduced position)` at t = 0, dt, 2dt, ..., horizon.
/// Stops early when `visit` returns false. Returns the last time reached.
double for_each_sample(const VectorFieldSpec& spec, const Vec3& x, double horizon, double dt,
                       double tol, const std::function<bool(double, const Vec3&)>& visit);

/// Checks that trace(jacobian) matches the divergence and that the field is
/// nonsingular at `probes` random points. Throws on violation.
void validate_field(const VectorFieldSpec& spec, int probes = 16, std::uint64_t seed = 0);

namespace detail {

/// Position (3), fundamental matrix (9, column-major), log-determinant (1)
/// and the first transported normal-frame vector (3).
using AugState = Eigen::Matrix<double, 16, 1>;

struct Augmented {
  Vec3 x;
  Mat3 phi;
  double log_det;
  Vec3 e1;
};

AugState pack(const Augmented& a);
Augmented unpack(const AugState& s);
ode::StepControl control_for(double tol);

/// Right-hand side of the augmented variational system. Transport of the
/// normal frame solves e' = -(e . d') d with d the unit flow direction, which
/// keeps e orthonormal to d and composes exactly along the flow.
struct TangentRhs {
  const VectorFieldSpec* spec;
  AugState operator()(double t, const AugState& s) const;
};

struct PositionRhs {
  const VectorFieldSpec* spec;
  Vec3 operator()(double t, const Vec3& x) const;
};

/// Position + log-determinant only; cheap Liouville integration.
struct LogDetRhs {
  const VectorFieldSpec* spec;
  Eigen::Vector4d operator()(double t, const Eigen::Vector4d& s) const;
};

void check_in_domain(const VectorFieldSpec& spec, const Vec3& x);

}  // namespace detail

}  // namespace lpflow
