#pragma once

// The linear Poincare flow P_t(x) = pi_{X_t(x)} o DX_t(x) on the normal
// planes X(x)^perp, written as a 2x2 cocycle in transported orthonormal frames.

#include <cstdint>
#include <vector>

#include "lpflow/flowcore.hpp"

namespace lpflow {

/// Positively oriented orthonormal triple (direction, e1, e2) with
/// direction = X(x)/|X(x)|.
struct NormalFrame {
  Vec3 base = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();

  Mat32 basis() const {
    Mat32 b;
    b << e1, e2;
    return b;
  }
};

/// Deterministic frame: Gram-Schmidt seeded with the coordinate axis least
/// aligned with X(x) (lowest index on ties).
NormalFrame normal_frame(const VectorFieldSpec& spec, const Vec3& x);

/// Frame at `base` for flow direction `field`, whose first vector is the
/// normalized projection of `seed` onto the normal plane.
NormalFrame frame_from_seed(const Vec3& base, const Vec3& field, const Vec3& seed);

Vec2 project_normal(const NormalFrame& frame, const Vec3& v);

double spectral_norm(const Mat2& m);

struct LinearPoincare {
  Mat2 matrix = Mat2::Identity();
  NormalFrame source;
  NormalFrame target;
  double elapsed = 0.0;
  Vec3 end = Vec3::Zero();
  Mat3 fundamental = Mat3::Identity();
  double log_det = 0.0;

  /// Frame-free form: the rank-2 operator N_x -> N_{X_t(x)} as a 3x3 matrix.
  Mat3 as_operator() const {
    return target.basis() * matrix * source.basis().transpose();
  }
};

/// P_t(x) from the deterministic frame at x to the transported frame at X_t(x).
LinearPoincare linear_poincare(const VectorFieldSpec& spec, const Vec3& x, double t,
                               double tol = 1e-9);
/// Same with a caller-chosen source frame.
LinearPoincare linear_poincare(const VectorFieldSpec& spec, const NormalFrame& source, double t,
                               double tol = 1e-9);

/// Sequence of 2x2 maps; maps[i] represents P_{t_{i+1}-t_i}(X_{t_i}(x)) from
/// frames[i] to frames[i+1]. A closed cocycle runs once around a periodic
/// orbit and its last frame is identified with the first.
struct NormalCocycle {
  std::vector<double> times;
  std::vector<NormalFrame> frames;
  std::vector<Mat2> maps;
  bool closed = false;

  std::size_t size() const { return maps.size(); }
  /// maps[to-1] * ... * maps[from]; indices wrap around when closed.
  Mat2 product(std::size_t from, std::size_t count) const;
  Mat2 total() const { return product(0, maps.size()); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
  void validate() const;
};

/// Cocycle over the partition 0 = t_0 < ... < t_n. Frames are transported
/// along the trajectory from the deterministic frame at x.
NormalCocycle cocycle_along(const VectorFieldSpec& spec, const Vec3& x,
                            const std::vector<double>& partition, double tol = 1e-9,
                            double max_gap = 1e300);

/// Uniform partition of [0, period] with the given spacing, closed up at the
/// end so that total() is the monodromy in the frame at p.
NormalCocycle periodic_cocycle(const VectorFieldSpec& spec, const Vec3& p, double period,
                               double spacing, double tol = 1e-9);

/// Monodromy P_period(p) with the deterministic frame at p used on both ends.
LinearPoincare monodromy(const VectorFieldSpec& spec, const Vec3& p, double period,
                         double tol = 1e-9);

/// Sampled estimate of C = sup ||P_t(x)|| over x in the domain and t in [0,1].
struct CocycleBound {
  double observed = 0.0;
  double inflation = 1.25;
  double value = 0.0;  // observed * inflation
  int probes = 0;
  int time_samples = 0;
};

CocycleBound estimate_cocycle_bound(const VectorFieldSpec& spec, int probes = 10000,
                                    std::uint64_t seed = 0, double tol = 1e-8,
                                    int time_samples = 10);

}  // namespace lpflow
