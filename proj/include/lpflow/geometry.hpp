#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lpflow/types.hpp"

namespace lpflow {

/// Simple measurable regions: the whole phase space, an axis-aligned box, or
/// a shell {r_in <= sqrt(x^2+y^2) <= r_out, z_lo <= z <= z_hi} around the
/// z axis.
struct Shape {
  enum class Kind { Whole, Box, CylinderShell };

  Kind kind = Kind::Whole;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
  double r_in = 0.0;
  double r_out = 1.0;
  double z_lo = 0.0;
  double z_hi = 1.0;

  static Shape whole(const Vec3& lo, const Vec3& hi);
  static Shape box(const Vec3& lo, const Vec3& hi);
  static Shape cylinder_shell(double r_in, double r_out, double z_lo, double z_hi);

  bool contains(const Vec3& x) const;
  double volume() const;
  Vec3 sample(std::mt19937_64& rng) const;

  /// Uniform point on the boundary paired with the outward unit normal.
  /// Whole has no boundary; calling this on it is an error.
  std::pair<Vec3, Vec3> sample_boundary(std::mt19937_64& rng) const;

  bool has_boundary() const { return kind != Kind::Whole; }

  std::string describe() const;
};

}  // namespace lpflow
