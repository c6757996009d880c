#include "lpflow/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lpflow/error.hpp"

namespace lpflow {

Shape Shape::whole(const Vec3& lo, const Vec3& hi) {
  Shape s = box(lo, hi);
  s.kind = Kind::Whole;
  return s;
}

Shape Shape::box(const Vec3& lo, const Vec3& hi) {
  if (!((hi - lo).minCoeff() > 0)) {
    throw Error(ErrorCode::InvalidArgument, "box bounds must have positive volume");
  }
  Shape s;
  s.kind = Kind::Box;
  s.lo = lo;
  s.hi = hi;
  return s;
}

Shape Shape::cylinder_shell(double r_in, double r_out, double z_lo, double z_hi) {
  if (!(r_in >= 0 && r_out > r_in && z_hi > z_lo)) {
    throw Error(ErrorCode::InvalidArgument, "cylinder shell needs 0 <= r_in < r_out and z_lo < z_hi");
  }
  Shape s;
  s.kind = Kind::CylinderShell;
  s.r_in = r_in;
  s.r_out = r_out;
  s.z_lo = z_lo;
  s.z_hi = z_hi;
  s.lo = Vec3(-r_out, -r_out, z_lo);
  s.hi = Vec3(r_out, r_out, z_hi);
  return s;
}

bool Shape::contains(const Vec3& x) const {
  switch (kind) {
    case Kind::Whole:
      return true;
    case Kind::Box:
      return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    case Kind::CylinderShell: {
      const double r = std::hypot(x.x(), x.y());
      return r >= r_in && r <= r_out && x.z() >= z_lo && x.z() <= z_hi;
    }
  }
  return false;
}

double Shape::volume() const {
  switch (kind) {
    case Kind::Whole:
    case Kind::Box:
      return (hi - lo).prod();
    case Kind::CylinderShell:
      return std::numbers::pi * (r_out * r_out - r_in * r_in) * (z_hi - z_lo);
  }
  return 0.0;
}

namespace {

// Draws in a fixed order; argument evaluation order is unspecified.
Vec3 unit_cube(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng);
  const double b = u(rng);
  const double c = u(rng);
  return Vec3(a, b, c);
}

}  // namespace

Vec3 Shape::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (kind) {
    case Kind::Whole:
    case Kind::Box:
      return lo + (hi - lo).cwiseProduct(unit_cube(rng));
    case Kind::CylinderShell: {
      const double r2 = r_in * r_in + u(rng) * (r_out * r_out - r_in * r_in);
      const double th = 2 * std::numbers::pi * u(rng);
      const double z = z_lo + u(rng) * (z_hi - z_lo);
      const double r = std::sqrt(r2);
      return Vec3(r * std::cos(th), r * std::sin(th), z);
    }
  }
  return Vec3::Zero();
}

std::pair<Vec3, Vec3> Shape::sample_boundary(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (kind) {
    case Kind::Whole:
      throw Error(ErrorCode::InvalidArgument, "whole space has no boundary");
    case Kind::Box: {
      const Vec3 d = hi - lo;
      const double areas[3] = {d.y() * d.z(), d.x() * d.z(), d.x() * d.y()};
      const double total = 2 * (areas[0] + areas[1] + areas[2]);
      double pick = u(rng) * total;
      Vec3 p = lo + d.cwiseProduct(unit_cube(rng));
      for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
          if (pick < areas[axis] || (axis == 2 && side == 1)) {
            Vec3 n = Vec3::Zero();
            n[axis] = side == 0 ? -1.0 : 1.0;
            p[axis] = side == 0 ? lo[axis] : hi[axis];
            return {p, n};
          }
          pick -= areas[axis];
        }
      }
      break;
    }
    case Kind::CylinderShell: {
      const double h = z_hi - z_lo;
      const double a_out = 2 * std::numbers::pi * r_out * h;
      const double a_in = 2 * std::numbers::pi * r_in * h;
      const double a_cap = std::numbers::pi * (r_out * r_out - r_in * r_in);
      const double total = a_out + a_in + 2 * a_cap;
      const double pick = u(rng) * total;
      const double th = 2 * std::numbers::pi * u(rng);
      const Vec3 radial(std::cos(th), std::sin(th), 0.0);
      if (pick < a_out) {
        return {r_out * radial + Vec3(0, 0, z_lo + u(rng) * h), radial};
      }
      if (pick < a_out + a_in) {
        return {r_in * radial + Vec3(0, 0, z_lo + u(rng) * h), -radial};
      }
      const double r = std::sqrt(r_in * r_in + u(rng) * (r_out * r_out - r_in * r_in));
      if (pick < a_out + a_in + a_cap) {
        return {r * radial + Vec3(0, 0, z_hi), Vec3(0, 0, 1)};
      }
      return {r * radial + Vec3(0, 0, z_lo), Vec3(0, 0, -1)};
    }
  }
  return {Vec3::Zero(), Vec3::UnitX()};
}

std::string Shape::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Whole:
      os << "whole";
      break;
    case Kind::Box:
      os << "box[" << lo.transpose() << " | " << hi.transpose() << "]";
      break;
    case Kind::CylinderShell:
      os << "shell{r in [" << r_in << "," << r_out << "], z in [" << z_lo << "," << z_hi << "]}";
      break;
  }
  return os.str();
}

}  // namespace lpflow
