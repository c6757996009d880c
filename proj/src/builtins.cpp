#include "lpflow/builtins.hpp"

#include <cmath>
#include <numbers>

#include "lpflow/error.hpp"

namespace lpflow {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

double take(ParamMap& remaining, const std::string& key, double fallback) {
  auto it = remaining.find(key);
  if (it == remaining.end()) return fallback;
  const double v = it->second;
  remaining.erase(it);
  return v;
}

void reject_unknown(const std::string& flow, const ParamMap& remaining) {
  if (!remaining.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "unknown parameter '" + remaining.begin()->first + "' for flow " + flow);
  }
}

// Matrix logarithm of the symmetric positive cat-map matrix.
Mat2 catmap_log() {
  Mat2 a;
  a << 2, 1, 1, 1;
  Eigen::SelfAdjointEigenSolver<Mat2> es(a);
  const Vec2 logs = es.eigenvalues().array().log();
  return es.eigenvectors() * logs.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Shape cylinder_trapping_shell() { return Shape::cylinder_shell(0.5, 1.5, -0.5, 0.5); }

VectorFieldSpec rotation_flow(const Vec3& velocity) {
  VectorFieldSpec s;
  s.name = "rotation";
  s.domain = DomainSpec::flat_torus();
  s.field = [velocity](const Vec3&) { return velocity; };
  s.jacobian = [](const Vec3&) { return Mat3::Zero().eval(); };
  s.divergence = [](const Vec3&) { return 0.0; };
  return s;
}

VectorFieldSpec cylinder_flow(double c) {
  VectorFieldSpec s;
  s.name = "cylinder";
  s.domain = DomainSpec::box(Vec3(-3, -3, -1e4), Vec3(3, 3, 1e4), cylinder_trapping_shell());
  s.field = [c](const Vec3& p) {
    const double r2 = p.x() * p.x() + p.y() * p.y();
    return Vec3(p.x() * (1 - r2) - p.y(), p.y() * (1 - r2) + p.x(), c * p.z());
  };
  s.jacobian = [c](const Vec3& p) {
    const double x = p.x();
    const double y = p.y();
    const double r2 = x * x + y * y;
    Mat3 j;
    j << 1 - r2 - 2 * x * x, -2 * x * y - 1, 0,
         -2 * x * y + 1, 1 - r2 - 2 * y * y, 0,
         0, 0, c;
    return j;
  };
  s.divergence = [c](const Vec3& p) { return 2 - 4 * (p.x() * p.x() + p.y() * p.y()) + c; };
  return s;
}

VectorFieldSpec catmap_suspension() {
  Eigen::Matrix2i a;
  a << 2, 1, 1, 1;
  VectorFieldSpec s;
  s.name = "catmap-suspension";
  s.domain = DomainSpec::mapping_torus(a);
  s.field = [](const Vec3&) { return Vec3(0, 0, 1); };
  // Tangent data lives in the frame that interpolates the gluing map, so the
  // fundamental matrix at time t is A^t on the fiber directions.
  Mat3 j = Mat3::Zero();
  j.topLeftCorner<2, 2>() = catmap_log();
  s.jacobian = [j](const Vec3&) { return j; };
  s.divergence = [](const Vec3&) { return 0.0; };
  return s;
}

VectorFieldSpec torus_mixed_flow(double a) {
  if (!(std::abs(a) < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "torus-mixed amplitude must satisfy |a| < 1");
  }
  VectorFieldSpec s;
  s.name = "torus-mixed";
  s.domain = DomainSpec::flat_torus();
  s.field = [a](const Vec3& p) {
    return Vec3(1 + a * std::sin(kTwoPi * p.x()), std::numbers::sqrt2 + a * std::sin(kTwoPi * p.y()),
                std::numbers::sqrt3);
  };
  s.jacobian = [a](const Vec3& p) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = kTwoPi * a * std::cos(kTwoPi * p.x());
    j(1, 1) = kTwoPi * a * std::cos(kTwoPi * p.y());
    return j;
  };
  s.divergence = [a](const Vec3& p) {
    return kTwoPi * a * (std::cos(kTwoPi * p.x()) + std::cos(kTwoPi * p.y()));
  };
  return s;
}

std::vector<std::string> builtin_names() {
  return {"rotation", "cylinder", "catmap-suspension", "torus-mixed"};
}

BuiltinFlow make_builtin(const std::string& name, const ParamMap& params) {
  ParamMap rest = params;
  BuiltinFlow b;
  if (name == "rotation") {
    const Vec3 v(take(rest, "vx", 1.0), take(rest, "vy", std::numbers::sqrt2),
                 take(rest, "vz", std::numbers::sqrt3));
    reject_unknown(name, rest);
    b.spec = rotation_flow(v);
    b.params = {{"vx", v.x()}, {"vy", v.y()}, {"vz", v.z()}};
    Eigen::Index axis = 0;
    v.cwiseAbs().maxCoeff(&axis);
    b.sections.push_back({Vec3::Zero(), Vec3::Unit(axis) * (v[axis] >= 0 ? 1.0 : -1.0), 1.0});
  } else if (name == "cylinder") {
    const double c = take(rest, "c", 1.0);
    reject_unknown(name, rest);
    b.spec = cylinder_flow(c);
    b.params = {{"c", c}};
    // The half-plane {y = 0, x > 0}; the wide disc admits the large vertical
    // excursions of the expanding case.
    b.sections.push_back({Vec3(1, 0, 0), Vec3(0, 1, 0), 1e3});
  } else if (name == "catmap-suspension") {
    reject_unknown(name, rest);
    b.spec = catmap_suspension();
    b.sections.push_back({Vec3(0.5, 0.5, 0.5), Vec3(0, 0, 1), 1.0});
  } else if (name == "torus-mixed") {
    const double a = take(rest, "a", 0.5);
    reject_unknown(name, rest);
    b.spec = torus_mixed_flow(a);
    b.params = {{"a", a}};
    b.sections.push_back({Vec3::Zero(), Vec3(0, 0, 1), 1.0});
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown builtin flow '" + name + "'");
  }
  return b;
}

}  // namespace lpflow
