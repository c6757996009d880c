#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lpflow/builtins.hpp"
#include "lpflow/error.hpp"
#include "lpflow/linpoincare.hpp"

using namespace lpflow;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<VectorFieldSpec> probe_flows() {
  return {rotation_flow(Vec3(1, std::numbers::sqrt2, std::numbers::sqrt3)), cylinder_flow(1.0),
          catmap_suspension(), torus_mixed_flow(0.5)};
}

Vec2 singular_values(const Mat2& m) { return Eigen::JacobiSVD<Mat2>(m).singularValues(); }

}  // namespace

TEST_CASE("normal_frame is orthonormal, oriented and deterministic") {
  const auto rot = rotation_flow(Vec3(1, std::numbers::sqrt2, std::numbers::sqrt3));
  const NormalFrame f = normal_frame(rot, Vec3::Zero());
  Mat3 q;
  q << f.direction, f.e1, f.e2;
  CHECK((q.transpose() * q - Mat3::Identity()).norm() < 1e-12);
  CHECK(q.determinant() > 0);
  CHECK(std::abs(f.e1.dot(Vec3(1, std::numbers::sqrt2, std::numbers::sqrt3))) < 1e-12);

  const auto f2 = cylinder_flow(1.0);
  const NormalFrame g = normal_frame(f2, Vec3(1, 0, 0));
  CHECK((g.direction - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK(std::abs(g.e1.y()) < 1e-15);
  CHECK(std::abs(g.e2.y()) < 1e-15);

  const NormalFrame again = normal_frame(rot, Vec3::Zero());
  CHECK(again.e1 == f.e1);
  CHECK(again.e2 == f.e2);
}

TEST_CASE("project_normal") {
  const auto rot = rotation_flow(Vec3(1, std::numbers::sqrt2, std::numbers::sqrt3));
  const NormalFrame f = normal_frame(rot, Vec3(0.1, 0.2, 0.3));
  CHECK(project_normal(f, rot.field(Vec3::Zero())).norm() < 1e-14);
  CHECK((project_normal(f, f.e1) - Vec2(1, 0)).norm() < 1e-15);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    const Vec3 v(g(rng), g(rng), g(rng));
    const double along = v.dot(f.direction);
    CHECK(std::abs(project_normal(f, v).squaredNorm() + along * along - v.squaredNorm()) < 1e-12);
  }
}

TEST_CASE("linear_poincare examples") {
  const auto rot = rotation_flow(Vec3(1, std::numbers::sqrt2, std::numbers::sqrt3));
  CHECK((linear_poincare(rot, Vec3(0.4, 0.1, 0.7), 3.7).matrix - Mat2::Identity()).norm() < 1e-13);

  const auto f2 = cylinder_flow(1.0);
  const auto lp = linear_poincare(f2, Vec3(1, 0, 0), 2 * kPi, 1e-11);
  CHECK(std::abs(lp.matrix(0, 0) / std::exp(-4 * kPi) - 1) < 1e-6);
  CHECK(std::abs(lp.matrix(1, 1) / std::exp(2 * kPi) - 1) < 1e-6);
  CHECK(std::abs(lp.matrix(0, 1)) < 1e-6);
  CHECK(std::abs(lp.matrix(1, 0)) < 1e-6);
}

TEST_CASE("cocycle law, determinant transfer and norm envelope") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (const auto& spec : probe_flows()) {
    for (int i = 0; i < 25; ++i) {
      const Vec3 x = spec.domain.sample(rng);
      const double s = u(rng);
      const double t = u(rng);
      const auto whole = linear_poincare(spec, x, s + t, 1e-11);
      const auto first = linear_poincare(spec, x, s, 1e-11);
      const auto second = linear_poincare(spec, first.end, t, 1e-11);
      const Mat3 composed = second.as_operator() * first.as_operator();
      CHECK((composed - whole.as_operator()).norm() <= 1e-6 * (1 + whole.matrix.norm()));

      const double ratio = spec.field(whole.end).norm() / spec.field(x).norm();
      const double det_dx = whole.fundamental.determinant();
      CHECK(std::abs(whole.matrix.determinant() * ratio - det_dx) <= 1e-6 * std::abs(det_dx));

      const double envelope = Eigen::JacobiSVD<Mat3>(whole.fundamental).singularValues()(0) * (ratio + 1);
      CHECK(spectral_norm(whole.matrix) <= envelope * (1 + 1e-12));
    }
  }
}

TEST_CASE("frame covariance") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const auto f2 = cylinder_flow(1.0);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x = f2.domain.sample(rng);
    const auto a = linear_poincare(f2, x, 0.8, 1e-11);
    const NormalFrame other = frame_from_seed(x, f2.field(x), Vec3(g(rng), g(rng), g(rng)));
    const auto b = linear_poincare(f2, other, 0.8, 1e-11);
    CHECK((singular_values(a.matrix) - singular_values(b.matrix)).norm() < 1e-8 * a.matrix.norm());
    CHECK(std::abs(a.matrix.determinant() - b.matrix.determinant()) < 1e-8 * std::abs(a.matrix.determinant()));
  }
}

TEST_CASE("cocycle_along") {
  const auto f2 = cylinder_flow(1.0);
  const Vec3 x(1, 0, 0);
  const auto one = cocycle_along(f2, x, {0.0, 1.3}, 1e-11);
  CHECK((one.maps[0] - linear_poincare(f2, x, 1.3, 1e-11).matrix).norm() < 1e-12);

  std::vector<double> unit{0.0};
  for (int i = 1; i <= 6; ++i) unit.push_back(i);
  unit.push_back(2 * kPi);
  const auto c = cocycle_along(f2, x, unit, 1e-11);
  CHECK(c.frames.size() == unit.size());
  CHECK(c.maps.size() + 1 == unit.size());
  const Mat2 direct = linear_poincare(f2, x, 2 * kPi, 1e-11).matrix;
  CHECK((c.total() - direct).norm() <= 1e-6 * direct.norm());

  std::vector<double> refined = unit;
  refined.insert(refined.begin() + 3, 2.5);
  const auto r = cocycle_along(f2, x, refined, 1e-11);
  CHECK((r.total() - c.total()).norm() <= 1e-7 * direct.norm());

  const auto closed = periodic_cocycle(f2, x, 2 * kPi, 0.1, 1e-11);
  CHECK((closed.total() - monodromy(f2, x, 2 * kPi, 1e-11).matrix).norm() <= 1e-6 * direct.norm());

  CHECK_THROWS_AS(cocycle_along(f2, x, {0.0, 2.0, 1.0}), Error);
  CHECK_THROWS_AS(cocycle_along(f2, x, {0.0, 2.0}, 1e-9, 1.0), Error);
}

TEST_CASE("cocycle bound estimate") {
  const auto rot = rotation_flow(Vec3(1, std::numbers::sqrt2, std::numbers::sqrt3));
  const auto b = estimate_cocycle_bound(rot, 50);
  CHECK(std::abs(b.observed - 1.0) < 1e-12);
  CHECK(std::abs(b.value - 1.25) < 1e-12);
}
