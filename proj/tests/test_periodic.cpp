#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "lpflow/builtins.hpp"
#include "lpflow/error.hpp"
#include "lpflow/periodic.hpp"

using namespace lpflow;

namespace {

constexpr double kPi = std::numbers::pi;

// Periodic orbits of the cat map with period <= max_period, by brute force
// over the grid (1/80)Z^2, which contains every point of period 1, 2 or 3
// (denominators det(A^n - I) = 1, 5, 16).
int catmap_orbit_classes(int max_period) {
  constexpr long q = 80;
  std::vector<int> exact(static_cast<std::size_t>(max_period) + 1, 0);
  for (long i = 0; i < q; ++i) {
    for (long j = 0; j < q; ++j) {
      long x = i;
      long y = j;
      for (int n = 1; n <= max_period; ++n) {
        const long nx = (2 * x + y) % q;
        y = (x + y) % q;
        x = nx;
        if (x == i && y == j) {
          ++exact[static_cast<std::size_t>(n)];
          break;
        }
      }
    }
  }
  int classes = 0;
  for (int n = 1; n <= max_period; ++n) classes += exact[static_cast<std::size_t>(n)] / n;
  return classes;
}

}  // namespace

TEST_CASE("return_map examples") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const SectionSpec sec = f2.sections.front();
  const auto r = return_map(f2.spec, sec, Vec3(1, 0, 0), {1e-11, 20.0, 1});
  CHECK((r.point - Vec3(1, 0, 0)).norm() < 1e-8);
  CHECK(std::abs(r.time - 2 * kPi) < 1e-8);

  const auto r2 = return_map(f2.spec, sec, Vec3(2, 0, 0), {1e-11, 20.0, 1});
  CHECK(r2.point.x() > 1.0);
  CHECK(r2.point.x() < 2.0);

  const auto rot = rotation_flow(Vec3(1, 0, 0));
  const auto r3 = return_map(rot, {Vec3::Zero(), Vec3(1, 0, 0), 1.0}, Vec3(0, 0.3, 0.7));
  CHECK(std::abs(r3.time - 1.0) < 1e-9);
}

TEST_CASE("return_map errors") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  try {
    return_map(f2.spec, f2.sections.front(), Vec3(1, 0, 50), {1e-10, 20.0, 1});
    FAIL("expected LeftDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LeftDomain);
  }
  try {
    return_map(f2.spec, f2.sections.front(), Vec3(1, 0, 0), {1e-10, 3.0, 1});
    FAIL("expected NoReturn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoReturn);
  }
}

TEST_CASE("find_periodic_orbit on the cylinder") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto o = find_periodic_orbit(f2.spec, f2.sections.front(), Vec3(1.1, 0, 0.05));
  CHECK((o.point - Vec3(1, 0, 0)).norm() < 1e-7);
  CHECK(std::abs(o.period - 2 * kPi) < 1e-8);
  CHECK(std::abs(o.lambda.real() / std::exp(-4 * kPi) - 1) < 1e-6);
  CHECK(std::abs(o.mu.real() / std::exp(2 * kPi) - 1) < 1e-6);
  CHECK(o.cls == OrbitClass::Saddle);
  CHECK(o.dissipative);
  CHECK(std::abs(std::abs(o.lambda * o.mu) - std::exp(-2 * kPi)) < 1e-9);

  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const auto s = find_periodic_orbit(sink.spec, sink.sections.front(), Vec3(1.1, 0, 0.05));
  CHECK(std::abs(std::abs(s.lambda) / std::exp(-4 * kPi) - 1) < 1e-6);
  CHECK(std::abs(std::abs(s.mu) / std::exp(-2 * kPi) - 1) < 1e-6);
  CHECK(s.cls == OrbitClass::Sink);
  CHECK(s.dissipative);
}

TEST_CASE("find_periodic_orbit on the cat-map suspension") {
  const auto cm = make_builtin("catmap-suspension");
  const auto o = find_periodic_orbit(cm.spec, cm.sections.front(), Vec3(0.02, 0.97, 0.5));
  CHECK(std::abs(o.period - 1.0) < 1e-9);
  CHECK(std::abs(o.lambda.real() - (3 - std::sqrt(5.0)) / 2) < 1e-9);
  CHECK(std::abs(o.mu.real() - (3 + std::sqrt(5.0)) / 2) < 1e-9);
  CHECK(o.cls == OrbitClass::Saddle);
  CHECK_FALSE(o.dissipative);
  CHECK(std::abs(o.det_full - 1.0) < 1e-9);
}

TEST_CASE("non-transversal section") {
  const auto f2 = make_builtin("cylinder");
  try {
    find_periodic_orbit(f2.spec, {Vec3(1, 0, 0), Vec3(1, 0, 0), 0.5}, Vec3(1, 0, 0));
    FAIL("expected NonTransversalSection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonTransversalSection);
  }
}

TEST_CASE("classify") {
  auto c = classify(0.5, 1.6);
  CHECK(c.cls == OrbitClass::Saddle);
  CHECK(c.dissipative);
  const double r = 0.894;
  c = classify(std::polar(r, 1.0), std::polar(r, -1.0));
  CHECK(c.cls == OrbitClass::Sink);
  CHECK(c.dissipative);
  c = classify(0.5, std::polar(1.0, 0.3));
  CHECK(c.cls == OrbitClass::NonHyperbolic);
  CHECK(classify(1.5, 2.0).cls == OrbitClass::Source);
}

TEST_CASE("enumerate_orbits censuses") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  CensusBudget budget;
  budget.seeds = 200;
  budget.period_bound = 10.0;
  const auto cat = enumerate_orbits(f2.spec, f2.sections, budget, 1e-10);
  REQUIRE(cat.orbits.size() == 1);
  CHECK(cat.orbits[0].cls == OrbitClass::Saddle);
  CHECK(cat.dissipative_saddles() == 1);

  const auto rot = make_builtin("rotation");
  const auto empty = enumerate_orbits(rot.spec, rot.sections, {50, 10.0}, 1e-10);
  CHECK(empty.orbits.empty());

  const auto cm = make_builtin("catmap-suspension");
  CensusBudget b3;
  b3.period_bound = 3.0;
  const auto census = enumerate_orbits(cm.spec, cm.sections, b3, 1e-10);
  const int oracle = catmap_orbit_classes(3);
  CHECK(oracle == 8);
  CHECK(static_cast<int>(census.orbits.size()) == oracle);
}

TEST_CASE("trivial eigenvalue and rescaling invariance") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto o = analyze_orbit(f2.spec, Vec3(1, 0, 0), 2 * kPi);
  const Vec3 v = f2.spec.field(o.point);
  CHECK((o.fundamental * v - v).norm() < 1e-6);

  VectorFieldSpec fast = f2.spec;
  fast.field = [base = f2.spec.field](const Vec3& x) { return (2.0 * base(x)).eval(); };
  fast.jacobian = [base = f2.spec.jacobian](const Vec3& x) { return (2.0 * base(x)).eval(); };
  fast.divergence = [base = f2.spec.divergence](const Vec3& x) { return 2.0 * base(x); };
  const auto q = find_periodic_orbit(fast, f2.sections.front(), Vec3(1.1, 0, 0.05));
  CHECK(std::abs(q.period - kPi) < 1e-8);
  CHECK(std::abs(q.lambda.real() / o.lambda.real() - 1) < 1e-6);
  CHECK(std::abs(q.mu.real() / o.mu.real() - 1) < 1e-6);
}
