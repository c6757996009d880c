#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "lpflow/builtins.hpp"
#include "lpflow/dissipative.hpp"
#include "lpflow/error.hpp"

using namespace lpflow;

namespace {

constexpr double kPi = std::numbers::pi;

OrbitCatalog census(const BuiltinFlow& f, double period_bound = 10.0) {
  CensusBudget budget;
  budget.seeds = 100;
  budget.period_bound = period_bound;
  return enumerate_orbits(f.spec, f.sections, budget, 1e-10);
}

// x' = (1, 0.05 y, 0.05 z): constant divergence 0.1.
VectorFieldSpec expanding_flow() {
  VectorFieldSpec s;
  s.name = "expanding";
  s.domain = DomainSpec::box(Vec3(-1, -10, -10), Vec3(1000, 10, 10),
                             Shape::box(Vec3(0, -1, -1), Vec3(1, 1, 1)));
  s.field = [](const Vec3& p) { return Vec3(1.0, 0.05 * p.y(), 0.05 * p.z()); };
  s.jacobian = [](const Vec3&) { return Mat3(Vec3(0, 0.05, 0.05).asDiagonal()); };
  s.divergence = [](const Vec3&) { return 0.1; };
  return s;
}

// Limit cycle r = 1 at both z = 1 and z = -1; the plane z = 0 repels, so
// half of the sampled volume is attracted to each circle.
VectorFieldSpec bistable_flow() {
  VectorFieldSpec s;
  s.name = "bistable";
  s.domain = DomainSpec::box(Vec3(-3, -3, -3), Vec3(3, 3, 3),
                             Shape::cylinder_shell(0.5, 1.5, -1.5, 1.5));
  s.field = [](const Vec3& p) {
    const double g = 1 - p.x() * p.x() - p.y() * p.y();
    return Vec3(p.x() * g - p.y(), p.y() * g + p.x(), p.z() - p.z() * p.z() * p.z());
  };
  return s;
}

RegionApprox circle_region(const DomainSpec& domain, double z, double eps) {
  RegionComponent c;
  c.orbit = "upper";
  c.kind = ComponentKind::Sink;
  c.period = 2 * kPi;
  c.eps_fat = eps;
  for (int k = 0; k < 20000; ++k) {
    const double th = 2 * kPi * k / 20000.0;
    c.samples.emplace_back(std::cos(th), std::sin(th), z);
  }
  RegionApprox r;
  r.components.push_back(c);
  r.index(domain);
  return r;
}

}  // namespace

TEST_CASE("PointIndex wraps on tori and respects the radius") {
  const DomainSpec torus = DomainSpec::flat_torus();
  const PointIndex idx(torus, {Vec3(0.01, 0.5, 0.5)}, 0.05);
  CHECK(idx.contains(Vec3(0.99, 0.5, 0.5)));
  CHECK(std::abs(idx.nearest(Vec3(0.99, 0.5, 0.5)) - 0.02) < 1e-12);
  CHECK_FALSE(idx.contains(Vec3(0.9, 0.5, 0.5)));

  // Brute-force oracle on random queries.
  std::mt19937_64 rng(3);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(torus.sample(rng));
  const PointIndex big(torus, pts, 0.1);
  for (int q = 0; q < 500; ++q) {
    const Vec3 x = torus.sample(rng);
    double best = 1e9;
    for (const Vec3& p : pts) best = std::min(best, torus.distance(x, p));
    CHECK(big.contains(x) == (best <= 0.1));
  }
}

TEST_CASE("dissipative_region from catalogs") {
  const auto saddle = make_builtin("cylinder", {{"c", 1.0}});
  const RegionApprox r1 = dissipative_region(saddle.spec, census(saddle));
  REQUIRE(r1.components.size() == 1);
  CHECK(r1.saddles() == 1);
  CHECK(r1.sinks() == 0);
  CHECK(r1.contains(Vec3(std::cos(1.0), std::sin(1.0), 0)));
  CHECK_FALSE(r1.contains(Vec3(1.1, 0, 0)));
  for (const Vec3& p : r1.components[0].samples) {
    CHECK(std::abs(std::hypot(p.x(), p.y()) - 1) < 1e-6);
  }

  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const RegionApprox r2 = dissipative_region(sink.spec, census(sink));
  REQUIRE(r2.components.size() == 1);
  CHECK(r2.sinks() == 1);
  CHECK(r2.saddles() == 0);

  const auto cm = make_builtin("catmap-suspension");
  const RegionApprox r3 = dissipative_region(cm.spec, census(cm, 2.0));
  CHECK(r3.empty());
}

TEST_CASE("mean_divergence") {
  const auto rot = make_builtin("rotation");
  for (double t : {0.5, 3.0, 17.0}) CHECK(std::abs(mean_divergence(rot.spec, Vec3(0.1, 0.2, 0.3), t)) < 1e-12);

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  CHECK(std::abs(mean_divergence(f2.spec, Vec3(1, 0, 0), 2 * kPi) + 1) < 1e-8);

  // Trajectories in the invariant plane z = 0 converge to the cycle.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r(0.5, 1.5), th(0, 2 * kPi);
  for (int i = 0; i < 20; ++i) {
    const double a = r(rng), b = th(rng);
    const double m = mean_divergence(f2.spec, Vec3(a * std::cos(b), a * std::sin(b), 0), 100.0);
    CHECK(m >= -1.1);
    CHECK(m <= 0.1);
  }
  CHECK_THROWS_AS(mean_divergence(f2.spec, Vec3(1, 0, 0), 0.0), Error);
}

TEST_CASE("lambda_delta_member") {
  const auto rot = make_builtin("rotation");
  CHECK(lambda_delta_member(rot.spec, Vec3(0.3, 0.3, 0.3), 0.01, 1.0, 50.0).member);

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  for (const Vec3& x : {Vec3(0.5, 0, 0), Vec3(0, 1.5, 0), Vec3(0.7, -0.7, 0)}) {
    CHECK(lambda_delta_member(f2.spec, x, 0.01, 5.0, 200.0).member);
  }

  const auto grow = lambda_delta_member(expanding_flow(), Vec3(0, 0, 0), 0.05, 0.0, 50.0);
  CHECK_FALSE(grow.member);
  CHECK(grow.violation_time == doctest::Approx(1.0));
  CHECK(grow.violation_logdet == doctest::Approx(0.1).epsilon(1e-8));

  CHECK_THROWS_AS(lambda_delta_member(rot.spec, Vec3::Zero(), 0.0, 1, 2), Error);
  CHECK_THROWS_AS(lambda_delta_member(rot.spec, Vec3::Zero(), 0.1, 5, 5), Error);
}

TEST_CASE("lambda_delta nesting on a shared probe grid") {
  const auto tm = make_builtin("torus-mixed");
  std::mt19937_64 rng(5);
  const double deltas[] = {0.001, 0.01, 0.05, 0.2};
  for (int i = 0; i < 20; ++i) {
    const Vec3 x = tm.spec.domain.sample(rng);
    bool prev = false;
    for (double d : deltas) {
      const bool m = lambda_delta_member(tm.spec, x, d, 2.0, 30.0, 0.5).member;
      if (prev) CHECK(m);
      prev = m;
    }
  }
}

TEST_CASE("markov_tail_probe") {
  const auto rot = make_builtin("rotation");
  const auto p0 = markov_tail_probe(rot.spec, 0.1, 1.0, 5, 500, 1);
  CHECK(p0.pass());
  CHECK(p0.rows[0].fraction == 1.0);
  CHECK(p0.rows[0].bound == 1.0);
  for (std::size_t n = 1; n < p0.rows.size(); ++n) CHECK(p0.rows[n].fraction == 0.0);

  const auto tm = make_builtin("torus-mixed");
  const auto p = markov_tail_probe(tm.spec, 0.1, 1.0, 10, 20000, 7);
  CHECK(p.pass());
  CHECK_FALSE(p.normalized);
  for (const MarkovRow& r : p.rows) {
    CHECK(r.fraction <= r.bound + 3 * r.standard_error);
  }
  CHECK(p.rows[10].fraction < p.rows[1].fraction);
  CHECK_THROWS_AS(markov_tail_probe(rot.spec, 0.0, 1.0, 1, 10), Error);
}

TEST_CASE("birkhoff_measure") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto m = birkhoff_measure(f2.spec, Vec3(1, 0, 0), 2 * kPi);
  double sum = 0;
  for (double w : m.weights) {
    CHECK(w >= 0);
    sum += w;
  }
  CHECK(std::abs(sum - 1) < 1e-12);
  for (const Vec3& p : m.points) CHECK(std::abs(p.head<2>().norm() - 1) < 1e-8);
  CHECK(std::abs(m.integrate([&](const Vec3& p) { return divergence(f2.spec, p); }) + 1) < 1e-8);

  const auto rot = make_builtin("rotation");
  const auto mr = birkhoff_measure(rot.spec, Vec3(0, 0, 0), 1000.0, 0.01);
  CHECK(std::abs(mr.integrate([&](const Vec3& p) { return divergence(rot.spec, p); })) < 1e-12);
  // Equidistribution: mass in the half cube x < 0.5 is about 1/2.
  CHECK(std::abs(mr.integrate([](const Vec3& p) { return p.x() < 0.5 ? 1.0 : 0.0; }) - 0.5) < 0.01);

  // Liouville consistency at off-cycle points, including the transient.
  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const auto tm = make_builtin("torus-mixed");
  for (const auto& [spec, x, t] :
       {std::tuple{&sink.spec, Vec3(1.3, 0.2, 0.3), 5.0}, std::tuple{&sink.spec, Vec3(0.6, 0, -0.4), 3.7},
        std::tuple{&tm.spec, Vec3(0.1, 0.7, 0.2), 8.0}, std::tuple{&f2.spec, Vec3(0.8, 0.1, 0.01), 2.0}}) {
    const auto mu = birkhoff_measure(*spec, x, t);
    const double lhs = mu.integrate([&](const Vec3& p) { return divergence(*spec, p); });
    CHECK(std::abs(lhs - mean_divergence(*spec, x, t, 1e-12)) < 1e-8);
  }
}

TEST_CASE("omega_limit_sample") {
  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const double eps = 0.01;
  const auto om = omega_limit_sample(sink.spec, Vec3(1.5, 0, 0.2), 30.0, 2 * kPi, eps);
  REQUIRE(om.points.size() > 100);
  for (const Vec3& p : om.points) {
    CHECK(std::abs(p.head<2>().norm() - 1) < eps);
    CHECK(std::abs(p.z()) < eps);
  }

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto on = omega_limit_sample(f2.spec, Vec3(1, 0, 0), 1.0, 2 * kPi, 1e-3);
  for (const Vec3& p : on.points) CHECK(std::abs(p.head<2>().norm() - 1) < 1e-3);

  // Irrational rotation: every cell of a 5x5x5 partition is visited.
  const auto rot = make_builtin("rotation");
  const auto dense = omega_limit_sample(rot.spec, Vec3(0.1, 0.1, 0.1), 1.0, 400.0, 0.05);
  std::set<std::tuple<int, int, int>> cells;
  for (const Vec3& p : dense.points) {
    auto c = [](double v) { return std::min(4, static_cast<int>(std::floor(std::fmod(v + 1.0, 1.0) * 5))); };
    cells.emplace(c(p.x()), c(p.y()), c(p.z()));
  }
  CHECK(cells.size() == 125);
}

TEST_CASE("wilson interval") {
  CHECK(wilson_lower(0, 100) == 0.0);
  CHECK(wilson_upper(100, 100) == 1.0);
  CHECK(wilson_lower(50, 100) == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(wilson_upper(50, 100) == doctest::Approx(0.5962).epsilon(1e-3));
  CHECK(wilson_upper(0, 1000) < 0.004);
  for (int h = 0; h <= 40; ++h) {
    CHECK(wilson_lower(h, 40) <= h / 40.0);
    CHECK(wilson_upper(h, 40) >= h / 40.0);
  }
}

TEST_CASE("weak_basin_estimate") {
  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const RegionApprox rs = dissipative_region(sink.spec, census(sink));
  BasinOptions opts;
  opts.samples = 1000;
  opts.horizon = 60;
  const auto est = weak_basin_estimate(sink.spec, rs, opts);
  CHECK(est.hits == 1000);
  CHECK(est.ci_low > 0.99);
  CHECK(est.hits + est.misses + est.left_domain + est.undecided == est.n);

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const RegionApprox rsad = dissipative_region(f2.spec, census(f2));
  opts.samples = 500;
  const auto none = weak_basin_estimate(f2.spec, rsad, opts);
  CHECK(none.ci_high < 0.01);
  CHECK(none.hits == 0);
  // Oracle: z' = z, so |z| decreases for no sample with z != 0.
  std::mt19937_64 rng(0);
  int shrinking = 0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 x = f2.spec.domain.sample(rng);
    shrinking += (x.z() * evaluate_field(f2.spec, x).z() < 0) ? 1 : 0;
  }
  CHECK(shrinking == 0);

  const auto cm = make_builtin("catmap-suspension");
  const auto empty = weak_basin_estimate(cm.spec, RegionApprox{}, opts);
  CHECK(empty.empty_region);
  CHECK(empty.estimate == 0.0);

  opts.samples = 50;
  CHECK_THROWS_AS(weak_basin_estimate(sink.spec, rs, opts), Error);
}

TEST_CASE("weak_basin_estimate reproducibility and interval scaling") {
  const VectorFieldSpec spec = bistable_flow();
  const RegionApprox upper = circle_region(spec.domain, 1.0, 0.01);
  BasinOptions opts;
  opts.samples = 400;
  opts.horizon = 40;
  opts.seed = 42;
  const auto a = weak_basin_estimate(spec, upper, opts);
  opts.threads = 3;
  const auto b = weak_basin_estimate(spec, upper, opts);
  CHECK(a.fates == b.fates);
  CHECK(a.estimate == b.estimate);
  CHECK(std::abs(a.estimate - 0.5) < 0.1);

  opts.samples = 800;
  const auto c = weak_basin_estimate(spec, upper, opts);
  const double ratio = (c.ci_high - c.ci_low) / (a.ci_high - a.ci_low);
  CHECK(ratio == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.2));

  const auto run = c.running(100);
  REQUIRE(run.size() == 8);
  CHECK(run.back().second == c.estimate);
}

TEST_CASE("trapped_set_measure") {
  const auto rot = make_builtin("rotation");
  TrappedOptions opts;
  opts.samples = 300;
  const auto whole = trapped_set_measure(rot.spec, rot.spec.domain.sampling, {1.0, 10.0}, opts);
  for (const auto& r : whole) CHECK(r.estimate == 1.0);

  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const Shape shell = cylinder_trapping_shell();
  const auto s = trapped_set_measure(sink.spec, shell, {1, 5, 20}, opts);
  CHECK(s.back().estimate > 0.5);
  CHECK(s.back().estimate == s.front().estimate);

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const Shape thin = Shape::cylinder_shell(0.9, 1.1, -0.1, 0.1);
  const auto t = trapped_set_measure(f2.spec, thin, {0.5, 2, 8, 20}, opts);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i].trapped <= t[i - 1].trapped);
  CHECK(t.back().estimate == 0.0);

  // Monotone in U.
  const auto big = trapped_set_measure(f2.spec, shell, {0.5, 2, 8, 20}, opts);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i].trapped <= big[i].trapped);
}

TEST_CASE("attractor_check") {
  const Shape shell = cylinder_trapping_shell();
  const auto sink = make_builtin("cylinder", {{"c", -1.0}});
  const auto so = find_periodic_orbit(sink.spec, sink.sections.front(), Vec3(1.1, 0, 0.05));
  const auto v = attractor_check(sink.spec, candidate_from_orbit(sink.spec, so), shell);
  CHECK(v.trapping);
  CHECK(v.convergence);
  CHECK(v.evidence);

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto sa = find_periodic_orbit(f2.spec, f2.sections.front(), Vec3(1.1, 0, 0.05));
  AttractorOptions opts;
  opts.horizon = 5;
  const auto w = attractor_check(f2.spec, candidate_from_orbit(f2.spec, sa), shell, opts);
  CHECK_FALSE(w.trapping);
  CHECK(w.boundary_outward > 0);
  CHECK_FALSE(w.evidence);

  const auto rot = make_builtin("rotation");
  AttractorCandidate all;
  all.name = "torus";
  all.whole_space = true;
  const auto wv = attractor_check(rot.spec, all, rot.spec.domain.sampling);
  CHECK(wv.evidence);

  const Shape small = Shape::cylinder_shell(1.2, 1.4, -0.1, 0.1);
  CHECK_THROWS_AS(attractor_check(sink.spec, candidate_from_orbit(sink.spec, so), small), Error);
}
