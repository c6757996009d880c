#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lpflow/builtins.hpp"
#include "lpflow/error.hpp"
#include "lpflow/surgery.hpp"

using namespace lpflow;

namespace {

constexpr double kPi = std::numbers::pi;

NormalCocycle identity_cocycle(const std::vector<double>& times) {
  NormalCocycle c;
  c.times = times;
  c.frames.assign(times.size(), NormalFrame{});
  c.maps.assign(times.size() - 1, Mat2::Identity());
  return c;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

// Smallest m >= 1 with eps1 (1 + eps1)^m >= target, by plain increment.
long brute_force_m(double eps1, double target) {
  long m = 1;
  double g = eps1 * (1 + eps1);
  while (g < target) {
    g *= 1 + eps1;
    ++m;
  }
  return m;
}

}  // namespace

TEST_CASE("delta_damped_cocycle") {
  const auto damped = delta_damped_cocycle(identity_cocycle({0, 1, 2, 3}), 0.2);
  CHECK(damped.total().determinant() == doctest::Approx(std::exp(-0.6)).epsilon(1e-14));
  const auto uneven = delta_damped_cocycle(identity_cocycle({0, 0.5, 1.3, 2.0, 3.0}), 0.2);
  CHECK(uneven.total().determinant() == doctest::Approx(std::exp(-0.6)).epsilon(1e-14));

  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto mono = periodic_cocycle(f2.spec, Vec3(1, 0, 0), 2 * kPi, 1.0, 1e-11);
  const double delta = 0.1;
  const auto d = delta_damped_cocycle(mono, delta);
  const double det0 = mono.total().determinant();
  CHECK(det0 == doctest::Approx(std::exp(-2 * kPi)).epsilon(1e-7));
  CHECK(d.total().determinant() == doctest::Approx(std::exp(-2 * kPi * delta) * det0).epsilon(1e-12));
  CHECK(std::abs(d.total().determinant()) < 1);

  CHECK(code_of([] { delta_damped_cocycle(identity_cocycle({0, 1.5, 3}), 0.1); }) == ErrorCode::BadPartition);
  CHECK(code_of([] { delta_damped_cocycle(identity_cocycle({0, 1}), 0.0); }) == ErrorCode::InvalidArgument);

  // Perturbation size on random cocycles.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2, 2), gap(0.1, 1.0);
  const auto budget = choose_budget(10.0, 0.1, 0.9, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> times{0};
    for (int i = 0; i < 6; ++i) times.push_back(times.back() + gap(rng));
    NormalCocycle c = identity_cocycle(times);
    double C = 0;
    for (auto& m : c.maps) {
      m << u(rng), u(rng), u(rng), u(rng);
      C = std::max(C, spectral_norm(m));
    }
    const auto dc = delta_damped_cocycle(c, budget.delta);
    for (std::size_t i = 0; i < c.maps.size(); ++i) {
      const double dev = spectral_norm(dc.maps[i] - c.maps[i]);
      CHECK(dev <= std::abs(1 - std::exp(-budget.delta / 2)) * C * (1 + 1e-12));
      if (C <= budget.C) CHECK(dev < budget.eps);
    }
  }
}

TEST_CASE("saddle_matrix_form") {
  const SaddleData d{0.5, 1.6, 0.1, 1.0};
  const Mat2 m = saddle_matrix_form(d);
  CHECK(m(0, 0) == 0.5);
  CHECK(m(0, 1) == doctest::Approx(11.0).epsilon(1e-14));
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == 1.6);
  // Unstable eigenvector (m01, mu - lambda) makes graph angle gamma with (1, 0).
  const Vec2 ev(m(0, 1), d.mu - d.lambda);
  CHECK((m * ev - d.mu * ev).norm() < 1e-12);
  CHECK(graph_angle(Vec2::UnitX(), ev) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(code_of([] { saddle_matrix_form({0.5, 1.6, 0.0, 1.0}); }) == ErrorCode::ZeroAngle);
}

TEST_CASE("shear_matrix") {
  const Mat2 a = shear_matrix({0.5, 1.6, 0.1, 1.0});
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 1) == 1.0);
  CHECK(a(1, 0) == doctest::Approx(-0.19090909090909).epsilon(1e-12));
  CHECK(shear_matrix({0.5, 1.6, 0.0, 1.0}) == Mat2::Identity());
  CHECK(code_of([] { shear_matrix({1.5, 1.5, 0.1, 1.0}); }) == ErrorCode::EqualEigenvalues);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0, 1);
  int tested = 0;
  for (int i = 0; i < 2000; ++i) {
    const double rate = 0.1 + 0.85 * unit(rng);
    const double lam = (2 * unit(rng) - 1) * 0.99;
    const double mu = (unit(rng) < 0.5 ? -1 : 1) * (1.0 + unit(rng) * (1 / std::max(std::abs(lam), 0.05) - 1));
    const double gamma = 2 * unit(rng);
    if (!(std::abs(lam - mu) > 1 - rate) || std::abs(lam * mu) >= 1) continue;
    ++tested;
    const double dev = spectral_norm(shear_matrix({lam, mu, gamma, 1.0}) - Mat2::Identity());
    CHECK(dev == doctest::Approx(std::abs((lam + mu) / (lam - mu)) * gamma).epsilon(1e-12));
    CHECK(dev <= shear_norm_bound(gamma, rate) * (1 + 1e-12));
  }
  CHECK(tested > 500);
}

TEST_CASE("sink_via_shear") {
  const auto r = sink_via_shear({0.5, 1.6, 0.1, 1.0});
  CHECK(std::abs(r.trace) < 1e-12);
  CHECK(r.det == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(r.modulus == doctest::Approx(0.894427191).epsilon(1e-9));
  CHECK(r.ev1.imag() != 0.0);
  CHECK(std::abs(r.ev1 - std::conj(r.ev2)) < 1e-12);
  CHECK(r.sink);

  for (double gamma : {0.01, 0.3, 2.0, 40.0}) {
    CHECK(sink_via_shear({0.25, 2.0, gamma, 1.0}).modulus == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  }
  CHECK(code_of([] { sink_via_shear({0.5, 2.0, 0.1, 1.0}); }) == ErrorCode::NotDissipative);
}

TEST_CASE("shear sink algebra over random dissipative saddles") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < 100000; ++i) {
    const double lam = (unit(rng) < 0.5 ? -1 : 1) * (0.02 + 0.97 * unit(rng));
    const double mu_max = 1 / std::abs(lam);
    const double mu = (unit(rng) < 0.5 ? -1 : 1) * (1 + (mu_max - 1) * (0.001 + 0.998 * unit(rng)));
    const double gamma = std::exp(-4 + 7 * unit(rng));
    const auto r = sink_via_shear({lam, mu, gamma, 1.0});
    const double scale = std::max(1.0, std::abs(mu) / gamma);
    CHECK(std::abs(r.trace) <= 1e-12 * scale);
    CHECK(std::abs(r.det - lam * mu) <= 1e-12 * scale);
  }
}

TEST_CASE("choose_budget") {
  const auto b = choose_budget(10, 0.1, 0.9, 0.5);
  CHECK(b.eps0 == doctest::Approx(1.0 / 300).epsilon(1e-14));
  CHECK(b.eps1 == doctest::Approx(0.99 / 900).epsilon(1e-14));
  CHECK(b.m == brute_force_m(b.eps1, 8.0));
  CHECK(std::abs(b.m - 8080) < 20);
  CHECK(b.valid());
  for (const auto& check : b.verify()) CHECK(check.pass);

  const auto cap = choose_budget(1.0, 3.0, 0.5, 1.0);
  CHECK(cap.eps0 == 1.0);
  CHECK(cap.valid());

  const auto wide = choose_budget(1.0, 0.3, 0.5, 1e12);
  CHECK(wide.eps1 == doctest::Approx(0.099).epsilon(1e-9));
  CHECK(wide.m == brute_force_m(wide.eps1, 4.0 + 2e-12));
  const auto inf = choose_budget(1.0, 0.3, 0.5, std::numeric_limits<double>::infinity());
  CHECK(inf.m <= wide.m);
  CHECK(inf.valid());

  // Random inputs: every returned budget satisfies all inequalities.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < 500; ++i) {
    const double C = 0.5 + 20 * unit(rng);
    const double eps = C * (0.001 + unit(rng));
    const double rate = 0.01 + 0.98 * unit(rng);
    const double alpha = std::exp(-3 + 6 * unit(rng));
    const auto bi = choose_budget(C, eps, rate, alpha);
    CHECK(bi.m == brute_force_m(bi.eps1, 2 / alpha + 4));
    for (const auto& check : bi.verify()) CHECK(check.pass);
  }

  CHECK(code_of([] { choose_budget(1, 0.1, 1.0, 1); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { choose_budget(0, 0.1, 0.5, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("graph_norm_bound") {
  CHECK(graph_norm_bound(1.0, 0.1) == doctest::Approx(0.2));
  CHECK(graph_norm_bound(std::numeric_limits<double>::infinity(), 0.1) == 0.1);
  CHECK(graph_norm_bound(1e15, 0.1) == doctest::Approx(0.1).epsilon(1e-12));
  for (double alpha : {0.1, 0.5, 2.0}) {
    const auto b = choose_budget(5.0, 0.5, 0.7, alpha);
    CHECK(graph_norm_bound(alpha, b.eps1) < b.eps0);
  }
}

TEST_CASE("graph_perturbation_family on diagonal cocycles") {
  const auto b = choose_budget(2.0, 0.5, 0.5, 10.0);
  const SaddleData d{0.5, 1.6, 1.0, 2.0 * b.m + 18.5};
  const auto r = graph_perturbation_family(d, b);
  const double target = std::pow(1 + b.eps1, -d.tau + 2 * b.m + 1) * d.lambda;
  CHECK(r.lambda_target == doctest::Approx(target).epsilon(1e-12));
  CHECK(std::abs(r.lambda_out.real() / target - 1) < 1e-10);
  CHECK(std::abs(r.mu_out.real() / d.mu - 1) < 1e-10);
  CHECK(std::abs(r.det_out) == doctest::Approx(std::abs(target * d.mu)).epsilon(1e-10));
  CHECK(std::abs(r.det_out) < std::abs(d.lambda * d.mu));
  CHECK(r.max_deviation() < b.eps);
  CHECK(r.valid());
  // The stable and unstable axes stay eigenvectors.
  const Mat2 total = r.perturbed.total();
  CHECK(std::abs(total(1, 0)) < 1e-12);
  CHECK(std::abs(total(0, 1)) < 1e-12);

  // Large budget: m near 8080, tau just past 2m + 1.
  const auto big = choose_budget(10, 0.1, 0.9, 0.5);
  const SaddleData dd{-0.4, 2.2, 1.0, 2.0 * big.m + 40.25};
  const auto rr = graph_perturbation_family(dd, big);
  CHECK(std::abs(rr.lambda_out.real() / rr.lambda_target - 1) < 1e-10);
  CHECK(std::abs(rr.mu_out.real() / dd.mu - 1) < 1e-10);
  CHECK(rr.max_deviation() < big.eps);
  CHECK(rr.valid());
}

TEST_CASE("graph_perturbation_family in skewed frames") {
  const auto b = choose_budget(3.0, 0.6, 0.5, 20.0);
  const SaddleData d{0.3, 2.5, 1.0, 2.0 * b.m + 7.7};
  const NormalCocycle diag = synthetic_saddle_cocycle(d);
  // Conjugate by per-point changes of basis Q_j with Q_G = Q_0.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<Mat2> Q;
  for (std::size_t j = 0; j < diag.size(); ++j) {
    Mat2 q;
    q << 1 + u(rng), u(rng), u(rng), 1 + u(rng);
    Q.push_back(q);
  }
  Q.push_back(Q.front());
  NormalCocycle skew = diag;
  for (std::size_t j = 0; j < diag.size(); ++j) skew.maps[j] = Q[j + 1] * diag.maps[j] * Q[j].inverse();
  const auto r = graph_perturbation_family(d, b, skew, Q[0].col(0), Q[0].col(1));
  CHECK(std::abs(r.lambda_out.real() / r.lambda_target - 1) < 1e-10);
  CHECK(std::abs(r.mu_out.real() / d.mu - 1) < 1e-10);
  const Mat2 total = r.perturbed.total();
  CHECK((total * Q[0].col(1) - d.mu * Q[0].col(1)).norm() < 1e-9);
}

TEST_CASE("graph_perturbation_family errors") {
  const auto b = choose_budget(2.0, 0.5, 0.5, 10.0);
  CHECK(code_of([&] { graph_perturbation_family({0.5, 1.6, 1.0, 2.0 * b.m + 0.5}, b); }) ==
        ErrorCode::PeriodTooShort);
  CHECK(code_of([&] { graph_perturbation_family({0.5, 2.5, 1.0, 2.0 * b.m + 10}, b); }) ==
        ErrorCode::NotDissipative);
}

TEST_CASE("angle_collapse_bound") {
  CHECK(angle_collapse_bound(1.0, 3) == doctest::Approx(0.5).epsilon(1e-14));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.01, 10);
  for (int i = 0; i < 1000; ++i) {
    const double alpha = unit(rng);
    CHECK(std::abs(angle_collapse_bound(2 / alpha + 4, 0) - alpha) <= 1e-12 * std::max(1.0, alpha));
  }
  for (double eps : {0.01, 0.1, 0.5}) {
    const auto b = choose_budget(1.0, eps, 0.5, 0.5);
    CHECK(angle_collapse_bound(b.eps1, b.m) <= 0.5);
  }
  CHECK(code_of([] { angle_collapse_bound(1.0, 2); }) == ErrorCode::DenominatorNonpositive);
}

TEST_CASE("non_domination_witness") {
  const NormalCocycle id = identity_cocycle({0, 1, 2, 3, 4});
  std::vector<DirectionPair> dirs(id.frames.size());
  const auto w = non_domination_witness(id, dirs, 3.5);
  CHECK(w.witness);
  CHECK(w.times.size() == 3);
  for (double p : w.products) CHECK(p == doctest::Approx(1.0));

  const auto cm = make_builtin("catmap-suspension");
  const auto orbit = find_periodic_orbit(cm.spec, cm.sections.front(), Vec3(0.02, 0.97, 0.5));
  const auto coc = periodic_cocycle(cm.spec, orbit.point, orbit.period, 0.25, 1e-11);
  const auto cdirs = transport_directions(coc, eigen_directions(orbit));
  const auto cw = non_domination_witness(coc, cdirs, 1.0);
  CHECK_FALSE(cw.witness);
  CHECK(cw.products.back() == doctest::Approx(0.1458980338).epsilon(1e-6));

  // Contraction at rate 0.9 per unit time: fails first at t = 7, and
  // escape_multiple gives the first failing multiple of tau.
  const double tau = 2.5;
  const SaddleData d{std::pow(0.9 * 1.05, tau), std::pow(1.05, tau), 1.0, tau};
  const auto sc = synthetic_saddle_cocycle(d);
  std::vector<DirectionPair> sdirs(sc.frames.size());
  const long k0 = escape_multiple(0.9, tau);
  CHECK(k0 == 3);
  CHECK(non_domination_witness(sc, sdirs, (k0 - 1) * tau).witness);
  const auto fail = non_domination_witness(sc, sdirs, k0 * tau);
  CHECK_FALSE(fail.witness);
  CHECK(fail.first_failure == doctest::Approx(7.0));
  CHECK(fail.products.back() == doctest::Approx(std::pow(0.9, k0 * tau)).epsilon(1e-10));

  CHECK(code_of([&] { non_domination_witness(id, {}, 1.0); }) == ErrorCode::MissingDirections);
}

TEST_CASE("determinant_discrepancy") {
  const auto f2 = make_builtin("cylinder", {{"c", 1.0}});
  const auto on = determinant_discrepancy(f2.spec, Vec3(1, 0, 0), 2 * kPi);
  CHECK(std::abs(on.difference) < 1e-8);
  CHECK(on.mean_log_det_flow == doctest::Approx(-1.0).epsilon(1e-8));

  const Vec3 x(1.3, 0.0, 0.1);
  const auto off = determinant_discrepancy(f2.spec, x, 3.0);
  const Vec3 end = flow(f2.spec, x, 3.0, {1e-11}).end;
  const double oracle = std::log(f2.spec.field(x).norm() / f2.spec.field(end).norm()) / 3.0;
  CHECK(off.difference == doctest::Approx(oracle).epsilon(1e-7));
}
