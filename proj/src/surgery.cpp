#include "lpflow/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "lpflow/error.hpp"

namespace lpflow {

namespace {

std::pair<std::complex<double>, std::complex<double>> eigenvalues(const Mat2& m) {
  const double tr = m.trace();
  const std::complex<double> root = std::sqrt(std::complex<double>(tr * tr - 4 * m.determinant()));
  std::complex<double> a = 0.5 * (tr - root);
  std::complex<double> b = 0.5 * (tr + root);
  if (std::abs(a) > std::abs(b)) std::swap(a, b);
  return {a, b};
}

// Linear map acting on the basis (first, second) by the given 2x2 matrix.
Mat2 in_basis(const Vec2& first, const Vec2& second, const Mat2& coeffs) {
  Mat2 b;
  b << first, second;
  return b * coeffs * b.inverse();
}

}  // namespace

void SaddleData::validate() const {
  if (!(std::abs(lambda) < 1.0 && std::abs(mu) > 1.0)) {
    throw Error(ErrorCode::NotASaddle, "need |lambda| < 1 < |mu|");
  }
  if (!(gamma >= 0) || !(tau > 0)) throw Error(ErrorCode::InvalidArgument, "need gamma >= 0 and tau > 0");
}

Inequality make_inequality(std::string label, double lhs, double rhs, bool strict) {
  return {std::move(label), lhs, rhs, strict, strict ? lhs < rhs : lhs <= rhs};
}

NormalCocycle delta_damped_cocycle(const NormalCocycle& cocycle, double delta) {
  cocycle.validate();
  if (!(delta > 0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  NormalCocycle out = cocycle;
  for (std::size_t i = 0; i < out.maps.size(); ++i) {
    const double gap = out.times[i + 1] - out.times[i];
    if (gap > 1.0 + 1e-12) throw Error(ErrorCode::BadPartition, "damping needs partition gaps of at most 1");
    out.maps[i] *= std::exp(-gap * delta / 2);
  }
  return out;
}

Mat2 saddle_matrix_form(const SaddleData& d) {
  if (!(d.gamma > 0)) throw Error(ErrorCode::ZeroAngle, "graph angle must be positive");
  Mat2 m;
  m << d.lambda, (d.mu - d.lambda) / d.gamma, 0.0, d.mu;
  return m;
}

Mat2 shear_matrix(const SaddleData& d) {
  if (d.lambda == d.mu) throw Error(ErrorCode::EqualEigenvalues, "shear needs lambda != mu");
  Mat2 a = Mat2::Identity();
  a(1, 0) = d.gamma * (d.lambda + d.mu) / (d.lambda - d.mu);
  return a;
}

double shear_norm_bound(double gamma, double rate) { return (2.0 / (1.0 - rate) + 1.0) * gamma; }

SinkReport sink_via_shear(const SaddleData& d) {
  if (!d.dissipative()) throw Error(ErrorCode::NotDissipative, "|lambda mu| must be below 1");
  SinkReport r;
  r.input = d;
  r.saddle = saddle_matrix_form(d);
  r.shear = shear_matrix(d);
  r.product = r.shear * r.saddle;
  r.trace = r.product.trace();
  r.det = r.product.determinant();
  std::tie(r.ev1, r.ev2) = eigenvalues(r.product);
  r.modulus = std::max(std::abs(r.ev1), std::abs(r.ev2));
  r.shear_deviation = spectral_norm(r.shear - Mat2::Identity());
  r.sink = r.modulus < 1.0;
  return r;
}

// ------------------------------------------------------------------ budget

double graph_norm_bound(double alpha, double coefficient) {
  if (!(alpha > 0)) throw Error(ErrorCode::InvalidArgument, "angle floor must be positive");
  if (std::isinf(alpha)) return coefficient;
  return (1.0 + alpha) / alpha * coefficient;
}

namespace {

double angle_fraction(double alpha) { return std::isinf(alpha) ? 1.0 : alpha / (1.0 + alpha); }

double lapa_target(double alpha) { return 2.0 / alpha + 4.0; }

double growth(double eps1, long m) { return eps1 * std::exp(static_cast<double>(m) * std::log1p(eps1)); }

}  // namespace

std::vector<Inequality> PerturbationBudget::verify() const {
  return {
      make_inequality("(2 eps0 + eps0^2) C <= eps", (2 * eps0 + eps0 * eps0) * C, eps, false),
      make_inequality("(1 + eps1) lambda_rate < 1", (1 + eps1) * lambda_rate, 1.0),
      make_inequality("eps1 < alpha/(1 + alpha) eps0", eps1, angle_fraction(alpha) * eps0),
      make_inequality("2/alpha + 4 <= eps1 (1 + eps1)^m", lapa_target(alpha), growth(eps1, m), false),
      make_inequality("|1 - exp(-delta/2)| C < eps", std::abs(1 - std::exp(-delta / 2)) * C, eps),
      make_inequality("((1 + alpha)/alpha) eps1 < eps0", graph_norm_bound(alpha, eps1), eps0),
  };
}

bool PerturbationBudget::valid() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Inequality& i) { return i.pass; });
}

PerturbationBudget choose_budget(double C, double eps, double lambda_rate, double alpha) {
  if (!(C > 0) || !(eps > 0) || !(alpha > 0)) {
    throw Error(ErrorCode::InvalidArgument, "C, eps and alpha must be positive");
  }
  if (!(lambda_rate > 0 && lambda_rate < 1)) {
    throw Error(ErrorCode::InvalidArgument, "contraction rate must lie in (0, 1)");
  }
  PerturbationBudget b;
  b.C = C;
  b.eps = eps;
  b.lambda_rate = lambda_rate;
  b.alpha = alpha;
  b.eps0 = std::min(1.0, eps / (3 * C));
  b.eps1 = 0.99 * std::min(angle_fraction(alpha) * b.eps0, (1 - lambda_rate) / (2 * lambda_rate));
  if (!(b.eps1 > 0) || !std::isfinite(b.eps1)) throw Error(ErrorCode::Infeasible, "no positive eps1 exists");

  const double target = lapa_target(alpha);
  long m = std::max(1L, static_cast<long>(std::ceil(std::log(target / b.eps1) / std::log1p(b.eps1))));
  while (m > 1 && growth(b.eps1, m - 1) >= target) --m;
  while (growth(b.eps1, m) < target) ++m;
  b.m = m;
  b.delta = -2 * std::log(1 - 0.99 * std::min(1.0, eps / C));
  b.checks = b.verify();
  if (!b.valid()) throw Error(ErrorCode::Infeasible, "budget inequalities cannot all be met");
  return b;
}

double angle_collapse_bound(double eps1, long m) {
  const double den = growth(eps1, m) - 4.0;
  if (!(den > 0)) throw Error(ErrorCode::DenominatorNonpositive, "need eps1 (1 + eps1)^m > 4");
  return 2.0 / den;
}

// ----------------------------------------------------- perturbation family

NormalCocycle synthetic_saddle_cocycle(const SaddleData& d) {
  d.validate();
  NormalCocycle c;
  const auto n = static_cast<long>(std::floor(d.tau));
  for (long i = 0; i <= n; ++i) c.times.push_back(static_cast<double>(i));
  if (d.tau - static_cast<double>(n) > 1e-12) c.times.push_back(d.tau);
  if (c.times.size() < 2) c.times.push_back(d.tau);
  const double ls = std::log(std::abs(d.lambda)) / d.tau;
  const double lu = std::log(std::abs(d.mu)) / d.tau;
  for (std::size_t i = 0; i + 1 < c.times.size(); ++i) {
    const double gap = c.times[i + 1] - c.times[i];
    c.maps.push_back(Vec2(std::exp(gap * ls), std::exp(gap * lu)).asDiagonal());
  }
  c.maps.back() = Vec2(d.lambda < 0 ? -1.0 : 1.0, d.mu < 0 ? -1.0 : 1.0).asDiagonal() * c.maps.back();
  c.frames.assign(c.times.size(), NormalFrame{});
  c.closed = true;
  return c;
}

double PerturbedCocycle::max_deviation() const {
  return deviations.empty() ? 0.0 : *std::max_element(deviations.begin(), deviations.end());
}

bool PerturbedCocycle::valid() const {
  return std::all_of(checks.begin(), checks.end(), [](const Inequality& i) { return i.pass; });
}

PerturbedCocycle graph_perturbation_family(const SaddleData& d, const PerturbationBudget& budget,
                                           const NormalCocycle& cocycle, const Vec2& stable,
                                           const Vec2& unstable) {
  d.validate();
  if (!d.dissipative()) throw Error(ErrorCode::NotDissipative, "|lambda mu| must be below 1");
  cocycle.validate();
  if (!cocycle.closed) throw Error(ErrorCode::BadPartition, "perturbation needs a closed cocycle");
  const std::size_t G = cocycle.size();
  for (std::size_t i = 0; i + 1 < G; ++i) {
    if (std::abs(cocycle.times[i] - static_cast<double>(i)) > 1e-9 ||
        std::abs(cocycle.times[i + 1] - cocycle.times[i] - 1.0) > 1e-9) {
      throw Error(ErrorCode::BadPartition, "partition must be 0, 1, ..., n, tau");
    }
  }
  const double tau = cocycle.duration();
  if (!(cocycle.times[G] - cocycle.times[G - 1] <= 1.0 + 1e-9)) {
    throw Error(ErrorCode::BadPartition, "last gap exceeds 1");
  }
  if (std::abs(tau - d.tau) > 1e-9 * std::max(1.0, tau)) {
    throw Error(ErrorCode::InvalidArgument, "saddle period does not match the cocycle");
  }
  const long m = budget.m;
  if (!(tau > static_cast<double>(2 * m + 1))) {
    throw Error(ErrorCode::PeriodTooShort, "need tau > 2m + 1");
  }

  PerturbedCocycle out;
  out.input = d;
  out.budget = budget;
  out.base = cocycle;
  const double e1 = budget.eps1;

  std::vector<Vec2> s{stable.normalized()};
  std::vector<Vec2> u{unstable.normalized()};
  for (std::size_t j = 0; j < G; ++j) {
    s.push_back((cocycle.maps[j] * s[j]).normalized());
    u.push_back((cocycle.maps[j] * u[j]).normalized());
  }
  for (std::size_t j = 0; j <= G; ++j) {
    const double f = static_cast<long>(j) <= m
                         ? 1 + e1
                         : std::exp(-(cocycle.times[j] - cocycle.times[j - 1]) * std::log1p(e1));
    out.T.push_back(in_basis(s[j], u[j], Vec2(f, 1.0).asDiagonal()));
  }
  Mat2 shift;
  shift << 1, e1, 0, 1;
  out.P = in_basis(s[0], u[0], shift);
  out.s_coefficient = e1 * std::exp((2.0 * m + 1.0 - tau) * std::log1p(e1)) * d.lambda / d.mu;
  shift << 1, -out.s_coefficient, 0, 1;
  out.S = in_basis(s[0], u[0], shift);

  out.perturbed = cocycle;
  auto& L = out.perturbed.maps;
  L[0] = out.T[1] * cocycle.maps[0] * out.P;
  for (std::size_t j = 1; j + 1 < G; ++j) L[j] = out.T[j + 1] * cocycle.maps[j];
  L[G - 1] = out.S * out.T[0] * out.T[G] * cocycle.maps[G - 1];
  for (std::size_t j = 0; j < G; ++j) out.deviations.push_back(spectral_norm(L[j] - cocycle.maps[j]));

  const Mat2 total = out.perturbed.total();
  std::tie(out.lambda_out, out.mu_out) = eigenvalues(total);
  out.det_out = total.determinant();
  out.lambda_target = std::exp((2.0 * m + 1.0 - tau) * std::log1p(e1)) * d.lambda;

  double t_dev = 0.0;
  for (const Mat2& t : out.T) t_dev = std::max(t_dev, spectral_norm(t - Mat2::Identity()));
  const double p_dev = spectral_norm(out.P - Mat2::Identity());
  const double s_dev = spectral_norm(out.S - Mat2::Identity());
  const double graph = graph_norm_bound(budget.alpha, e1);
  out.checks = {
      make_inequality("max_j ||L_j - P_j|| <= eps", out.max_deviation(), budget.eps, false),
      make_inequality("||P - I|| < eps0", p_dev, budget.eps0),
      make_inequality("||S - I|| < eps0", s_dev, budget.eps0),
      make_inequality("max_j ||T_j - I|| <= eps0", t_dev, budget.eps0, false),
      make_inequality("||P - I|| <= ((1 + alpha)/alpha) eps1", p_dev, graph * (1 + 1e-12), false),
      make_inequality("|det| <= |lambda mu|", std::abs(out.det_out), std::abs(d.lambda * d.mu) * (1 + 1e-12),
                      false),
      make_inequality("|det| < 1", std::abs(out.det_out), 1.0),
      make_inequality("|lambda_out| < 1", std::abs(out.lambda_out), 1.0),
      make_inequality("1 < |mu_out|", 1.0, std::abs(out.mu_out)),
  };
  return out;
}

PerturbedCocycle graph_perturbation_family(const SaddleData& d, const PerturbationBudget& budget) {
  return graph_perturbation_family(d, budget, synthetic_saddle_cocycle(d), Vec2::UnitX(), Vec2::UnitY());
}

// ------------------------------------------------------------ witnesses

NonDominationWitness non_domination_witness(const NormalCocycle& cocycle,
                                            const std::vector<DirectionPair>& directions, double T) {
  cocycle.validate();
  if (directions.size() != cocycle.frames.size()) {
    throw Error(ErrorCode::MissingDirections, "need one direction pair per partition point");
  }
  if (!(T > 0)) throw Error(ErrorCode::InvalidArgument, "T must be positive");
  NonDominationWitness w;
  const std::size_t n = cocycle.size();
  const Vec2 e = directions.front().stable.normalized();
  Mat2 m = Mat2::Identity();
  double t = 0.0;
  for (std::size_t k = 0;; ++k) {
    if (k >= n && !cocycle.closed) break;
    const std::size_t j = k % n;
    const double dt = cocycle.times[j + 1] - cocycle.times[j];
    if (t + dt > T * (1 + 1e-12)) break;
    m = cocycle.maps[j] * m;
    t += dt;
    const std::size_t end = cocycle.closed ? (k + 1) % n : k + 1;
    const double product =
        (m * e).norm() * m.partialPivLu().solve(directions[end].unstable.normalized()).norm();
    w.times.push_back(t);
    w.products.push_back(product);
    if (product < kDominationBound && w.first_failure < 0) w.first_failure = t;
  }
  w.witness = w.first_failure < 0;
  return w;
}

long escape_multiple(double rate, double tau) {
  if (!(rate > 0 && rate < 1) || !(tau > 0)) {
    throw Error(ErrorCode::InvalidArgument, "need rate in (0, 1) and tau > 0");
  }
  auto k = static_cast<long>(std::ceil(std::log(0.5) / (tau * std::log(rate))));
  k = std::max(1L, k);
  while (std::pow(rate, static_cast<double>(k) * tau) >= 0.5) ++k;
  return k;
}

DeterminantDiscrepancy determinant_discrepancy(const VectorFieldSpec& spec, const Vec3& x, double t,
                                               double tol) {
  if (!(t > 0)) throw Error(ErrorCode::InvalidArgument, "t must be positive");
  const LinearPoincare lp = linear_poincare(spec, x, t, tol);
  DeterminantDiscrepancy d;
  d.t = t;
  d.mean_log_det_flow = lp.log_det / t;
  d.mean_log_det_normal = std::log(std::abs(lp.matrix.determinant())) / t;
  d.difference = d.mean_log_det_normal - d.mean_log_det_flow;
  return d;
}

}  // namespace lpflow
