#pragma once

// Cocycle-level perturbation constructions for periodic saddles: damping,
// the shear that turns a dissipative saddle into a complex sink, and the
// graph perturbation family that shrinks the stable eigenvalue while keeping
// the unstable one. Everything here is exact 2x2 linear algebra; no
// perturbed vector field is synthesized.

#include <complex>
#include <string>
#include <vector>

#include "lpflow/linpoincare.hpp"
#include "lpflow/splitting.hpp"

namespace lpflow {

struct SaddleData {
  double lambda = 0.5;  // |lambda| < 1
  double mu = 2.0;      // |mu| > 1
  double gamma = 1.0;   // graph angle between N^s and N^u
  double tau = 1.0;     // period

  bool dissipative() const { return std::abs(lambda * mu) < 1.0; }
  /// Throws NotASaddle or InvalidArgument.
  void validate() const;
};

/// One checked inequality lhs < rhs (or lhs <= rhs when not strict).
struct Inequality {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  bool strict = true;
  bool pass = false;

  double margin() const { return rhs - lhs; }
};

Inequality make_inequality(std::string label, double lhs, double rhs, bool strict = true);

/// Scales map i by exp(-(t_{i+1} - t_i) delta / 2), so the determinant of the
/// full product gains exactly exp(-duration * delta). Gaps above 1 are a
/// BadPartition.
NormalCocycle delta_damped_cocycle(const NormalCocycle& cocycle, double delta);

/// [[lambda, (mu - lambda)/gamma], [0, mu]] in the N^s + (N^s)^perp frame.
Mat2 saddle_matrix_form(const SaddleData& d);

/// [[1, 0], [gamma (lambda + mu)/(lambda - mu), 1]].
Mat2 shear_matrix(const SaddleData& d);

/// Bound (2/(1 - rate) + 1) gamma on ||shear - I||, valid when
/// |lambda - mu| > 1 - rate.
double shear_norm_bound(double gamma, double rate);

struct SinkReport {
  SaddleData input;
  Mat2 saddle = Mat2::Identity();
  Mat2 shear = Mat2::Identity();
  Mat2 product = Mat2::Identity();
  double trace = 0.0;
  double det = 0.0;
  std::complex<double> ev1;
  std::complex<double> ev2;
  double modulus = 0.0;
  double shear_deviation = 0.0;  // ||shear - I||
  bool sink = false;
};

/// shear * saddle: traceless with determinant lambda mu, hence eigenvalues
/// +-i sqrt(|lambda mu|). Throws NotDissipative when |lambda mu| >= 1.
SinkReport sink_via_shear(const SaddleData& d);

struct PerturbationBudget {
  double C = 1.0;
  double eps = 0.1;
  double lambda_rate = 0.5;
  double alpha = 1.0;
  double eps0 = 0.0;
  double eps1 = 0.0;
  long m = 0;
  double delta = 0.0;
  std::vector<Inequality> checks;

  bool valid() const;
  /// Recomputes every defining inequality from the stored numbers.
  std::vector<Inequality> verify() const;
};

PerturbationBudget choose_budget(double C, double eps, double lambda_rate, double alpha);

/// ((1 + alpha)/alpha) * coefficient; the coefficient itself as alpha -> inf.
double graph_norm_bound(double alpha, double coefficient);

/// Closed cocycle over 0, 1, ..., n, tau whose maps are diag(lambda, mu)
/// raised to gap/tau, with sign(lambda), sign(mu) carried by the last map.
NormalCocycle synthetic_saddle_cocycle(const SaddleData& d);

struct PerturbedCocycle {
  SaddleData input;
  PerturbationBudget budget;
  NormalCocycle base;
  NormalCocycle perturbed;
  Mat2 P = Mat2::Identity();
  Mat2 S = Mat2::Identity();
  std::vector<Mat2> T;               // T_0 .. T_G at the partition points
  std::vector<double> deviations;    // ||L_j - P_j||
  double s_coefficient = 0.0;
  double lambda_target = 0.0;        // (1 + eps1)^(-tau + 2m + 1) lambda
  std::complex<double> lambda_out;   // eigenvalues of the perturbed product
  std::complex<double> mu_out;
  double det_out = 0.0;
  std::vector<Inequality> checks;

  double max_deviation() const;
  bool valid() const;
};

/// Builds P, S, T_j and the composite maps
///   L_0 = T_1 P_0 P,  L_j = T_{j+1} P_j,  L_{G-1} = S T_0 T_G P_{G-1}
/// over a closed cocycle with unit gaps (last gap <= 1). T_j scales N^s by
/// (1 + eps1) for j <= m and by (1 + eps1)^(-gap before j) afterwards, so the
/// stable eigenvalue is multiplied by exactly (1 + eps1)^(-tau + 2m + 1).
/// `stable` and `unstable` are unit directions in the frame at index 0.
PerturbedCocycle graph_perturbation_family(const SaddleData& d, const PerturbationBudget& budget,
                                           const NormalCocycle& cocycle, const Vec2& stable,
                                           const Vec2& unstable);
/// Same on synthetic_saddle_cocycle(d) with the coordinate axes.
PerturbedCocycle graph_perturbation_family(const SaddleData& d, const PerturbationBudget& budget);

/// 2 / (eps1 (1 + eps1)^m - 4). Throws DenominatorNonpositive.
double angle_collapse_bound(double eps1, long m);

struct NonDominationWitness {
  bool witness = false;  // product >= 1/2 at every sampled t in (0, T]
  std::vector<double> times;
  std::vector<double> products;
  double first_failure = -1.0;
};

/// ||P_t|E_0|| ||P_{-t}|F_t|| at partition times 0 < t <= T from index 0.
NonDominationWitness non_domination_witness(const NormalCocycle& cocycle,
                                            const std::vector<DirectionPair>& directions, double T);

/// Smallest k with rate^(k tau) < 1/2.
long escape_multiple(double rate, double tau);

/// Time averages of log|det DX_t| and log|det P_t| and their difference, which
/// is the log ratio of flow speeds divided by t.
struct DeterminantDiscrepancy {
  double t = 0.0;
  double mean_log_det_flow = 0.0;
  double mean_log_det_normal = 0.0;
  double difference = 0.0;
};

DeterminantDiscrepancy determinant_discrepancy(const VectorFieldSpec& spec, const Vec3& x, double t,
                                               double tol = 1e-10);

}  // namespace lpflow
