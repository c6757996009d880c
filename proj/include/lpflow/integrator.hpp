#pragma once

// Embedded Dormand-Prince 5(4) stepper with cubic Hermite dense output.
//
// The stepper is templated on the state dimension so the augmented
// variational systems (position, fundamental matrix, log-determinant and
// transported frame) share a single error controller.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "lpflow/error.hpp"

namespace lpflow::ode {

struct StepControl {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_max = 0.25;
  std::size_t max_steps = 20'000'000;
};

struct IntegrationStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double max_error = 0.0;  // largest accepted scaled error estimate
};

/// One accepted step, with enough data for cubic Hermite interpolation.
template <int N>
struct StepRecord {
  using State = Eigen::Matrix<double, N, 1>;
  double t0 = 0.0;
  double t1 = 0.0;
  State y0, y1, f0, f1;

  State hermite(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1;
  }
};

namespace dp {
// Butcher tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// Fifth minus fourth order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

template <int N, class Rhs>
class DormandPrince {
 public:
  using State = Eigen::Matrix<double, N, 1>;
  using Record = StepRecord<N>;

  DormandPrince(Rhs rhs, double t, const State& y, StepControl control = {})
      : rhs_(std::move(rhs)), control_(control), t_(t), y_(y) {
    f_ = rhs_(t_, y_);
  }

  double time() const { return t_; }
  const State& state() const { return y_; }
  const State& derivative() const { return f_; }
  const IntegrationStats& stats() const { return stats_; }

  /// Fifth-order step of size h from (t0, y0) with known slope f0, no error
  /// control. Used to polish event locations inside an accepted step.
  State single_step(double t0, const State& y0, const State& f0, double h) const {
    State err;
    return stage_step(t0, y0, f0, h, err, nullptr);
  }

  /// Advances exactly to t_target. The observer sees every accepted step and
  /// may return false to stop early; advance then returns false.
  template <class Observer>
  bool advance(double t_target, Observer&& observer) {
    const double span = t_target - t_;
    if (span == 0.0) return true;
    const double dir = span > 0 ? 1.0 : -1.0;
    if (h_want_ <= 0.0) h_want_ = initial_step(dir, std::abs(span));

    while (dir * (t_target - t_) > 0) {
      if (stats_.steps + stats_.rejected >= control_.max_steps) {
        throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted at t=" + std::to_string(t_));
      }
      const double remaining = std::abs(t_target - t_);
      double h = std::min({h_want_, control_.h_max, remaining});
      bool clipped = false;
      if (remaining <= 1.01 * h) {
        h = remaining;
        clipped = true;
      }
      const double floor = 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_));
      if (h < floor) {
        throw Error(ErrorCode::StepSizeUnderflow, "step size underflow at t=" + std::to_string(t_));
      }

      State err;
      State f_new;
      const double hs = dir * h;
      State y_new = stage_step(t_, y_, f_, hs, err, &f_new);
      const double e = error_norm(err, y_, y_new);

      if (!(e <= 1.0)) {
        ++stats_.rejected;
        const double fac = std::isfinite(e) ? std::max(0.2, 0.9 * std::pow(e, -0.2)) : 0.2;
        h_want_ = h * fac;
        continue;
      }

      ++stats_.steps;
      stats_.max_error = std::max(stats_.max_error, e);
      Record rec{t_, clipped ? t_target : t_ + hs, y_, y_new, f_, f_new};
      t_ = rec.t1;
      y_ = y_new;
      f_ = f_new;

      const double fac = e > 0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(e, -0.2))) : 5.0;
      const double proposal = h * fac;
      h_want_ = clipped ? std::max(h_want_, proposal) : proposal;

      if (!observer(static_cast<const Record&>(rec))) return false;
    }
    return true;
  }

  bool advance(double t_target) {
    return advance(t_target, [](const Record&) { return true; });
  }

 private:
  State stage_step(double t, const State& y, const State& f1, double h, State& err,
                   State* f_end) const {
    using namespace dp;
    const State k1 = f1;
    const State k2 = rhs_(t + c2 * h, y + h * (a21 * k1));
    const State k3 = rhs_(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const State k4 = rhs_(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = rhs_(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 =
        rhs_(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    State y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = rhs_(t + h, y_new);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    if (f_end) *f_end = k7;
    return y_new;
  }

  double error_norm(const State& err, const State& y0, const State& y1) const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
      const double scale =
          control_.atol + control_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      const double r = std::abs(err[i]) / scale;
      if (!(r <= worst)) worst = r;  // propagates NaN
    }
    return worst;
  }

  double scaled_norm(const State& v, const State& y) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double scale = control_.atol + control_.rtol * std::abs(y[i]);
      acc = std::max(acc, std::abs(v[i]) / scale);
    }
    return acc;
  }

  // Hairer-Norsett-Wanner starting step heuristic.
  double initial_step(double dir, double span) const {
    const double d0 = scaled_norm(y_, y_);
    const double d1 = scaled_norm(f_, y_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min({h0, span, control_.h_max});
    const State y1 = y_ + dir * h0 * f_;
    const State f1 = rhs_(t_ + dir * h0, y1);
    const double d2 = scaled_norm(f1 - f_, y_) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100 * h0, h1, span, control_.h_max});
  }

  Rhs rhs_;
  StepControl control_;
  double t_;
  State y_;
  State f_;
  double h_want_ = 0.0;
  IntegrationStats stats_;
};

template <int N, class Rhs>
auto make_stepper(Rhs rhs, double t, const Eigen::Matrix<double, N, 1>& y, StepControl control = {}) {
  return DormandPrince<N, Rhs>(std::move(rhs), t, y, control);
}

}  // namespace lpflow::ode
