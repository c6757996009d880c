#include "lpflow/linpoincare.hpp"

#include <cmath>
#include <random>

#include "lpflow/error.hpp"

namespace lpflow {

NormalFrame frame_from_seed(const Vec3& base, const Vec3& field, const Vec3& seed) {
  const double speed = field.norm();
  if (!(speed >= kSingularityFloor)) {
    throw Error(ErrorCode::SingularityDetected, "normal frame requested at a zero of the field");
  }
  NormalFrame f;
  f.base = base;
  f.direction = field / speed;
  Vec3 e1 = seed - f.direction * f.direction.dot(seed);
  if (e1.norm() < 1e-8) e1 = f.direction.unitOrthogonal();
  f.e1 = e1.normalized();
  f.e2 = f.direction.cross(f.e1);
  return f;
}

NormalFrame normal_frame(const VectorFieldSpec& spec, const Vec3& x) {
  const Vec3 v = evaluate_field(spec, x);
  const Vec3 a = v.cwiseAbs();
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (a[i] < a[axis]) axis = i;
  }
  return frame_from_seed(x, v, Vec3::Unit(axis));
}

Vec2 project_normal(const NormalFrame& frame, const Vec3& v) {
  return Vec2(frame.e1.dot(v), frame.e2.dot(v));
}

double spectral_norm(const Mat2& m) {
  const double fro2 = m.squaredNorm();
  const double det = m.determinant();
  const double disc = std::max(0.0, fro2 * fro2 - 4 * det * det);
  return std::sqrt(0.5 * (fro2 + std::sqrt(disc)));
}

namespace {

struct GapResult {
  Vec3 x;
  Mat3 phi;
  double log_det;
  Vec3 e1;
};

// Integrates position, tangent, log-det and frame over [0, dt] from x with
// the tangent reset to the identity.
template <class Observer>
GapResult propagate(const VectorFieldSpec& spec, const Vec3& x, const Vec3& e1, double dt,
                    double tol, Observer&& observer) {
  detail::Augmented a{x, Mat3::Identity(), 0.0, e1};
  auto stepper = ode::make_stepper<16>(detail::TangentRhs{&spec}, 0.0, detail::pack(a),
                                       detail::control_for(tol));
  stepper.advance(dt, [&](const ode::StepRecord<16>& rec) {
    detail::check_in_domain(spec, rec.y1.segment<3>(0));
    return observer(rec);
  });
  const detail::Augmented end = detail::unpack(stepper.state());
  return {end.x, end.phi, end.log_det, end.e1};
}

GapResult propagate(const VectorFieldSpec& spec, const Vec3& x, const Vec3& e1, double dt,
                    double tol) {
  return propagate(spec, x, e1, dt, tol, [](const auto&) { return true; });
}

Mat2 frame_matrix(const NormalFrame& target, const Mat3& phi, const NormalFrame& source) {
  return target.basis().transpose() * phi * source.basis();
}

}  // namespace

LinearPoincare linear_poincare(const VectorFieldSpec& spec, const NormalFrame& source, double t,
                               double tol) {
  const GapResult g = propagate(spec, source.base, source.e1, t, tol);
  LinearPoincare out;
  out.source = source;
  out.target = frame_from_seed(g.x, spec.field(g.x), g.e1);
  out.matrix = frame_matrix(out.target, g.phi, source);
  out.elapsed = t;
  out.end = g.x;
  out.fundamental = g.phi;
  out.log_det = g.log_det;
  return out;
}

LinearPoincare linear_poincare(const VectorFieldSpec& spec, const Vec3& x, double t, double tol) {
  return linear_poincare(spec, normal_frame(spec, x), t, tol);
}

Mat2 NormalCocycle::product(std::size_t from, std::size_t count) const {
  Mat2 acc = Mat2::Identity();
  const std::size_t n = maps.size();
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = from + k;
    if (i >= n && !closed) {
      throw Error(ErrorCode::BadPartition, "product runs past the end of an open cocycle");
    }
    acc = maps[i % n] * acc;
  }
  return acc;
}

void NormalCocycle::validate() const {
  if (times.size() < 2 || frames.size() != times.size() || maps.size() + 1 != times.size()) {
    throw Error(ErrorCode::BadPartition, "cocycle needs n+1 times, n+1 frames and n maps");
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i + 1] > times[i])) {
      throw Error(ErrorCode::BadPartition, "partition times must be strictly increasing");
    }
  }
}

NormalCocycle cocycle_along(const VectorFieldSpec& spec, const Vec3& x,
                            const std::vector<double>& partition, double tol, double max_gap) {
  if (partition.size() < 2 || partition.front() != 0.0) {
    throw Error(ErrorCode::BadPartition, "partition must start at 0 and have at least two times");
  }
  for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
    const double gap = partition[i + 1] - partition[i];
    if (!(gap > 0)) throw Error(ErrorCode::BadPartition, "partition must be increasing");
    if (gap > max_gap) throw Error(ErrorCode::BadPartition, "partition gap exceeds the allowed maximum");
  }

  NormalCocycle c;
  c.times = partition;
  c.frames.push_back(normal_frame(spec, x));
  Vec3 pos = x;
  for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
    const NormalFrame& src = c.frames.back();
    const GapResult g = propagate(spec, pos, src.e1, partition[i + 1] - partition[i], tol);
    NormalFrame dst = frame_from_seed(g.x, spec.field(g.x), g.e1);
    c.maps.push_back(frame_matrix(dst, g.phi, src));
    c.frames.push_back(dst);
    pos = g.x;
  }
  return c;
}

NormalCocycle periodic_cocycle(const VectorFieldSpec& spec, const Vec3& p, double period,
                               double spacing, double tol) {
  if (!(period > 0 && spacing > 0)) {
    throw Error(ErrorCode::BadPartition, "period and spacing must be positive");
  }
  std::vector<double> partition{0.0};
  const auto n = static_cast<long>(std::ceil(period / spacing - 1e-9));
  for (long k = 1; k < n; ++k) partition.push_back(static_cast<double>(k) * period / static_cast<double>(n));
  partition.push_back(period);

  NormalCocycle c = cocycle_along(spec, p, partition, tol);
  // Identify the end frame with the start frame at the same base point.
  const NormalFrame& first = c.frames.front();
  const NormalFrame& last = c.frames.back();
  const Mat2 change = first.basis().transpose() * last.basis();
  c.maps.back() = change * c.maps.back();
  NormalFrame closing = first;
  closing.base = last.base;
  c.frames.back() = closing;
  c.closed = true;
  return c;
}

LinearPoincare monodromy(const VectorFieldSpec& spec, const Vec3& p, double period, double tol) {
  const NormalFrame frame = normal_frame(spec, p);
  const GapResult g = propagate(spec, p, frame.e1, period, tol);
  LinearPoincare out;
  out.source = frame;
  out.target = frame;
  out.target.base = g.x;
  out.matrix = frame_matrix(frame, g.phi, frame);
  out.elapsed = period;
  out.end = g.x;
  out.fundamental = g.phi;
  out.log_det = g.log_det;
  return out;
}

CocycleBound estimate_cocycle_bound(const VectorFieldSpec& spec, int probes, std::uint64_t seed,
                                    double tol, int time_samples) {
  if (probes <= 0 || time_samples <= 0) {
    throw Error(ErrorCode::InvalidArgument, "probe counts must be positive");
  }
  std::mt19937_64 rng(seed);
  CocycleBound bound;
  bound.probes = probes;
  bound.time_samples = time_samples;
  for (int i = 0; i < probes; ++i) {
    const Vec3 x = spec.domain.sample(rng);
    const NormalFrame src = normal_frame(spec, x);
    detail::Augmented a{x, Mat3::Identity(), 0.0, src.e1};
    auto stepper = ode::make_stepper<16>(detail::TangentRhs{&spec}, 0.0, detail::pack(a),
                                         detail::control_for(tol));
    try {
      for (int k = 1; k <= time_samples; ++k) {
        stepper.advance(static_cast<double>(k) / time_samples, [&](const ode::StepRecord<16>& rec) {
          detail::check_in_domain(spec, rec.y1.segment<3>(0));
          return true;
        });
        const detail::Augmented s = detail::unpack(stepper.state());
        const NormalFrame dst = frame_from_seed(s.x, spec.field(s.x), s.e1);
        bound.observed = std::max(bound.observed, spectral_norm(frame_matrix(dst, s.phi, src)));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfDomain) throw;
    }
  }
  bound.value = bound.observed * bound.inflation;
  return bound;
}

}  // namespace lpflow
