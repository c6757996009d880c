#include "lpflow/flowcore.hpp"

#include <cmath>
#include <sstream>

#include "lpflow/error.hpp"

namespace lpflow {

namespace {

Eigen::Matrix2i integer_inverse(const Eigen::Matrix2i& a) {
  const int det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  Eigen::Matrix2i inv;
  inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  return inv * det;  // det is +-1, so det == 1/det
}

double wrap_into(double v, double period) {
  double r = std::fmod(v, period);
  if (r < 0) r += period;
  if (r >= period) r -= period;
  return r;
}

double minimal_image(double d, double period) {
  return d - period * std::round(d / period);
}

std::string fmt_point(const Vec3& x) {
  std::ostringstream os;
  os << "(" << x.x() << ", " << x.y() << ", " << x.z() << ")";
  return os.str();
}

}  // namespace

DomainSpec DomainSpec::flat_torus(const Vec3& periods) {
  DomainSpec d;
  d.kind = Kind::FlatTorus;
  d.periods = periods;
  d.lo = Vec3::Zero();
  d.hi = periods;
  d.validate();
  d.sampling = Shape::whole(Vec3::Zero(), periods);
  return d;
}

DomainSpec DomainSpec::mapping_torus(const Eigen::Matrix2i& twist) {
  const int det = twist(0, 0) * twist(1, 1) - twist(0, 1) * twist(1, 0);
  if (std::abs(det) != 1) {
    throw Error(ErrorCode::InvalidArgument, "mapping-torus twist must be unimodular");
  }
  DomainSpec d = flat_torus(Vec3::Ones());
  d.twist = twist;
  return d;
}

DomainSpec DomainSpec::box(const Vec3& lo, const Vec3& hi) {
  return box(lo, hi, Shape::box(lo, hi));
}

DomainSpec DomainSpec::box(const Vec3& lo, const Vec3& hi, const Shape& trapping) {
  DomainSpec d;
  d.kind = Kind::Box;
  d.lo = lo;
  d.hi = hi;
  d.sampling = trapping;
  d.validate();
  return d;
}

void DomainSpec::validate() const {
  if (kind == Kind::FlatTorus) {
    if (!(periods.minCoeff() > 0)) {
      throw Error(ErrorCode::InvalidArgument, "torus periods must be strictly positive");
    }
  } else if (!((hi - lo).minCoeff() > 0)) {
    throw Error(ErrorCode::InvalidArgument, "box bounds must have positive volume");
  }
}

bool DomainSpec::contains(const Vec3& x) const {
  if (kind == Kind::FlatTorus) return x.allFinite();
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Vec3 DomainSpec::reduce(const Vec3& x) const {
  if (kind != Kind::FlatTorus) return x;
  Vec3 r = x;
  if (twisted()) {
    long k = static_cast<long>(std::floor(r.z() / periods.z()));
    r.z() -= static_cast<double>(k) * periods.z();
    const Eigen::Matrix2i step = k >= 0 ? twist : integer_inverse(twist);
    Eigen::Vector2d w(wrap_into(r.x(), periods.x()), wrap_into(r.y(), periods.y()));
    // One application at a time keeps coordinates bounded.
    for (long i = 0; i < std::labs(k); ++i) {
      w = step.cast<double>() * w;
      w.x() = wrap_into(w.x(), periods.x());
      w.y() = wrap_into(w.y(), periods.y());
    }
    r.x() = w.x();
    r.y() = w.y();
  }
  for (int i = 0; i < 3; ++i) r[i] = wrap_into(r[i], periods[i]);
  return r;
}

Vec3 DomainSpec::displacement(const Vec3& a, const Vec3& b) const {
  Vec3 d = b - a;
  if (kind == Kind::FlatTorus) {
    for (int i = 0; i < 3; ++i) d[i] = minimal_image(d[i], periods[i]);
  }
  return d;
}

namespace detail {

void check_in_domain(const VectorFieldSpec& spec, const Vec3& x) {
  if (!x.allFinite() || !spec.domain.contains(x)) {
    throw Error(ErrorCode::OutOfDomain, "point " + fmt_point(x) + " is outside the domain");
  }
}

AugState pack(const Augmented& a) {
  AugState s;
  s.segment<3>(0) = a.x;
  s.segment<9>(3) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(a.phi.data());
  s[12] = a.log_det;
  s.segment<3>(13) = a.e1;
  return s;
}

Augmented unpack(const AugState& s) {
  Augmented a;
  a.x = s.segment<3>(0);
  a.phi = Eigen::Map<const Mat3>(s.data() + 3);
  a.log_det = s[12];
  a.e1 = s.segment<3>(13);
  return a;
}

ode::StepControl control_for(double tol) {
  if (!(tol > 0 && tol <= 1e-3)) {
    throw Error(ErrorCode::InvalidArgument, "tolerance must lie in (0, 1e-3]");
  }
  ode::StepControl c;
  c.rtol = tol;
  c.atol = tol * 1e-3;
  return c;
}

Vec3 PositionRhs::operator()(double, const Vec3& x) const {
  const Vec3 v = spec->field(x);
  if (!(v.norm() >= kSingularityFloor)) {
    throw Error(ErrorCode::SingularityDetected, "field vanishes near " + fmt_point(x));
  }
  return v;
}

Eigen::Vector4d LogDetRhs::operator()(double, const Eigen::Vector4d& s) const {
  const Vec3 x = s.head<3>();
  const Vec3 v = spec->field(x);
  if (!(v.norm() >= kSingularityFloor)) {
    throw Error(ErrorCode::SingularityDetected, "field vanishes near " + fmt_point(x));
  }
  Eigen::Vector4d out;
  out.head<3>() = v;
  out[3] = spec->divergence ? spec->divergence(x) : evaluate_jacobian(*spec, x).trace();
  return out;
}

AugState TangentRhs::operator()(double, const AugState& s) const {
  const Vec3 x = s.segment<3>(0);
  const Vec3 v = spec->field(x);
  const double speed = v.norm();
  if (!(speed >= kSingularityFloor)) {
    throw Error(ErrorCode::SingularityDetected, "field vanishes near " + fmt_point(x));
  }
  const Mat3 jac = evaluate_jacobian(*spec, x);
  const Eigen::Map<const Mat3> phi(s.data() + 3);
  const Vec3 e1 = s.segment<3>(13);

  const Vec3 d = v / speed;
  const Vec3 jv = jac * v;
  const Vec3 d_dot = (jv - d * d.dot(jv)) / speed;

  AugState out;
  out.segment<3>(0) = v;
  const Mat3 phi_dot = jac * phi;
  out.segment<9>(3) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(phi_dot.data());
  out[12] = spec->divergence ? spec->divergence(x) : jac.trace();
  out.segment<3>(13) = -e1.dot(d_dot) * d;
  return out;
}

}  // namespace detail

Vec3 evaluate_field(const VectorFieldSpec& spec, const Vec3& x) {
  detail::check_in_domain(spec, x);
  const Vec3 v = spec.field(x);
  if (!(v.norm() >= kSingularityFloor)) {
    throw Error(ErrorCode::SingularityDetected, "field vanishes at " + fmt_point(x));
  }
  return v;
}

Mat3 evaluate_jacobian(const VectorFieldSpec& spec, const Vec3& x) {
  if (spec.jacobian) return spec.jacobian(x);
  const double h = 1e-5 * (1.0 + x.norm());
  Mat3 jac;
  for (int j = 0; j < 3; ++j) {
    Vec3 xp = x;
    Vec3 xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (spec.field(xp) - spec.field(xm)) / (2 * h);
  }
  return jac;
}

double divergence(const VectorFieldSpec& spec, const Vec3& x) {
  detail::check_in_domain(spec, x);
  if (spec.divergence) return spec.divergence(x);
  return evaluate_jacobian(spec, x).trace();
}

TrajectorySegment flow(const VectorFieldSpec& spec, const Vec3& x, double t,
                       const FlowOptions& opts) {
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "flow time must be finite");
  evaluate_field(spec, x);

  TrajectorySegment seg;
  seg.start = x;
  seg.elapsed = t;
  seg.times.push_back(0.0);
  seg.points.push_back(spec.domain.reduce(x));

  auto stepper = ode::make_stepper<3>(detail::PositionRhs{&spec}, 0.0, x, detail::control_for(opts.tol));
  auto guard = [&](const ode::StepRecord<3>& rec) {
    detail::check_in_domain(spec, rec.y1);
    if (opts.sample_dt <= 0) {
      seg.times.push_back(rec.t1);
      seg.points.push_back(spec.domain.reduce(rec.y1));
    }
    return true;
  };

  if (opts.sample_dt > 0 && t != 0.0) {
    const double dir = t > 0 ? 1.0 : -1.0;
    const auto n = static_cast<long>(std::floor(std::abs(t) / opts.sample_dt + 1e-12));
    for (long k = 1; k <= n; ++k) {
      const double tk = dir * static_cast<double>(k) * opts.sample_dt;
      stepper.advance(tk, guard);
      seg.times.push_back(tk);
      seg.points.push_back(spec.domain.reduce(stepper.state()));
    }
    if (std::abs(seg.times.back()) < std::abs(t)) {
      stepper.advance(t, guard);
      seg.times.push_back(t);
      seg.points.push_back(spec.domain.reduce(stepper.state()));
    }
  } else {
    stepper.advance(t, guard);
  }
  seg.end = spec.domain.reduce(stepper.state());
  seg.stats = stepper.stats();
  return seg;
}

std::pair<TrajectorySegment, TangentState> flow_with_tangent(const VectorFieldSpec& spec,
                                                             const Vec3& x, double t,
                                                             const FlowOptions& opts) {
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "flow time must be finite");
  const Vec3 v0 = evaluate_field(spec, x);

  detail::Augmented a{x, Mat3::Identity(), 0.0, Vec3::Zero()};
  // Any unit vector normal to the flow; unused by callers of this function.
  a.e1 = v0.unitOrthogonal();

  TrajectorySegment seg;
  seg.start = x;
  seg.elapsed = t;
  seg.times.push_back(0.0);
  seg.points.push_back(spec.domain.reduce(x));

  auto stepper = ode::make_stepper<16>(detail::TangentRhs{&spec}, 0.0, detail::pack(a),
                                       detail::control_for(opts.tol));
  auto guard = [&](const ode::StepRecord<16>& rec) {
    const Vec3 y = rec.y1.segment<3>(0);
    detail::check_in_domain(spec, y);
    if (opts.sample_dt <= 0) {
      seg.times.push_back(rec.t1);
      seg.points.push_back(spec.domain.reduce(y));
    }
    return true;
  };
  if (opts.sample_dt > 0 && t != 0.0) {
    const double dir = t > 0 ? 1.0 : -1.0;
    const auto n = static_cast<long>(std::floor(std::abs(t) / opts.sample_dt + 1e-12));
    for (long k = 1; k <= n; ++k) {
      const double tk = dir * static_cast<double>(k) * opts.sample_dt;
      stepper.advance(tk, guard);
      seg.times.push_back(tk);
      seg.points.push_back(spec.domain.reduce(stepper.state().segment<3>(0)));
    }
    if (std::abs(seg.times.back()) < std::abs(t)) {
      stepper.advance(t, guard);
      seg.times.push_back(t);
      seg.points.push_back(spec.domain.reduce(stepper.state().segment<3>(0)));
    }
  } else {
    stepper.advance(t, guard);
  }

  const detail::Augmented end = detail::unpack(stepper.state());
  seg.end = spec.domain.reduce(end.x);
  seg.stats = stepper.stats();

  TangentState tan;
  tan.base = x;
  tan.elapsed = t;
  tan.fundamental = end.phi;
  tan.log_det = end.log_det;
  return {std::move(seg), tan};
}

double liouville_logdet(const VectorFieldSpec& spec, const Vec3& x, double t, double tol) {
  evaluate_field(spec, x);
  Eigen::Vector4d s;
  s << x, 0.0;
  auto stepper = ode::make_stepper<4>(detail::LogDetRhs{&spec}, 0.0, s, detail::control_for(tol));
  stepper.advance(t, [&](const ode::StepRecord<4>& rec) {
    detail::check_in_domain(spec, rec.y1.head<3>());
    return true;
  });
  return stepper.state()[3];
}

double for_each_sample(const VectorFieldSpec& spec, const Vec3& x, double horizon, double dt,
                       double tol, const std::function<bool(double, const Vec3&)>& visit) {
  if (!(dt > 0)) throw Error(ErrorCode::InvalidArgument, "sample spacing must be positive");
  evaluate_field(spec, x);
  if (!visit(0.0, spec.domain.reduce(x))) return 0.0;
  auto stepper = ode::make_stepper<3>(detail::PositionRhs{&spec}, 0.0, x, detail::control_for(tol));
  auto guard = [&](const ode::StepRecord<3>& rec) {
    detail::check_in_domain(spec, rec.y1);
    return true;
  };
  const auto n = static_cast<long>(std::floor(horizon / dt + 1e-12));
  for (long k = 1; k <= n; ++k) {
    const double tk = static_cast<double>(k) * dt;
    stepper.advance(tk, guard);
    if (!visit(tk, spec.domain.reduce(stepper.state()))) return tk;
  }
  return stepper.time();
}

void validate_field(const VectorFieldSpec& spec, int probes, std::uint64_t seed) {
  if (!spec.field) throw Error(ErrorCode::InvalidArgument, "vector field is missing");
  spec.domain.validate();
  std::mt19937_64 rng(seed);
  for (int i = 0; i < probes; ++i) {
    const Vec3 x = spec.domain.sample(rng);
    evaluate_field(spec, x);
    if (spec.jacobian && spec.divergence) {
      const double tr = spec.jacobian(x).trace();
      const double dv = spec.divergence(x);
      if (std::abs(tr - dv) > 1e-6 * (1.0 + std::abs(dv))) {
        throw Error(ErrorCode::InvalidArgument,
                    "jacobian trace disagrees with divergence at " + fmt_point(x));
      }
    }
  }
}

}  // namespace lpflow
