#include "hypelift/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hypelift::geo {

namespace {

void check_dims(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw DimensionError("dimension mismatch: " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

void check_curvature(const Curvature& a, const Curvature& b) {
  if (!(a == b)) throw ConfigError("curvature mismatch between operands");
}

// sinh(u) / u
double sinhc(double u) {
  if (std::abs(u) < 1e-4) return 1.0 + u * u / 6.0;
  return std::sinh(u) / u;
}

// asinh(v) / v
double asinhc(double v) {
  if (std::abs(v) < 1e-4) return 1.0 - v * v / 6.0;
  return std::asinh(v) / v;
}

// (u cosh u - sinh u) / u^3, i.e. (d/du sinhc(u)) / u
double sinhc_slope(double u) {
  if (std::abs(u) < 1e-2) {
    const double u2 = u * u;
    return 1.0 / 3.0 + u2 / 30.0 + u2 * u2 / 840.0;
  }
  return (u * std::cosh(u) - std::sinh(u)) / (u * u * u);
}

// (v / sqrt(1 + v^2) - asinh v) / v^3, i.e. (d/dv asinhc(v)) / v
double asinhc_slope(double v) {
  if (std::abs(v) < 1e-2) {
    const double v2 = v * v;
    return -1.0 / 3.0 + 0.3 * v2 - 15.0 / 56.0 * v2 * v2;
  }
  return (v / std::sqrt(1.0 + v * v) - std::asinh(v)) / (v * v * v);
}

// acosh(1 + w) / sqrt(w (w + 2)), the log-map scale; tends to 1 as w -> 0.
double acosh_ratio(double w) {
  if (w < 1e-8) return 1.0 - w / 3.0;
  return std::acosh(1.0 + w) / std::sqrt(w * (w + 2.0));
}

// Quantities shared by the distance and angle formulas. w = -c<x,y> - 1 is
// computed from the squared Minkowski norm of x - y so that it keeps full
// relative precision for nearby points.
struct PairTerms {
  Vec ds;        // x_s - y_s
  double dt;     // x_t - y_t
  double m2;     // <x - y, x - y>_L  (>= 0 on the sheet)
  double w;      // c m2 / 2 = u - 1
};

PairTerms pair_terms(const HyperPoint& x, const HyperPoint& y) {
  check_dims(x.dim(), y.dim());
  check_curvature(x.curvature, y.curvature);
  PairTerms p;
  p.ds = x.spatial - y.spatial;
  p.dt = p.ds.dot(x.spatial + y.spatial) / (x.time + y.time);
  p.m2 = std::max(0.0, p.ds.squaredNorm() - p.dt * p.dt);
  p.w = 0.5 * x.curvature.value() * p.m2;
  return p;
}

// d u / d x_s and d u / d y_s with u = -c <x, y>.
std::pair<Vec, Vec> du_terms(const HyperPoint& x, const HyperPoint& y, const PairTerms& p) {
  const double c = x.curvature.value();
  Vec dx = c * (p.ds - p.dt * x.spatial / x.time);
  Vec dy = c * (-p.ds + p.dt * y.spatial / y.time);
  return {std::move(dx), std::move(dy)};
}

}  // namespace

Curvature::Curvature(double c) : c_(c), sqrt_c_(std::sqrt(c)) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConfigError("curvature magnitude must be positive and finite");
  }
}

HyperPoint HyperPoint::from_spatial(Vec spatial, Curvature k) {
  HyperPoint p;
  p.time = std::sqrt(1.0 / k.value() + spatial.squaredNorm());
  p.spatial = std::move(spatial);
  p.curvature = k;
  return p;
}

HyperPoint HyperPoint::origin(Eigen::Index dim, Curvature k) {
  return from_spatial(Vec::Zero(dim), k);
}

TangentVector TangentVector::zero(Eigen::Index dim, Curvature k) {
  return TangentVector{Vec::Zero(dim), k};
}

void GeometryConfig::validate() const {
  if (!(boundary_radius > 0.0) || !std::isfinite(boundary_radius)) {
    throw ConfigError("boundary_radius must be positive");
  }
  if (!(arccos_clamp_eps > 0.0 && arccos_clamp_eps < 1e-3)) {
    throw ConfigError("arccos_clamp_eps must lie in (0, 1e-3)");
  }
  if (!(entailment_aperture > 0.0)) {
    throw ConfigError("entailment_aperture must be positive");
  }
}

double lorentz_inner(const HyperPoint& x, const HyperPoint& y) {
  check_dims(x.dim(), y.dim());
  check_curvature(x.curvature, y.curvature);
  return x.spatial.dot(y.spatial) - x.time * y.time;
}

double lorentz_inner(const HyperPoint& x, const TangentVector& z) {
  check_dims(x.dim(), z.dim());
  check_curvature(x.curvature, z.curvature);
  return x.spatial.dot(z.spatial);
}

double lorentz_inner(const TangentVector& x, const TangentVector& y) {
  check_dims(x.dim(), y.dim());
  check_curvature(x.curvature, y.curvature);
  return x.spatial.dot(y.spatial);
}

double lorentz_inner(const MinkowskiVector& x, const MinkowskiVector& y) {
  check_dims(x.spatial.size(), y.spatial.size());
  return x.spatial.dot(y.spatial) - x.time * y.time;
}

double geodesic_distance(const HyperPoint& x, const HyperPoint& y) {
  const PairTerms p = pair_terms(x, y);
  const double k = x.curvature.sqrt_c();
  return 2.0 / k * std::asinh(0.5 * k * std::sqrt(p.m2));
}

double distance_to_origin(const HyperPoint& x) {
  const double k = x.curvature.sqrt_c();
  return std::asinh(k * x.spatial.norm()) / k;
}

TangentVector clamp_to_orbit(const TangentVector& z, const GeometryConfig& cfg) {
  const double r = z.norm();
  if (r <= cfg.boundary_radius) return z;
  return TangentVector{z.spatial * (cfg.boundary_radius / r), z.curvature};
}

HyperPoint exp_map_origin(const TangentVector& z) {
  const double k = z.curvature.sqrt_c();
  const double r = z.norm();
  return HyperPoint::from_spatial(sinhc(k * r) * z.spatial, z.curvature);
}

TangentVector log_map_origin(const HyperPoint& y) {
  if (distance_to_origin(y) < 1e-9) return TangentVector::zero(y.dim(), y.curvature);
  const double k = y.curvature.sqrt_c();
  return TangentVector{asinhc(k * y.spatial.norm()) * y.spatial, y.curvature};
}

MinkowskiVector log_map(const HyperPoint& x, const HyperPoint& y) {
  const PairTerms p = pair_terms(x, y);
  MinkowskiVector out{Vec::Zero(x.dim()), 0.0};
  if (p.w <= 0.0) return out;
  const double u = 1.0 + p.w;
  const double scale = acosh_ratio(p.w);
  // log_x(y) = acosh(u) / sqrt(u^2 - 1) * (y + c x <x, y>) and c<x, y> = -u.
  out.spatial = scale * (y.spatial - u * x.spatial);
  out.time = scale * (y.time - u * x.time);
  return out;
}

HyperPoint geodesic_point(const HyperPoint& x, const MinkowskiVector& z, double t) {
  check_dims(x.dim(), z.spatial.size());
  if (t == 0.0) return x;
  // |z|_L^2 = |z_s|^2 - z_t^2 cancels badly far from O. For z tangent at x,
  // z_t = <x_s, z_s> / x_t, which gives the cancellation-free
  //   |z|_L^2 = (|z_s|^2 / c + |x_s|^2 |z_perp|^2) / x_t^2
  // with z_perp the part of z_s orthogonal to x_s.
  const double xs2 = x.spatial.squaredNorm();
  double perp2 = z.spatial.squaredNorm();
  if (xs2 > 0.0) perp2 = (z.spatial - (x.spatial.dot(z.spatial) / xs2) * x.spatial).squaredNorm();
  const double c = x.curvature.value();
  const double nz = std::sqrt((z.spatial.squaredNorm() / c + xs2 * perp2) / (x.time * x.time));
  if (nz == 0.0) return x;
  const double k = x.curvature.sqrt_c();
  const double a = t * k * nz;
  Vec s = std::cosh(a) * x.spatial + (std::sinh(a) / (k * nz)) * z.spatial;
  return HyperPoint::from_spatial(std::move(s), x.curvature);
}

HyperPoint geodesic_point(const TangentVector& z, double t) {
  return geodesic_point(HyperPoint::origin(z.dim(), z.curvature),
                        MinkowskiVector{z.spatial, 0.0}, t);
}

HyperPoint extrapolate_to_boundary(const HyperPoint& h, const GeometryConfig& cfg) {
  const double n = h.spatial.norm();
  if (distance_to_origin(h) < 1e-12) {
    throw DegenerateDirectionError("cannot extrapolate the origin: direction undefined");
  }
  return exp_map_origin(TangentVector{h.spatial * (cfg.boundary_radius / n), h.curvature});
}

namespace {

struct AngleTerms {
  double q_raw;  // unclamped arccos argument
  double q;      // clamped
  bool clamped;
  double xn, u, S, N, Dn;
  PairTerms p;
};

AngleTerms angle_terms(const HyperPoint& x, const HyperPoint& y, const GeometryConfig& cfg) {
  AngleTerms a;
  a.p = pair_terms(x, y);
  a.xn = x.spatial.norm();
  if (distance_to_origin(x) < 1e-12) {
    throw DegenerateAngleError("exterior angle undefined: parent at the origin");
  }
  if (std::sqrt(a.p.m2) < 1e-12) {
    throw DegenerateAngleError("exterior angle undefined: parent equals child");
  }
  a.u = 1.0 + a.p.w;
  a.S = std::sqrt(a.p.w * (a.p.w + 2.0));
  a.N = y.time - x.time * a.u;
  a.Dn = a.xn * a.S;
  a.q_raw = a.N / a.Dn;
  const double lo = -1.0 + cfg.arccos_clamp_eps;
  const double hi = 1.0 - cfg.arccos_clamp_eps;
  a.q = std::clamp(a.q_raw, lo, hi);
  a.clamped = a.q != a.q_raw || !(a.q_raw > lo && a.q_raw < hi);
  return a;
}

}  // namespace

double exterior_angle(const HyperPoint& parent, const HyperPoint& child,
                      const GeometryConfig& cfg) {
  return std::acos(angle_terms(parent, child, cfg).q);
}

double entailment_aperture(const HyperPoint& parent, const GeometryConfig& cfg) {
  const double n = parent.spatial.norm();
  if (distance_to_origin(parent) < 1e-12) {
    throw DegenerateAngleError("entailment cone undefined at the origin");
  }
  const double s = 2.0 * cfg.entailment_aperture / (parent.curvature.sqrt_c() * n);
  return std::asin(std::min(1.0, s));
}

double entailment_score(const HyperPoint& parent, const HyperPoint& child,
                        const GeometryConfig& cfg) {
  const double aperture = entailment_aperture(parent, cfg);
  return std::max(0.0, exterior_angle(parent, child, cfg) - aperture);
}

PairGrad geodesic_distance_grad(const HyperPoint& x, const HyperPoint& y) {
  const PairTerms p = pair_terms(x, y);
  const double k = x.curvature.sqrt_c();
  PairGrad g;
  g.value = 2.0 / k * std::asinh(0.5 * k * std::sqrt(p.m2));
  const double S = std::sqrt(p.w * (p.w + 2.0));
  if (S == 0.0) {
    g.d_first = Vec::Zero(x.dim());
    g.d_second = Vec::Zero(y.dim());
    return g;
  }
  auto [dux, duy] = du_terms(x, y, p);
  const double dd_du = 1.0 / (k * S);
  g.d_first = dd_du * dux;
  g.d_second = dd_du * duy;
  return g;
}

PairGrad squared_distance_grad(const HyperPoint& x, const HyperPoint& y) {
  const PairTerms p = pair_terms(x, y);
  const double k = x.curvature.sqrt_c();
  const double d = 2.0 / k * std::asinh(0.5 * k * std::sqrt(p.m2));
  PairGrad g;
  g.value = d * d;
  auto [dux, duy] = du_terms(x, y, p);
  // d(d^2)/du = 2 d / (k S) = (2 / c) * acosh(u) / sqrt(u^2 - 1)
  const double scale = 2.0 / x.curvature.value() * acosh_ratio(p.w);
  g.d_first = scale * dux;
  g.d_second = scale * duy;
  return g;
}

PairGrad exterior_angle_grad(const HyperPoint& parent, const HyperPoint& child,
                             const GeometryConfig& cfg) {
  const AngleTerms a = angle_terms(parent, child, cfg);
  PairGrad g;
  g.value = std::acos(a.q);
  if (a.clamped) {
    g.d_first = Vec::Zero(parent.dim());
    g.d_second = Vec::Zero(child.dim());
    return g;
  }
  const Vec& xs = parent.spatial;
  const Vec& ys = child.spatial;
  auto [dux, duy] = du_terms(parent, child, a.p);

  const Vec dN_x = -(a.u / parent.time) * xs - parent.time * dux;
  const Vec dN_y = ys / child.time - parent.time * duy;
  const double dS_du = a.u / a.S;
  const Vec dDn_x = (a.S / a.xn) * xs + a.xn * dS_du * dux;
  const Vec dDn_y = a.xn * dS_du * duy;

  const double dalpha_dq = -1.0 / std::sqrt(1.0 - a.q * a.q);
  g.d_first = dalpha_dq * (dN_x - a.q * dDn_x) / a.Dn;
  g.d_second = dalpha_dq * (dN_y - a.q * dDn_y) / a.Dn;
  return g;
}

Vec exp_map_origin_vjp(const TangentVector& z, const Vec& grad_spatial) {
  const double k = z.curvature.sqrt_c();
  const double r = z.norm();
  const double A = sinhc(k * r);
  const double slope = k * k * sinhc_slope(k * r);
  return A * grad_spatial + (slope * z.spatial.dot(grad_spatial)) * z.spatial;
}

Vec log_map_origin_vjp(const HyperPoint& y, const Vec& grad_tangent) {
  const double k = y.curvature.sqrt_c();
  const double rho = y.spatial.norm();
  const double B = asinhc(k * rho);
  const double slope = k * k * asinhc_slope(k * rho);
  return B * grad_tangent + (slope * y.spatial.dot(grad_tangent)) * y.spatial;
}

Vec clamp_to_orbit_vjp(const TangentVector& z, const GeometryConfig& cfg, const Vec& grad_out) {
  const double r = z.norm();
  if (r <= cfg.boundary_radius) return grad_out;
  const Vec unit = z.spatial / r;
  return (cfg.boundary_radius / r) * (grad_out - unit * unit.dot(grad_out));
}

}  // namespace hypelift::geo
