#pragma once

// Lorentz-model primitives. Points live on the upper sheet
//   { x : <x, x>_L = -1/c, time > 0 }
// with the time coordinate stored last, so the origin is O = [0, sqrt(1/c)].
// Only the tangent space at O is used for learning; a TangentVector is the
// spatial part of a Minkowski vector whose time component is zero.
//
// Everything is double precision: near the boundary orbit cosh/sinh grow
// past what float can resolve.

#include <Eigen/Dense>

#include "hypelift/errors.hpp"

namespace hypelift::geo {

using Vec = Eigen::VectorXd;

/// Magnitude c > 0 of the (negative) curvature -c.
class Curvature {
 public:
  Curvature() = default;
  explicit Curvature(double c);
  double value() const { return c_; }
  double sqrt_c() const { return sqrt_c_; }
  bool operator==(const Curvature& o) const { return c_ == o.c_; }

 private:
  double c_ = 1.0;
  double sqrt_c_ = 1.0;
};

struct HyperPoint {
  Vec spatial;
  double time = 0.0;
  Curvature curvature;

  /// Lifts a spatial vector onto the sheet: time = sqrt(1/c + |s|^2).
  static HyperPoint from_spatial(Vec spatial, Curvature k = Curvature{});
  static HyperPoint origin(Eigen::Index dim, Curvature k = Curvature{});
  Eigen::Index dim() const { return spatial.size(); }
};

struct TangentVector {
  Vec spatial;
  Curvature curvature;

  static TangentVector zero(Eigen::Index dim, Curvature k = Curvature{});
  Eigen::Index dim() const { return spatial.size(); }
  double norm() const { return spatial.norm(); }
};

/// Ambient Minkowski vector, used for tangent vectors at points other than O.
struct MinkowskiVector {
  Vec spatial;
  double time = 0.0;
};

struct GeometryConfig {
  Curvature curvature{1.0};
  double boundary_radius = 5.0;
  double arccos_clamp_eps = 1e-11;
  double entailment_aperture = 0.1;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

// ---------------------------------------------------------------- values

double lorentz_inner(const HyperPoint& x, const HyperPoint& y);
double lorentz_inner(const HyperPoint& x, const TangentVector& z);
double lorentz_inner(const TangentVector& x, const TangentVector& y);
double lorentz_inner(const MinkowskiVector& x, const MinkowskiVector& y);

/// sqrt(1/c) * arccosh(-c <x, y>). Evaluated through the equivalent
/// (2/sqrt c) asinh(sqrt(c) |x - y|_L / 2), which never leaves the domain and
/// keeps full precision for nearby points.
double geodesic_distance(const HyperPoint& x, const HyperPoint& y);

/// d(O, x) = asinh(sqrt(c) |spatial|) / sqrt(c).
double distance_to_origin(const HyperPoint& x);

TangentVector clamp_to_orbit(const TangentVector& z, const GeometryConfig& cfg);
HyperPoint exp_map_origin(const TangentVector& z);
TangentVector log_map_origin(const HyperPoint& y);

/// Logarithmic map at an arbitrary base point x (returns a vector tangent at x).
MinkowskiVector log_map(const HyperPoint& x, const HyperPoint& y);

/// gamma(t) = cosh(t sqrt(c) |z|_L) x + sinh(t sqrt(c) |z|_L) z / (sqrt(c) |z|_L).
/// t > 1 extrapolates past exp_x(z). A zero z returns x. z must be tangent at x:
/// only its spatial part is read.
HyperPoint geodesic_point(const HyperPoint& x, const MinkowskiVector& z, double t);
HyperPoint geodesic_point(const TangentVector& z, double t);

/// Point on the ray O -> h at distance exactly r_b from O.
HyperPoint extrapolate_to_boundary(const HyperPoint& h, const GeometryConfig& cfg);

/// pi minus the angle at `parent` in the triangle (O, parent, child).
double exterior_angle(const HyperPoint& parent, const HyperPoint& child,
                      const GeometryConfig& cfg = {});

/// Half-aperture of the entailment cone rooted at `parent`:
/// arcsin(min(1, 2K / (sqrt(c) |spatial(parent)|))).
double entailment_aperture(const HyperPoint& parent, const GeometryConfig& cfg);

/// max(0, exterior_angle - aperture); zero means `child` is inside the cone.
/// The cone construction follows MERU's; it is an adaptation, not part of the
/// training objective.
double entailment_score(const HyperPoint& parent, const HyperPoint& child,
                        const GeometryConfig& cfg);

// ------------------------------------------------------------- gradients
//
// All gradients are taken with respect to the spatial coordinates, with the
// time coordinate treated as the function sqrt(1/c + |s|^2) of them.

struct PairGrad {
  double value = 0.0;
  Vec d_first;   // d value / d spatial(first argument)
  Vec d_second;  // d value / d spatial(second argument)
};

/// Distance and its gradient; the gradient is zero at coincident points.
PairGrad geodesic_distance_grad(const HyperPoint& x, const HyperPoint& y);

/// Squared distance; smooth at coincident points (gradient 0 there).
PairGrad squared_distance_grad(const HyperPoint& x, const HyperPoint& y);

/// Exterior angle with `parent` as first argument. The gradient is zero when
/// the arccos argument sits on the clamp. Throws DegenerateAngleError like
/// exterior_angle.
PairGrad exterior_angle_grad(const HyperPoint& parent, const HyperPoint& child,
                             const GeometryConfig& cfg);

/// Vector-Jacobian products for the origin maps and the orbit clamp.
Vec exp_map_origin_vjp(const TangentVector& z, const Vec& grad_spatial);
Vec log_map_origin_vjp(const HyperPoint& y, const Vec& grad_tangent);
Vec clamp_to_orbit_vjp(const TangentVector& z, const GeometryConfig& cfg,
                       const Vec& grad_out);

}  // namespace hypelift::geo
