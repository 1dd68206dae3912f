#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "geodecomp/errors.hpp"

namespace geodecomp {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowRef = Eigen::Ref<const Eigen::VectorXd>;

inline constexpr double kMembershipTol = 1e-9;
inline constexpr double kTangencyTol = 1e-9;
inline constexpr double kCutLocusTol = 1e-8;

enum class GeometryKind { Sphere, Lorentz, Euclidean };

inline const char* to_string(GeometryKind k) {
  switch (k) {
    case GeometryKind::Sphere: return "sphere";
    case GeometryKind::Lorentz: return "lorentz";
    case GeometryKind::Euclidean: return "euclidean";
  }
  return "?";
}

inline GeometryKind geometry_kind_from_string(const std::string& s) {
  if (s == "sphere") return GeometryKind::Sphere;
  if (s == "lorentz") return GeometryKind::Lorentz;
  if (s == "euclidean") return GeometryKind::Euclidean;
  throw ConfigError("unknown geometry kind: " + s);
}

/// Geometry descriptor. `ambient_dim` is d; Lorentz points carry d+1
/// coordinates (time coordinate first), spherical and Euclidean points d.
struct Geometry {
  GeometryKind kind = GeometryKind::Sphere;
  int ambient_dim = 0;
  double curvature = 1.0;  // c > 0, Lorentz only

  int coord_dim() const { return kind == GeometryKind::Lorentz ? ambient_dim + 1 : ambient_dim; }

  double injectivity_radius() const {
    return kind == GeometryKind::Sphere ? M_PI : std::numeric_limits<double>::infinity();
  }

  double default_closeness_radius() const {
    return kind == GeometryKind::Sphere ? M_PI / 2.0 : std::numeric_limits<double>::infinity();
  }

  bool operator==(const Geometry& o) const {
    return kind == o.kind && ambient_dim == o.ambient_dim &&
           (kind != GeometryKind::Lorentz || curvature == o.curvature);
  }
};

struct ManifoldPoint {
  Eigen::VectorXd coords;
  Geometry geometry;
};

struct TangentVector {
  Eigen::VectorXd coords;
  ManifoldPoint base;
};

namespace detail {

inline double lorentz_inner(ConstRowRef a, ConstRowRef b) {
  return -a(0) * b(0) + a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
}

// Squared Lorentz norm of a tangent vector (positive on the tangent space).
inline double lorentz_norm(ConstRowRef v) {
  double q = lorentz_inner(v, v);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

inline double clamp1(double x) { return std::clamp(x, -1.0, 1.0); }

// Deviation from the membership constraint; NaN coordinates surface as NaN.
inline double membership_error(const Geometry& g, ConstRowRef u) {
  switch (g.kind) {
    case GeometryKind::Sphere: return std::abs(u.norm() - 1.0);
    case GeometryKind::Lorentz: {
      if (u(0) <= 0.0) return std::numeric_limits<double>::infinity();
      return std::abs(lorentz_inner(u, u) + 1.0 / g.curvature);
    }
    case GeometryKind::Euclidean: return 0.0;
  }
  return 0.0;
}

inline double dist(const Geometry& g, ConstRowRef u, ConstRowRef v) {
  switch (g.kind) {
    case GeometryKind::Sphere: return std::acos(clamp1(u.dot(v)));
    case GeometryKind::Euclidean: return (u - v).norm();
    case GeometryKind::Lorentz: {
      double arg = -g.curvature * lorentz_inner(u, v);
      return std::acosh(std::max(arg, 1.0)) / std::sqrt(g.curvature);
    }
  }
  return 0.0;
}

// out may not alias mu or w.
inline void tangent_project(const Geometry& g, ConstRowRef mu, ConstRowRef w, Eigen::VectorXd& out) {
  switch (g.kind) {
    case GeometryKind::Sphere:
      out = w - (mu.dot(w)) * mu;  // (I - mu mu^T) w without forming the matrix
      break;
    case GeometryKind::Lorentz:
      out = w + (g.curvature * lorentz_inner(mu, w)) * mu;
      break;
    case GeometryKind::Euclidean:
      out = w;
      break;
  }
}

// Pulls a nearly-on-manifold point back onto the constraint surface.
inline void reproject(const Geometry& g, Eigen::VectorXd& u) {
  switch (g.kind) {
    case GeometryKind::Sphere: {
      double n = u.norm();
      if (n > 0.0) u /= n;
      break;
    }
    case GeometryKind::Lorentz: {
      double s2 = u.tail(u.size() - 1).squaredNorm();
      u(0) = std::sqrt(1.0 / g.curvature + s2);
      break;
    }
    case GeometryKind::Euclidean: break;
  }
}

inline void exp(const Geometry& g, ConstRowRef mu, ConstRowRef v, Eigen::VectorXd& out) {
  switch (g.kind) {
    case GeometryKind::Sphere: {
      double n = v.norm();
      if (n == 0.0) { out = mu; return; }
      out = std::cos(n) * mu + (std::sin(n) / n) * v;
      break;
    }
    case GeometryKind::Euclidean:
      out = mu + v;
      return;
    case GeometryKind::Lorentz: {
      double n = lorentz_norm(v);
      if (n == 0.0) { out = mu; return; }
      double a = std::sqrt(g.curvature) * n;
      out = std::cosh(a) * mu + (std::sinh(a) / a) * v;
      break;
    }
  }
  reproject(g, out);
}

inline void log(const Geometry& g, ConstRowRef mu, ConstRowRef u, Eigen::VectorXd& out) {
  switch (g.kind) {
    case GeometryKind::Sphere: {
      double c = u.dot(mu);
      if (1.0 + c < kCutLocusTol)
        throw CutLocusError("log map undefined: point within cut-locus guard of the base point");
      double theta = std::acos(clamp1(c));
      tangent_project(g, mu, u, out);  // equals (I - mu mu^T)(u - mu)
      double n = out.norm();
      if (n < 1e-15) { out.setZero(); return; }
      out *= theta / n;
      break;
    }
    case GeometryKind::Euclidean:
      out = u - mu;
      break;
    case GeometryKind::Lorentz: {
      double theta = dist(g, mu, u);
      tangent_project(g, mu, u, out);
      double n = lorentz_norm(out);
      if (n < 1e-15) { out.setZero(); return; }
      out *= theta / n;
      break;
    }
  }
}

inline double tangent_norm(const Geometry& g, ConstRowRef v) {
  return g.kind == GeometryKind::Lorentz ? lorentz_norm(v) : v.norm();
}

}  // namespace detail

inline void check_on_manifold(const Geometry& g, ConstRowRef u, const std::string& what = "point") {
  if (u.size() != g.coord_dim())
    throw DimensionError(what + " has " + std::to_string(u.size()) + " coordinates, geometry expects " +
                         std::to_string(g.coord_dim()));
  if (!u.allFinite()) throw ManifoldViolation(what + " has non-finite coordinates");
  double err = detail::membership_error(g, u);
  if (!(err <= kMembershipTol))
    throw ManifoldViolation(what + " violates the membership constraint by " + std::to_string(err));
}

inline void check_tangent(const Geometry& g, ConstRowRef mu, ConstRowRef v) {
  if (v.size() != mu.size()) throw DimensionError("tangent vector and base point sizes differ");
  double ip = 0.0;
  switch (g.kind) {
    case GeometryKind::Sphere: ip = mu.dot(v); break;
    case GeometryKind::Lorentz: ip = detail::lorentz_inner(mu, v); break;
    case GeometryKind::Euclidean: return;
  }
  if (std::abs(ip) > kTangencyTol * std::max(1.0, v.norm()))
    throw ManifoldViolation("vector is not tangent at the base point (inner product " + std::to_string(ip) + ")");
}

namespace detail {
inline void require_same_geometry(const Geometry& a, const Geometry& b) {
  if (a.kind != b.kind) throw ConfigError("geometry kind mismatch");
  if (a.ambient_dim != b.ambient_dim)
    throw DimensionError("ambient dimension mismatch: " + std::to_string(a.ambient_dim) + " vs " +
                         std::to_string(b.ambient_dim));
  if (a.kind == GeometryKind::Lorentz && a.curvature != b.curvature)
    throw ConfigError("curvature mismatch between Lorentz geometries");
}
}  // namespace detail

/// Geodesic distance (radians on the unit sphere).
inline double distance(const Geometry& g, const ManifoldPoint& u, const ManifoldPoint& u2) {
  detail::require_same_geometry(g, u.geometry);
  detail::require_same_geometry(g, u2.geometry);
  check_on_manifold(g, u.coords);
  check_on_manifold(g, u2.coords);
  return detail::dist(g, u.coords, u2.coords);
}

inline ManifoldPoint exp_map(const Geometry& g, const ManifoldPoint& mu, const TangentVector& v) {
  detail::require_same_geometry(g, mu.geometry);
  check_on_manifold(g, mu.coords);
  if ((v.base.coords - mu.coords).norm() > kTangencyTol)
    throw ConfigError("tangent vector is not based at the given point");
  check_tangent(g, mu.coords, v.coords);
  ManifoldPoint out{Eigen::VectorXd(), g};
  detail::exp(g, mu.coords, v.coords, out.coords);
  return out;
}

inline TangentVector log_map(const Geometry& g, const ManifoldPoint& mu, const ManifoldPoint& u) {
  detail::require_same_geometry(g, mu.geometry);
  detail::require_same_geometry(g, u.geometry);
  check_on_manifold(g, mu.coords);
  check_on_manifold(g, u.coords);
  TangentVector out{Eigen::VectorXd(), mu};
  detail::log(g, mu.coords, u.coords, out.coords);
  return out;
}

/// Lifts a raw vector onto the manifold: normalization on the sphere,
/// identity on Euclidean space, time-coordinate re-lift on the hyperboloid
/// (accepts either a spatial vector of length d or full coordinates of
/// length d+1 whose time entry is recomputed).
inline ManifoldPoint project_to_manifold(const Geometry& g, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw DataError("input vector has non-finite entries");
  ManifoldPoint out{x, g};
  switch (g.kind) {
    case GeometryKind::Sphere: {
      if (x.size() != g.ambient_dim) throw DimensionError("expected a vector of length d");
      double n = x.norm();
      if (n < 1e-300) throw DegenerateInput("cannot project the zero vector to the sphere");
      out.coords = x / n;
      break;
    }
    case GeometryKind::Euclidean:
      if (x.size() != g.ambient_dim) throw DimensionError("expected a vector of length d");
      break;
    case GeometryKind::Lorentz: {
      if (x.size() == g.ambient_dim) {
        out.coords.resize(g.ambient_dim + 1);
        out.coords.tail(g.ambient_dim) = x;
      } else if (x.size() != g.ambient_dim + 1) {
        throw DimensionError("expected a vector of length d or d+1");
      }
      detail::reproject(g, out.coords);
      break;
    }
  }
  return out;
}

inline TangentVector project_to_tangent(const Geometry& g, const ManifoldPoint& mu, const Eigen::VectorXd& w) {
  detail::require_same_geometry(g, mu.geometry);
  check_on_manifold(g, mu.coords);
  if (w.size() != mu.coords.size()) throw DimensionError("vector length does not match the point layout");
  TangentVector out{Eigen::VectorXd(), mu};
  detail::tangent_project(g, mu.coords, w, out.coords);
  return out;
}

struct ClosenessReport {
  double avg = 0.0;
  double max = 0.0;
  bool within_half_pi = true;  // strict max < radius; radius is pi/2 on the sphere
  double radius = 0.0;
};

inline ClosenessReport closeness_report(const Geometry& g, const RowMatrixXd& points, ConstRowRef center,
                                        double radius = -1.0) {
  if (points.rows() == 0) throw EmptyInput("closeness report over an empty point list");
  if (radius <= 0.0) radius = g.default_closeness_radius();
  ClosenessReport rep;
  rep.radius = radius;
  double sum = 0.0, mx = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double d = detail::dist(g, center, points.row(i).transpose());
    sum += d;
    mx = std::max(mx, d);
  }
  rep.avg = sum / static_cast<double>(points.rows());
  rep.max = mx;
  rep.within_half_pi = mx < radius;
  return rep;
}

inline ClosenessReport closeness_report(const std::vector<ManifoldPoint>& points, const ManifoldPoint& center,
                                        double radius = -1.0) {
  if (points.empty()) throw EmptyInput("closeness report over an empty point list");
  const Geometry& g = center.geometry;
  check_on_manifold(g, center.coords);
  RowMatrixXd m(points.size(), g.coord_dim());
  for (std::size_t i = 0; i < points.size(); ++i) {
    detail::require_same_geometry(g, points[i].geometry);
    check_on_manifold(g, points[i].coords);
    m.row(i) = points[i].coords;
  }
  return closeness_report(g, m, center.coords, radius);
}

}  // namespace geodecomp
