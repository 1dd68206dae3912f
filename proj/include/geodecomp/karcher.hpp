#pragma once

#include <cmath>
#include <vector>

#include "geodecomp/detail/parallel.hpp"
#include "geodecomp/geometry.hpp"

namespace geodecomp {

struct MeanConfig {
  double learning_rate = 1.0;
  double tolerance = 1e-5;
  int max_iters = 1000;
  bool record_objective = false;   // fills MeanResult::objective_trace
  double closeness_radius = -1.0;  // <=0 -> geometry default
};

struct MeanResult {
  ManifoldPoint mean;
  int iterations = 0;
  double final_step_norm = 0.0;
  bool converged = false;
  ClosenessReport closeness;       // distances to the initial guess, measured up front
  bool closeness_warning = false;  // true when max >= radius
  std::vector<double> objective_trace;
};

namespace detail {

inline void validate_weights(Eigen::VectorXd& w, Eigen::Index n) {
  if (w.size() != n) throw AlignmentError("weight count does not match point count");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(w(i) >= 0.0)) throw ConfigError("weights must be nonnegative and finite");
  double s = w.sum();
  if (std::abs(s - 1.0) > 1e-6)
    throw ConfigError("weights must sum to 1 (got " + std::to_string(s) + ")");
  if (s != 1.0) w /= s;  // defensive renormalization of file-sourced rounding
}

// Chunked reduction of sum_i w_i Log_mu(u_i); bit-stable for any thread count.
inline Eigen::VectorXd weighted_log_sum(const Geometry& g, const RowMatrixXd& rows, const Eigen::VectorXd& w,
                                        ConstRowRef mu) {
  const std::size_t n = static_cast<std::size_t>(rows.rows());
  const std::size_t chunks = num_chunks(n);
  std::vector<Eigen::VectorXd> partial(chunks, Eigen::VectorXd::Zero(rows.cols()));
  std::vector<char> failed(chunks, 0);
  for_each_chunk(n, [&](std::size_t c, std::size_t b, std::size_t e) {
    Eigen::VectorXd tmp(rows.cols());
    try {
      for (std::size_t i = b; i < e; ++i) {
        if (w(static_cast<Eigen::Index>(i)) == 0.0) continue;
        log(g, mu, rows.row(static_cast<Eigen::Index>(i)).transpose(), tmp);
        partial[c] += w(static_cast<Eigen::Index>(i)) * tmp;
      }
    } catch (const CutLocusError&) {
      failed[c] = 1;
    }
  });
  for (std::size_t c = 0; c < chunks; ++c)
    if (failed[c]) throw CutLocusError("a point reached the cut locus of the mean iterate");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows.cols());
  for (const auto& p : partial) acc += p;
  return acc;
}

}  // namespace detail

/// Normalized (weighted) arithmetic mean: the standard starting iterate.
inline ManifoldPoint init_guess(const Geometry& g, const RowMatrixXd& rows, const Eigen::VectorXd& weights) {
  if (rows.rows() == 0) throw EmptyInput("mean of an empty point set");
  Eigen::VectorXd w = weights;
  detail::validate_weights(w, rows.rows());
  Eigen::VectorXd acc = rows.transpose() * w;
  switch (g.kind) {
    case GeometryKind::Sphere: {
      double n = acc.norm();
      if (n < 1e-12) throw DegenerateInput("weighted arithmetic mean is numerically zero");
      return ManifoldPoint{acc / n, g};
    }
    case GeometryKind::Euclidean:
      return ManifoldPoint{acc, g};
    case GeometryKind::Lorentz:
      return project_to_manifold(g, Eigen::VectorXd(acc.tail(g.ambient_dim)));
  }
  return ManifoldPoint{acc, g};
}

inline ManifoldPoint init_guess(const std::vector<ManifoldPoint>& points, const Eigen::VectorXd& weights) {
  if (points.empty()) throw EmptyInput("mean of an empty point set");
  const Geometry& g = points.front().geometry;
  RowMatrixXd rows(points.size(), g.coord_dim());
  for (std::size_t i = 0; i < points.size(); ++i) {
    detail::require_same_geometry(g, points[i].geometry);
    rows.row(static_cast<Eigen::Index>(i)) = points[i].coords;
  }
  return init_guess(g, rows, weights);
}

/// Weighted intrinsic (Karcher/Frechet) mean by Riemannian gradient descent:
/// mu <- Exp_mu(eta * sum_i w_i Log_mu(u_i)) until the update norm drops
/// below the tolerance. Non-convergence within max_iters is reported through
/// the `converged` flag rather than an exception.
inline MeanResult intrinsic_mean(const Geometry& g, const RowMatrixXd& rows, const Eigen::VectorXd& weights,
                                 const MeanConfig& cfg = {}) {
  if (rows.rows() == 0) throw EmptyInput("mean of an empty point set");
  if (rows.cols() != g.coord_dim()) throw DimensionError("row width does not match the geometry layout");
  if (cfg.learning_rate <= 0.0 || cfg.tolerance <= 0.0 || cfg.max_iters < 1)
    throw ConfigError("mean configuration requires eta > 0, tolerance > 0, max_iters >= 1");
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    check_on_manifold(g, rows.row(i).transpose(), "point " + std::to_string(i));

  Eigen::VectorXd w = weights;
  detail::validate_weights(w, rows.rows());

  MeanResult res;
  res.mean = init_guess(g, rows, w);
  res.closeness = closeness_report(g, rows, res.mean.coords, cfg.closeness_radius);
  res.closeness_warning = !res.closeness.within_half_pi;

  Eigen::VectorXd mu = res.mean.coords;
  Eigen::VectorXd next(mu.size());
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (cfg.record_objective) {
      double obj = 0.0;
      for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        double d = detail::dist(g, mu, rows.row(i).transpose());
        obj += 0.5 * w(i) * d * d;
      }
      res.objective_trace.push_back(obj);
    }
    Eigen::VectorXd delta = cfg.learning_rate * detail::weighted_log_sum(g, rows, w, mu);
    detail::exp(g, mu, delta, next);
    mu.swap(next);
    res.iterations = it + 1;
    res.final_step_norm = detail::tangent_norm(g, delta);
    if (res.final_step_norm < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.mean.coords = mu;
  res.mean.geometry = g;
  return res;
}

inline MeanResult intrinsic_mean(const std::vector<ManifoldPoint>& points, const Eigen::VectorXd& weights,
                                 const MeanConfig& cfg = {}) {
  if (points.empty()) throw EmptyInput("mean of an empty point set");
  const Geometry& g = points.front().geometry;
  RowMatrixXd rows(points.size(), g.coord_dim());
  for (std::size_t i = 0; i < points.size(); ++i) {
    detail::require_same_geometry(g, points[i].geometry);
    rows.row(static_cast<Eigen::Index>(i)) = points[i].coords;
  }
  return intrinsic_mean(g, rows, weights, cfg);
}

/// Norm of sum_i w_i Log_mu(u_i): zero exactly at the intrinsic mean.
inline double characterization_residual(const Geometry& g, const RowMatrixXd& rows, const Eigen::VectorXd& weights,
                                        const ManifoldPoint& mu) {
  Eigen::VectorXd w = weights;
  detail::validate_weights(w, rows.rows());
  return detail::tangent_norm(g, detail::weighted_log_sum(g, rows, w, mu.coords));
}

}  // namespace geodecomp
