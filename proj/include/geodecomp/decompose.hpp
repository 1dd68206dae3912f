#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "geodecomp/karcher.hpp"
#include "geodecomp/noise.hpp"

namespace geodecomp {

struct DecompositionDiagnostics {
  MeanResult mean_result;
  ClosenessReport closeness;
  std::vector<double> centering_residuals;  // per factor: ||sum_z v_z||
  std::vector<std::string> low_support;     // primitives covered by exactly one tuple
};

/// Base point plus one tangent direction per primitive. Directions are kept
/// as a |primitives| x coord_dim matrix so composing a tuple is s gathers and
/// one exponential map.
struct Decomposition {
  ManifoldPoint mu;
  CompositionSpace space;
  RowMatrixXd directions;
  std::vector<std::uint64_t> seen;  // sorted covered tuple ids (Z')
  DecompositionDiagnostics diagnostics;

  bool is_seen(std::uint64_t tuple_id) const {
    return std::binary_search(seen.begin(), seen.end(), tuple_id);
  }

  ConstRowRef direction_flat(std::size_t flat) const {
    return directions.row(static_cast<Eigen::Index>(flat)).transpose();
  }

  ConstRowRef direction(std::size_t factor, std::uint32_t idx) const {
    return direction_flat(space.primitive_flat(factor, idx));
  }

  TangentVector direction_for(const std::string& primitive) const {
    auto hit = space.find_primitive(primitive);
    if (!hit) throw UnknownPrimitive("unknown primitive '" + primitive + "'", {{"primitive", primitive}});
    return TangentVector{Eigen::VectorXd(direction(hit->first, hit->second)), mu};
  }
};

struct DecomposeConfig {
  // Tighter than the standalone mean default so factor centering inherits
  // headroom below its 1e-6*|Z_i| budget.
  double mean_tolerance = 1e-8;
  int mean_max_iters = 1000;
};

namespace detail {

// Denoised tangent representation per covered tuple plus the weighted mean.
struct TangentDecomposition {
  MeanResult mean;
  RowMatrixXd denoised;  // |Z'| x coord_dim, rows aligned with covered_tuples()
};

inline TangentDecomposition denoise_to_tangent(const LabeledEmbeddingSet& set, const NoiseModel& noise,
                                               const DecomposeConfig& cfg) {
  validate_noise(set, noise);
  const Geometry& g = set.geometry();
  double total = noise.probs.sum();
  if (total <= 0.0) throw DegenerateNoise("total noise mass is zero");
  Eigen::VectorXd weights = noise.probs / total;

  MeanConfig mc;
  mc.tolerance = cfg.mean_tolerance;
  mc.max_iters = cfg.mean_max_iters;
  TangentDecomposition out;
  out.mean = intrinsic_mean(g, set.rows(), weights, mc);
  const Eigen::VectorXd& mu = out.mean.mean.coords;

  const auto& per_tuple = set.rows_per_tuple();
  out.denoised = RowMatrixXd::Zero(static_cast<Eigen::Index>(per_tuple.size()), g.coord_dim());
  const std::size_t n = set.size();
  // row -> covered-tuple position
  std::vector<std::uint32_t> tuple_pos(n);
  for (std::size_t k = 0; k < per_tuple.size(); ++k)
    for (std::uint32_t r : per_tuple[k]) tuple_pos[r] = static_cast<std::uint32_t>(k);

  // Single O(N d) pass; scattered row writes make this one serial.
  Eigen::VectorXd tmp(g.coord_dim());
  for (std::size_t i = 0; i < n; ++i) {
    double p = noise.probs(static_cast<Eigen::Index>(i));
    if (p == 0.0) continue;
    log(g, mu, set.rows().row(static_cast<Eigen::Index>(i)).transpose(), tmp);
    out.denoised.row(tuple_pos[i]) += p * tmp.transpose();
  }
  return out;
}

inline Decomposition slice_mean_decomposition(const LabeledEmbeddingSet& set, const NoiseModel& noise,
                                              const DecomposeConfig& cfg) {
  const CompositionSpace& space = set.space();
  TangentDecomposition td = denoise_to_tangent(set, noise, cfg);

  Decomposition dec;
  dec.mu = td.mean.mean;
  dec.space = space;
  dec.seen = set.covered_tuples();
  dec.directions = RowMatrixXd::Zero(static_cast<Eigen::Index>(space.total_primitives()), set.geometry().coord_dim());

  std::vector<std::uint32_t> coverage(space.total_primitives(), 0);
  for (std::size_t k = 0; k < dec.seen.size(); ++k) {
    Tuple t = space.tuple_from_id(dec.seen[k]);
    for (std::size_t f = 0; f < t.size(); ++f) {
      std::size_t flat = space.primitive_flat(f, t[f]);
      dec.directions.row(static_cast<Eigen::Index>(flat)) += td.denoised.row(static_cast<Eigen::Index>(k));
      ++coverage[flat];
    }
  }
  for (std::size_t flat = 0; flat < space.total_primitives(); ++flat) {
    if (coverage[flat] == 0) continue;  // callers rule this out beforehand
    dec.directions.row(static_cast<Eigen::Index>(flat)) /= static_cast<double>(coverage[flat]);
  }

  dec.diagnostics.mean_result = td.mean;
  dec.diagnostics.closeness = td.mean.closeness;
  dec.diagnostics.centering_residuals.resize(space.num_factors());
  for (std::size_t f = 0; f < space.num_factors(); ++f) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(set.geometry().coord_dim());
    for (std::uint32_t i = 0; i < space.factor_size(f); ++i)
      s += dec.directions.row(static_cast<Eigen::Index>(space.primitive_flat(f, i))).transpose();
    dec.diagnostics.centering_residuals[f] = s.norm();
  }
  for (std::size_t f = 0; f < space.num_factors(); ++f)
    for (std::uint32_t i = 0; i < space.factor_size(f); ++i)
      if (coverage[space.primitive_flat(f, i)] == 1)
        dec.diagnostics.low_support.push_back(space.primitive_name(f, i));
  return dec;
}

inline void require_dense_single_sample(const LabeledEmbeddingSet& set, bool single_sample) {
  if (!set.covers_all_tuples())
    throw StructureError("input does not cover every tuple of the composition space; use decompose_sparse",
                         {{"hint", "decompose_sparse handles missing tuples"}});
  if (single_sample)
    for (const auto& rows : set.rows_per_tuple())
      if (rows.size() != 1)
        throw StructureError("input has duplicate rows for a tuple; use decompose_sparse",
                             {{"hint", "decompose_sparse handles repeated samples"}});
}

}  // namespace detail

/// Dense, one row per tuple: tangent slice means at the uniform intrinsic mean.
inline Decomposition decompose_simple(const LabeledEmbeddingSet& set, const DecomposeConfig& cfg = {}) {
  detail::require_dense_single_sample(set, /*single_sample=*/true);
  return detail::slice_mean_decomposition(set, uniform_scores(set), cfg);
}

/// Dense with k samples per tuple, weighted by the noise distribution.
inline Decomposition decompose_weighted(const LabeledEmbeddingSet& set, const NoiseModel& noise,
                                        const DecomposeConfig& cfg = {}) {
  detail::require_dense_single_sample(set, /*single_sample=*/false);
  return detail::slice_mean_decomposition(set, noise, cfg);
}

/// Sparse coverage: slice means run over the covered tuples only. Every
/// primitive must appear in at least one labeled row; the result then yields
/// directions for all primitives, so compose() covers unseen tuples too.
inline Decomposition decompose_sparse(const LabeledEmbeddingSet& set, const NoiseModel& noise,
                                      const DecomposeConfig& cfg = {}) {
  const CompositionSpace& space = set.space();
  std::vector<std::uint32_t> cov = set.primitive_coverage();
  std::vector<std::string> missing;
  for (std::size_t f = 0; f < space.num_factors(); ++f)
    for (std::uint32_t i = 0; i < space.factor_size(f); ++i)
      if (cov[space.primitive_flat(f, i)] == 0) missing.push_back(space.primitive_name(f, i));
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    throw CoverageError("primitives with no labeled rows: " + joined, {{"primitives", joined}});
  }
  return detail::slice_mean_decomposition(set, noise, cfg);
}

inline ManifoldPoint compose(const Decomposition& dec, TupleRef tuple) {
  const Geometry& g = dec.mu.geometry;
  if (tuple.size() != dec.space.num_factors()) throw DimensionError("tuple arity does not match factor count");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.coord_dim());
  for (std::size_t f = 0; f < tuple.size(); ++f) {
    if (tuple[f] >= dec.space.factor_size(f))
      throw UnknownPrimitive("primitive index out of range in factor '" + dec.space.factor(f).name + "'");
    v += dec.direction(f, tuple[f]);
  }
  ManifoldPoint out{Eigen::VectorXd(), g};
  detail::exp(g, dec.mu.coords, v, out.coords);
  return out;
}

inline ManifoldPoint compose(const Decomposition& dec, const std::vector<std::string>& names) {
  Tuple t = dec.space.tuple_from_names(names);
  return compose(dec, t);
}

/// Exp_mu of an arbitrary weighted combination of primitive directions;
/// unlisted primitives contribute nothing. Supports attribute scaling and
/// object-object blends.
inline ManifoldPoint compose_scaled(const Decomposition& dec, const std::map<std::string, double>& coefficients) {
  const Geometry& g = dec.mu.geometry;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.coord_dim());
  for (const auto& [name, alpha] : coefficients) {
    auto hit = dec.space.find_primitive(name);
    if (!hit) throw UnknownPrimitive("unknown primitive '" + name + "'", {{"primitive", name}});
    v += alpha * dec.direction(hit->first, hit->second);
  }
  ManifoldPoint out{Eigen::VectorXd(), g};
  detail::exp(g, dec.mu.coords, v, out.coords);
  return out;
}

struct ResidualReport {
  std::vector<std::pair<std::uint64_t, double>> per_tuple;  // (tuple id, weighted squared error)
  double weighted_total = 0.0;
};

/// Geodesic approximation error: per tuple sum_e p * d(u_(z,e), compose(z))^2.
inline ResidualReport residuals(const Decomposition& dec, const LabeledEmbeddingSet& set, const NoiseModel& noise) {
  validate_noise(set, noise);
  if (!dec.space.same_structure(set.space()))
    throw ConfigError("decomposition and embedding set use different composition spaces");
  const Geometry& g = set.geometry();
  detail::require_same_geometry(g, dec.mu.geometry);
  ResidualReport rep;
  const auto& covered = set.covered_tuples();
  const auto& per_tuple = set.rows_per_tuple();
  rep.per_tuple.reserve(covered.size());
  for (std::size_t k = 0; k < covered.size(); ++k) {
    Tuple t = set.space().tuple_from_id(covered[k]);
    ManifoldPoint u = compose(dec, t);
    double acc = 0.0;
    for (std::uint32_t r : per_tuple[k]) {
      double d = detail::dist(g, set.rows().row(r).transpose(), u.coords);
      acc += noise.probs(r) * d * d;
    }
    rep.per_tuple.emplace_back(covered[k], acc);
    rep.weighted_total += acc;
  }
  return rep;
}

/// Numerical rank of the stacked direction matrix. Bounded by
/// sum_i (|Z_i| - 1) for any decomposition produced from dense coverage.
inline int subspace_rank(const Decomposition& dec) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dec.directions);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  double thresh = 1e-8 * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return rank;
}

}  // namespace geodecomp
