#pragma once

#include <string>
#include <vector>

#include "geodecomp/decompose.hpp"
#include "geodecomp/detail/rng.hpp"

namespace geodecomp {

struct SynthSpec {
  CompositionSpace space;
  Geometry geometry;
  double direction_scale = 0.3;  // upper bound on every primitive direction norm
  double noise_sigma = 0.0;
  int samples_per_tuple = 1;
  double keep_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (geometry.ambient_dim < 2) throw ConfigError("ambient dimension must be at least 2");
    if (!(direction_scale > 0.0)) throw ConfigError("direction_scale must be positive");
    if (geometry.kind == GeometryKind::Sphere &&
        direction_scale * static_cast<double>(space.num_factors()) >= M_PI / 2.0)
      throw ConfigError("direction_scale * num_factors must stay below pi/2 on the sphere");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be nonnegative");
    if (samples_per_tuple < 1) throw ConfigError("samples_per_tuple must be at least 1");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("keep_fraction must be in (0, 1]");
  }
};

struct SynthInstance {
  LabeledEmbeddingSet set;  // one row per tuple (k = 1)
  Decomposition truth;
};

inline ManifoldPoint random_point(const Geometry& g, detail::Rng& rng) {
  Eigen::VectorXd x(g.ambient_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.gaussian();
  if (g.kind == GeometryKind::Euclidean) return ManifoldPoint{x, g};
  return project_to_manifold(g, x);
}

// Isotropic Gaussian in the ambient coordinates, projected to T_mu M.
inline Eigen::VectorXd random_tangent(const Geometry& g, ConstRowRef mu, double componentwise_sigma,
                                      detail::Rng& rng) {
  Eigen::VectorXd w(mu.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = componentwise_sigma * rng.gaussian();
  Eigen::VectorXd v;
  detail::tangent_project(g, mu, w, v);
  return v;
}

/// Builds an exactly decomposable labeled set: random base point, per-factor
/// centered directions with norms capped at direction_scale, one row per
/// tuple at Exp_mu of the direction sum.
inline SynthInstance gen_decomposable(const SynthSpec& spec) {
  spec.validate();
  detail::Rng rng(spec.seed);
  const Geometry& g = spec.geometry;
  const CompositionSpace& space = spec.space;

  ManifoldPoint mu = random_point(g, rng);
  RowMatrixXd dirs(space.total_primitives(), g.coord_dim());
  for (std::size_t f = 0; f < space.num_factors(); ++f) {
    const std::size_t nf = space.factor_size(f);
    RowMatrixXd fd(nf, g.coord_dim());
    double sigma = spec.direction_scale / std::sqrt(static_cast<double>(g.coord_dim()));
    for (std::size_t i = 0; i < nf; ++i)
      fd.row(static_cast<Eigen::Index>(i)) = random_tangent(g, mu.coords, sigma, rng).transpose();
    Eigen::RowVectorXd mean = fd.colwise().mean();
    fd.rowwise() -= mean;  // exact centering
    double max_norm = 0.0;
    for (std::size_t i = 0; i < nf; ++i) max_norm = std::max(max_norm, fd.row(static_cast<Eigen::Index>(i)).norm());
    if (max_norm > spec.direction_scale) fd *= spec.direction_scale / max_norm;
    for (std::uint32_t i = 0; i < nf; ++i)
      dirs.row(static_cast<Eigen::Index>(space.primitive_flat(f, i))) = fd.row(i);
  }

  const std::uint64_t total = space.total_tuples();
  RowMatrixXd rows(static_cast<Eigen::Index>(total), g.coord_dim());
  std::vector<std::uint32_t> labels;
  labels.reserve(total * space.num_factors());
  std::vector<std::string> ids;
  ids.reserve(total);
  Eigen::VectorXd v(g.coord_dim()), u(g.coord_dim());
  for (std::uint64_t id = 0; id < total; ++id) {
    Tuple t = space.tuple_from_id(id);
    v.setZero();
    for (std::size_t f = 0; f < t.size(); ++f)
      v += dirs.row(static_cast<Eigen::Index>(space.primitive_flat(f, t[f]))).transpose();
    detail::exp(g, mu.coords, v, u);
    rows.row(static_cast<Eigen::Index>(id)) = u;
    labels.insert(labels.end(), t.begin(), t.end());
    ids.push_back("z" + std::to_string(id));
  }

  Decomposition truth;
  truth.mu = mu;
  truth.space = space;
  truth.directions = dirs;
  truth.seen.resize(total);
  for (std::uint64_t id = 0; id < total; ++id) truth.seen[id] = id;
  truth.diagnostics.mean_result.mean = mu;
  truth.diagnostics.mean_result.converged = true;
  truth.diagnostics.closeness = closeness_report(g, rows, mu.coords);
  truth.diagnostics.mean_result.closeness = truth.diagnostics.closeness;
  truth.diagnostics.centering_residuals.assign(space.num_factors(), 0.0);

  return SynthInstance{LabeledEmbeddingSet(g, space, std::move(rows), std::move(labels), std::move(ids)),
                       std::move(truth)};
}

/// Emits k noisy samples per input row: Exp_u(eta) with eta an isotropic
/// tangent Gaussian of componentwise std sigma. sigma = 0 yields k copies.
inline LabeledEmbeddingSet add_noise(const LabeledEmbeddingSet& set, double sigma, int k, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("sigma must be nonnegative");
  if (k < 1) throw ConfigError("k must be at least 1");
  detail::Rng rng(seed);
  const Geometry& g = set.geometry();
  const std::size_t n = set.size();
  RowMatrixXd rows(static_cast<Eigen::Index>(n * static_cast<std::size_t>(k)), g.coord_dim());
  std::vector<std::uint32_t> labels;
  labels.reserve(n * static_cast<std::size_t>(k) * set.space().num_factors());
  std::vector<std::string> ids;
  ids.reserve(n * static_cast<std::size_t>(k));
  Eigen::VectorXd u(g.coord_dim());
  for (std::size_t i = 0; i < n; ++i) {
    ConstRowRef base = set.rows().row(static_cast<Eigen::Index>(i)).transpose();
    for (int e = 0; e < k; ++e) {
      if (sigma == 0.0) {
        u = base;
      } else {
        Eigen::VectorXd eta = random_tangent(g, base, sigma, rng);
        detail::exp(g, base, eta, u);
      }
      rows.row(static_cast<Eigen::Index>(i * static_cast<std::size_t>(k) + static_cast<std::size_t>(e))) = u;
      TupleRef t = set.label(i);
      labels.insert(labels.end(), t.begin(), t.end());
      ids.push_back(set.sample_ids()[i] + "_e" + std::to_string(e));
    }
  }
  return LabeledEmbeddingSet(g, set.space(), std::move(rows), std::move(labels), std::move(ids));
}

/// Uniformly drops whole tuples down to round(keep_fraction * covered count),
/// retrying fresh draws until every primitive stays covered.
inline LabeledEmbeddingSet sparsify(const LabeledEmbeddingSet& set, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("keep_fraction must be in (0, 1]");
  if (keep_fraction == 1.0) {
    return LabeledEmbeddingSet(set.geometry(), set.space(), set.rows(),
                               std::vector<std::uint32_t>(set.labels_flat()), set.sample_ids());
  }
  const CompositionSpace& space = set.space();
  const auto& covered = set.covered_tuples();
  const std::size_t m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(covered.size()))));

  for (int attempt = 0; attempt < 100; ++attempt) {
    detail::Rng rng(seed + static_cast<std::uint64_t>(attempt));
    std::vector<std::uint64_t> pool = covered;
    rng.shuffle(pool);
    pool.resize(m);
    std::vector<char> covered_prim(space.total_primitives(), 0);
    for (std::uint64_t id : pool) {
      Tuple t = space.tuple_from_id(id);
      for (std::size_t f = 0; f < t.size(); ++f) covered_prim[space.primitive_flat(f, t[f])] = 1;
    }
    bool ok = true;
    for (std::size_t f = 0; f < space.num_factors() && ok; ++f)
      for (std::uint32_t i = 0; i < space.factor_size(f) && ok; ++i)
        if (!covered_prim[space.primitive_flat(f, i)]) ok = false;
    if (!ok) continue;

    std::vector<std::uint64_t> sorted_pool = pool;
    std::sort(sorted_pool.begin(), sorted_pool.end());
    std::vector<std::uint32_t> keep_rows;
    for (std::size_t i = 0; i < set.size(); ++i)
      if (std::binary_search(sorted_pool.begin(), sorted_pool.end(), set.tuple_id_of_row(i)))
        keep_rows.push_back(static_cast<std::uint32_t>(i));
    RowMatrixXd rows(keep_rows.size(), set.geometry().coord_dim());
    std::vector<std::uint32_t> labels;
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < keep_rows.size(); ++j) {
      rows.row(static_cast<Eigen::Index>(j)) = set.rows().row(keep_rows[j]);
      TupleRef t = set.label(keep_rows[j]);
      labels.insert(labels.end(), t.begin(), t.end());
      ids.push_back(set.sample_ids()[keep_rows[j]]);
    }
    return LabeledEmbeddingSet(set.geometry(), space, std::move(rows), std::move(labels), std::move(ids));
  }
  throw ConfigError("could not sparsify to keep_fraction " + std::to_string(keep_fraction) +
                    " while covering every primitive (100 attempts)");
}

/// Weighted tangent-space objective sum_(z,e) p ||Log_mu(u) - sum_i v_{z_i}||^2
/// for an arbitrary direction matrix.
inline double tangent_objective(const LabeledEmbeddingSet& set, const NoiseModel& noise, const ManifoldPoint& mu,
                                const RowMatrixXd& directions) {
  validate_noise(set, noise);
  const Geometry& g = set.geometry();
  const CompositionSpace& space = set.space();
  double obj = 0.0;
  Eigen::VectorXd tmp(g.coord_dim()), v(g.coord_dim());
  for (std::size_t i = 0; i < set.size(); ++i) {
    double p = noise.probs(static_cast<Eigen::Index>(i));
    if (p == 0.0) continue;
    detail::log(g, mu.coords, set.rows().row(static_cast<Eigen::Index>(i)).transpose(), tmp);
    TupleRef t = set.label(i);
    v.setZero();
    for (std::size_t f = 0; f < t.size(); ++f)
      v += directions.row(static_cast<Eigen::Index>(space.primitive_flat(f, t[f]))).transpose();
    obj += p * (tmp - v).squaredNorm();
  }
  return obj;
}

struct OracleConfig {
  int iters = 5000;
  double step = 0.1;
};

/// Independent check of the closed form: plain gradient descent over all
/// direction vectors on the mass-normalized tangent objective, re-centering
/// each factor after every step. Deliberately simple.
inline Decomposition oracle_decompose(const LabeledEmbeddingSet& set, const NoiseModel& noise,
                                      const OracleConfig& ocfg = {}, const DecomposeConfig& cfg = {}) {
  const CompositionSpace& space = set.space();
  detail::TangentDecomposition td = detail::denoise_to_tangent(set, noise, cfg);
  const Geometry& g = set.geometry();
  const double mass = noise.probs.sum();

  const std::size_t P = space.total_primitives();
  RowMatrixXd dirs = RowMatrixXd::Zero(static_cast<Eigen::Index>(P), g.coord_dim());
  RowMatrixXd grad(static_cast<Eigen::Index>(P), g.coord_dim());
  const auto& covered = set.covered_tuples();

  double prev_obj = std::numeric_limits<double>::infinity();
  int rises = 0;
  Eigen::VectorXd vsum(g.coord_dim());
  for (int it = 0; it < ocfg.iters; ++it) {
    grad.setZero();
    double obj = 0.0;
    for (std::size_t k = 0; k < covered.size(); ++k) {
      Tuple t = space.tuple_from_id(covered[k]);
      vsum.setZero();
      for (std::size_t f = 0; f < t.size(); ++f)
        vsum += dirs.row(static_cast<Eigen::Index>(space.primitive_flat(f, t[f]))).transpose();
      Eigen::VectorXd r = vsum - td.denoised.row(static_cast<Eigen::Index>(k)).transpose();
      // per-tuple noise mass is 1, so the residual term is exact up to the
      // sample-scatter constant, which the gradient does not see
      obj += r.squaredNorm();
      for (std::size_t f = 0; f < t.size(); ++f)
        grad.row(static_cast<Eigen::Index>(space.primitive_flat(f, t[f]))) += (2.0 / mass) * r.transpose();
    }
    if (obj > prev_obj) {
      if (++rises >= 10) throw OracleDivergence("tangent objective increased for 10 consecutive steps");
    } else {
      rises = 0;
    }
    prev_obj = obj;
    dirs -= ocfg.step * grad;
    for (std::size_t f = 0; f < space.num_factors(); ++f) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(g.coord_dim());
      for (std::uint32_t i = 0; i < space.factor_size(f); ++i)
        mean += dirs.row(static_cast<Eigen::Index>(space.primitive_flat(f, i)));
      mean /= static_cast<double>(space.factor_size(f));
      for (std::uint32_t i = 0; i < space.factor_size(f); ++i)
        dirs.row(static_cast<Eigen::Index>(space.primitive_flat(f, i))) -= mean;
    }
  }

  Decomposition dec;
  dec.mu = td.mean.mean;
  dec.space = space;
  dec.directions = std::move(dirs);
  dec.seen = covered;
  dec.diagnostics.mean_result = td.mean;
  dec.diagnostics.closeness = td.mean.closeness;
  dec.diagnostics.centering_residuals.assign(space.num_factors(), 0.0);
  return dec;
}

}  // namespace geodecomp
