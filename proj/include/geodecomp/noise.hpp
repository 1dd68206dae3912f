#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "geodecomp/composition.hpp"

namespace geodecomp {

enum class NoiseMode { Uniform, Softmax, Sigmoid };

inline const char* to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::Uniform: return "uniform";
    case NoiseMode::Softmax: return "softmax";
    case NoiseMode::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline NoiseMode noise_mode_from_string(const std::string& s) {
  if (s == "uniform") return NoiseMode::Uniform;
  if (s == "softmax") return NoiseMode::Softmax;
  if (s == "sigmoid") return NoiseMode::Sigmoid;
  throw ConfigError("unknown noise mode: " + s);
}

/// Per-sample scores p_{(z,e)}; within every covered tuple they sum to 1.
struct NoiseModel {
  NoiseMode mode = NoiseMode::Uniform;
  Eigen::VectorXd probs;  // aligned with the set's rows
  double temperature = 1.0;
  double logit_bias = -16.5;
};

/// One anchor embedding per covered tuple (typically text embeddings of the
/// tuple's prompt).
class AnchorSet {
 public:
  AnchorSet(Geometry geometry, RowMatrixXd rows, std::vector<std::uint64_t> tuple_ids)
      : geometry_(geometry), rows_(std::move(rows)), tuple_ids_(std::move(tuple_ids)) {
    if (static_cast<std::size_t>(rows_.rows()) != tuple_ids_.size())
      throw AlignmentError("anchor rows and tuple ids differ in count");
    for (std::size_t i = 0; i < tuple_ids_.size(); ++i) {
      check_on_manifold(geometry_, rows_.row(static_cast<Eigen::Index>(i)).transpose(),
                        "anchor " + std::to_string(i));
      index_[tuple_ids_[i]] = static_cast<std::uint32_t>(i);
    }
  }

  const Geometry& geometry() const { return geometry_; }

  const std::uint32_t* row_for(std::uint64_t tuple_id) const {
    auto it = index_.find(tuple_id);
    return it == index_.end() ? nullptr : &it->second;
  }

  ConstRowRef row(std::uint32_t i) const { return rows_.row(i).transpose(); }

 private:
  Geometry geometry_;
  RowMatrixXd rows_;
  std::vector<std::uint64_t> tuple_ids_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

inline void validate_noise(const LabeledEmbeddingSet& set, const NoiseModel& noise) {
  if (noise.probs.size() != static_cast<Eigen::Index>(set.size()))
    throw AlignmentError("noise scores do not align with the embedding rows");
  for (Eigen::Index i = 0; i < noise.probs.size(); ++i)
    if (!(noise.probs(i) >= 0.0)) throw DegenerateNoise("noise score at row " + std::to_string(i) + " is negative or non-finite");
  const auto& covered = set.covered_tuples();
  const auto& per_tuple = set.rows_per_tuple();
  for (std::size_t k = 0; k < covered.size(); ++k) {
    double s = 0.0;
    for (std::uint32_t r : per_tuple[k]) s += noise.probs(r);
    if (std::abs(s - 1.0) > 1e-9)
      throw DegenerateNoise("noise scores of tuple '" + set.space().tuple_label(set.space().tuple_from_id(covered[k])) +
                                "' sum to " + std::to_string(s),
                            {{"tuple", set.space().tuple_label(set.space().tuple_from_id(covered[k]))}});
  }
}

inline NoiseModel uniform_scores(const LabeledEmbeddingSet& set) {
  NoiseModel m;
  m.mode = NoiseMode::Uniform;
  m.probs.resize(static_cast<Eigen::Index>(set.size()));
  const auto& per_tuple = set.rows_per_tuple();
  for (const auto& rows : per_tuple) {
    double p = 1.0 / static_cast<double>(rows.size());
    for (std::uint32_t r : rows) m.probs(r) = p;
  }
  return m;
}

namespace detail {

inline Eigen::VectorXd anchor_similarities(const LabeledEmbeddingSet& set, const AnchorSet& anchors,
                                           std::size_t tuple_pos) {
  const auto& rows = set.rows_per_tuple()[tuple_pos];
  std::uint64_t id = set.covered_tuples()[tuple_pos];
  const std::uint32_t* a = anchors.row_for(id);
  if (!a)
    throw MissingAnchor("no anchor for covered tuple '" +
                            set.space().tuple_label(set.space().tuple_from_id(id)) + "'",
                        {{"tuple", set.space().tuple_label(set.space().tuple_from_id(id))}});
  Eigen::VectorXd sims(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    sims(static_cast<Eigen::Index>(j)) = set.rows().row(rows[j]).transpose().dot(anchors.row(*a));
  return sims;
}

inline void require_sphere_scoring(const LabeledEmbeddingSet& set, const AnchorSet& anchors) {
  if (set.geometry().kind != GeometryKind::Sphere)
    throw ConfigError("similarity-based noise scores require sphere geometry");
  require_same_geometry(set.geometry(), anchors.geometry());
}

}  // namespace detail

/// Image-to-text softmax over the samples of each tuple, computed with
/// max-subtraction for stability.
inline NoiseModel softmax_scores(const LabeledEmbeddingSet& set, const AnchorSet& anchors, double t) {
  if (!(t > 0.0)) throw ConfigError("temperature must be positive");
  detail::require_sphere_scoring(set, anchors);
  NoiseModel m;
  m.mode = NoiseMode::Softmax;
  m.temperature = t;
  m.probs.resize(static_cast<Eigen::Index>(set.size()));
  const auto& per_tuple = set.rows_per_tuple();
  for (std::size_t k = 0; k < per_tuple.size(); ++k) {
    Eigen::VectorXd logits = detail::anchor_similarities(set, anchors, k) / t;
    double mx = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - mx).exp();
    e /= e.sum();
    for (std::size_t j = 0; j < per_tuple[k].size(); ++j)
      m.probs(per_tuple[k][j]) = e(static_cast<Eigen::Index>(j));
  }
  return m;
}

/// Per-sample sigmoid scores sigma(sim/t + b), renormalized within each tuple.
inline NoiseModel sigmoid_scores(const LabeledEmbeddingSet& set, const AnchorSet& anchors, double t,
                                 double b = -16.5) {
  if (!(t > 0.0)) throw ConfigError("temperature must be positive");
  detail::require_sphere_scoring(set, anchors);
  NoiseModel m;
  m.mode = NoiseMode::Sigmoid;
  m.temperature = t;
  m.logit_bias = b;
  m.probs.resize(static_cast<Eigen::Index>(set.size()));
  const auto& per_tuple = set.rows_per_tuple();
  for (std::size_t k = 0; k < per_tuple.size(); ++k) {
    Eigen::VectorXd sims = detail::anchor_similarities(set, anchors, k);
    Eigen::VectorXd raw(sims.size());
    for (Eigen::Index j = 0; j < sims.size(); ++j) raw(j) = 1.0 / (1.0 + std::exp(-(sims(j) / t + b)));
    double s = raw.sum();
    if (s <= 0.0)
      throw DegenerateNoise("sigmoid scores of tuple '" +
                            set.space().tuple_label(set.space().tuple_from_id(set.covered_tuples()[k])) +
                            "' all underflowed to zero");
    raw /= s;
    for (std::size_t j = 0; j < per_tuple[k].size(); ++j)
      m.probs(per_tuple[k][j]) = raw(static_cast<Eigen::Index>(j));
  }
  return m;
}

}  // namespace geodecomp
