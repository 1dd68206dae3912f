#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geodecomp/decompose.hpp"

namespace geodecomp {

/// Candidate anchors for nearest-anchor classification. Labels are tuples of
/// primitive names (length 1 for object-only banks).
struct ClassifierBank {
  Geometry geometry;
  std::vector<std::vector<std::string>> labels;
  RowMatrixXd anchors;

  std::size_t size() const { return labels.size(); }
};

inline ClassifierBank make_pair_bank(const Decomposition& dec, const std::vector<Tuple>& candidates) {
  if (candidates.empty()) throw EmptyInput("candidate set is empty");
  ClassifierBank bank;
  bank.geometry = dec.mu.geometry;
  bank.anchors.resize(static_cast<Eigen::Index>(candidates.size()), bank.geometry.coord_dim());
  bank.labels.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bank.anchors.row(static_cast<Eigen::Index>(i)) = compose(dec, candidates[i]).coords;
    bank.labels.push_back(dec.space.tuple_names(candidates[i]));
  }
  return bank;
}

/// Object anchors Exp_mu(v_o): the debiased per-class classifiers.
inline ClassifierBank make_object_bank(const Decomposition& dec, std::size_t object_factor) {
  if (object_factor >= dec.space.num_factors()) throw ConfigError("object factor index out of range");
  const Geometry& g = dec.mu.geometry;
  ClassifierBank bank;
  bank.geometry = g;
  std::size_t n = dec.space.factor_size(object_factor);
  bank.anchors.resize(static_cast<Eigen::Index>(n), g.coord_dim());
  for (std::uint32_t i = 0; i < n; ++i) {
    Eigen::VectorXd out;
    detail::exp(g, dec.mu.coords, dec.direction(object_factor, i), out);
    bank.anchors.row(i) = out;
    bank.labels.push_back({dec.space.primitive_name(object_factor, i)});
  }
  return bank;
}

namespace detail {

// Inner-product similarity on sphere/Euclidean geometry, negative geodesic
// distance on the Lorentz model (whose inner product is not a similarity).
inline double anchor_score(const Geometry& g, ConstRowRef anchor, ConstRowRef query) {
  if (g.kind == GeometryKind::Lorentz) return -dist(g, anchor, query);
  return anchor.dot(query);
}

inline bool label_less(const std::vector<std::string>& a, const std::vector<std::string>& b) { return a < b; }

// Best candidate among those with keep[i] set, ties to the lexicographically
// smallest label.
struct BestCandidate {
  double score = -std::numeric_limits<double>::infinity();
  std::ptrdiff_t index = -1;
};

inline BestCandidate best_over(const ClassifierBank& bank, ConstRowRef query, const std::vector<char>& keep) {
  BestCandidate best;
  for (std::size_t c = 0; c < bank.size(); ++c) {
    if (!keep[c]) continue;
    double s = anchor_score(bank.geometry, bank.anchors.row(static_cast<Eigen::Index>(c)).transpose(), query);
    if (s > best.score ||
        (s == best.score && best.index >= 0 &&
         label_less(bank.labels[c], bank.labels[static_cast<std::size_t>(best.index)]))) {
      best.score = s;
      best.index = static_cast<std::ptrdiff_t>(c);
    }
  }
  return best;
}

}  // namespace detail

struct PredictResult {
  std::vector<std::size_t> argmax;            // predicted candidate per query
  std::vector<std::vector<std::string>> labels;  // predicted labels per query
  Eigen::MatrixXd scores;                     // queries x candidates (biased)
};

/// score(x, z) + unseen_bias for z outside the seen set; argmax prediction
/// with lexicographic tie-breaking. A bias of +/-inf restricts the argmax to
/// unseen-only / seen-only candidates.
inline PredictResult predict(const ClassifierBank& bank, const RowMatrixXd& queries, double unseen_bias,
                             const std::vector<bool>& is_seen) {
  if (bank.size() == 0) throw EmptyInput("classifier bank has no candidates");
  if (is_seen.size() != bank.size()) throw AlignmentError("seen flags do not align with candidates");
  if (queries.cols() != bank.geometry.coord_dim()) throw DimensionError("query width does not match geometry");
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    check_on_manifold(bank.geometry, queries.row(i).transpose(), "query " + std::to_string(i));

  PredictResult res;
  res.scores.resize(queries.rows(), static_cast<Eigen::Index>(bank.size()));
  res.argmax.resize(static_cast<std::size_t>(queries.rows()));
  res.labels.resize(static_cast<std::size_t>(queries.rows()));
  std::vector<char> keep_all(bank.size(), 1), keep_seen(bank.size()), keep_unseen(bank.size());
  for (std::size_t c = 0; c < bank.size(); ++c) {
    keep_seen[c] = is_seen[c] ? 1 : 0;
    keep_unseen[c] = is_seen[c] ? 0 : 1;
  }
  const bool inf_bias = std::isinf(unseen_bias);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (std::size_t c = 0; c < bank.size(); ++c) {
      double s = detail::anchor_score(bank.geometry, bank.anchors.row(static_cast<Eigen::Index>(c)).transpose(),
                                      queries.row(q).transpose());
      res.scores(q, static_cast<Eigen::Index>(c)) = inf_bias ? s : s + (is_seen[c] ? 0.0 : unseen_bias);
    }
    detail::BestCandidate best;
    if (!inf_bias) {
      for (std::size_t c = 0; c < bank.size(); ++c) {
        double s = res.scores(q, static_cast<Eigen::Index>(c));
        if (s > best.score ||
            (s == best.score && best.index >= 0 &&
             detail::label_less(bank.labels[c], bank.labels[static_cast<std::size_t>(best.index)]))) {
          best.score = s;
          best.index = static_cast<std::ptrdiff_t>(c);
        }
      }
    } else {
      const auto& keep = unseen_bias > 0 ? keep_unseen : keep_seen;
      best = detail::best_over(bank, queries.row(q).transpose(), keep);
      if (best.index < 0) best = detail::best_over(bank, queries.row(q).transpose(), keep_all);
    }
    res.argmax[static_cast<std::size_t>(q)] = static_cast<std::size_t>(best.index);
    res.labels[static_cast<std::size_t>(q)] = bank.labels[static_cast<std::size_t>(best.index)];
  }
  return res;
}

struct CZSLReport {
  double attr_acc = 0.0;
  double obj_acc = 0.0;
  double best_seen = 0.0;
  double best_unseen = 0.0;
  double best_hm = 0.0;
  double auc = 0.0;
  struct Point {
    double bias;  // +/-inf for the sentinel sweeps
    double seen_acc;
    double unseen_acc;
  };
  std::vector<Point> curve;
  std::vector<std::string> diagnostics;
};

enum class BiasGridPolicy { Exact, Uniform };

namespace detail {

struct QueryReduction {
  BestCandidate seen;    // best seen candidate
  BestCandidate unseen;  // best unseen candidate
  bool truth_seen = false;
  std::ptrdiff_t truth_index = -1;  // candidate index of the true label, -1 if absent
};

inline std::vector<QueryReduction> reduce_queries(const ClassifierBank& bank, const RowMatrixXd& queries,
                                                  const std::vector<std::vector<std::string>>& truths,
                                                  const std::vector<bool>& is_seen) {
  if (bank.size() == 0) throw EmptyInput("classifier bank has no candidates");
  if (static_cast<std::size_t>(queries.rows()) != truths.size())
    throw AlignmentError("true labels do not align with queries");
  std::map<std::vector<std::string>, std::size_t> index;
  for (std::size_t c = 0; c < bank.size(); ++c) index[bank.labels[c]] = c;
  std::vector<char> keep_seen(bank.size()), keep_unseen(bank.size());
  for (std::size_t c = 0; c < bank.size(); ++c) {
    keep_seen[c] = is_seen[c] ? 1 : 0;
    keep_unseen[c] = is_seen[c] ? 0 : 1;
  }
  std::vector<QueryReduction> red(truths.size());
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    check_on_manifold(bank.geometry, queries.row(q).transpose(), "query " + std::to_string(q));
    auto& r = red[static_cast<std::size_t>(q)];
    r.seen = best_over(bank, queries.row(q).transpose(), keep_seen);
    r.unseen = best_over(bank, queries.row(q).transpose(), keep_unseen);
    auto it = index.find(truths[static_cast<std::size_t>(q)]);
    if (it != index.end()) {
      r.truth_index = static_cast<std::ptrdiff_t>(it->second);
      r.truth_seen = is_seen[it->second];
    }
  }
  return red;
}

// Prediction at a given bias from the per-query reduction; matches predict().
inline std::ptrdiff_t biased_argmax(const QueryReduction& r, const ClassifierBank& bank, double bias) {
  const bool has_seen = r.seen.index >= 0;
  const bool has_unseen = r.unseen.index >= 0;
  if (!has_seen) return r.unseen.index;
  if (!has_unseen) return r.seen.index;
  if (std::isinf(bias)) return bias > 0 ? r.unseen.index : r.seen.index;
  double u = r.unseen.score + bias;
  if (r.seen.score > u) return r.seen.index;
  if (r.seen.score < u) return r.unseen.index;
  return label_less(bank.labels[static_cast<std::size_t>(r.seen.index)],
                    bank.labels[static_cast<std::size_t>(r.unseen.index)])
             ? r.seen.index
             : r.unseen.index;
}

inline std::vector<double> default_bias_grid(const std::vector<QueryReduction>& red, BiasGridPolicy policy,
                                             int uniform_points = 201) {
  std::vector<double> diffs;
  for (const auto& r : red)
    if (r.seen.index >= 0 && r.unseen.index >= 0) diffs.push_back(r.seen.score - r.unseen.score);
  std::sort(diffs.begin(), diffs.end());
  diffs.erase(std::unique(diffs.begin(), diffs.end()), diffs.end());
  std::vector<double> grid;
  const double inf = std::numeric_limits<double>::infinity();
  grid.push_back(-inf);
  if (policy == BiasGridPolicy::Exact) {
    // Flip points plus midpoints: the midpoints pin down the open intervals,
    // where tie-breaking at the flip bias could mask a configuration.
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      grid.push_back(diffs[i]);
      if (i + 1 < diffs.size()) grid.push_back(0.5 * (diffs[i] + diffs[i + 1]));
    }
  } else if (!diffs.empty()) {
    double lo = diffs.front(), hi = diffs.back();
    if (uniform_points < 2 || lo == hi) {
      grid.push_back(lo);
    } else {
      for (int i = 0; i < uniform_points; ++i)
        grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(uniform_points - 1));
    }
  }
  grid.push_back(inf);
  return grid;
}

// Area under the monotone staircase: Pareto frontier of (seen, unseen)
// points, anchored at seen = 0, integrated by the trapezoid rule.
inline double seen_unseen_auc(const std::vector<std::pair<double, double>>& points) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : points)
    if (!std::isnan(p.first) && !std::isnan(p.second)) pts.push_back(p);
  if (pts.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  std::vector<std::pair<double, double>> frontier;
  double best_u = -1.0;
  for (const auto& p : pts) {  // descending seen: keep strictly improving unseen
    if (p.second > best_u) {
      frontier.push_back(p);
      best_u = p.second;
    }
  }
  std::reverse(frontier.begin(), frontier.end());  // ascending seen, descending unseen
  double auc = 0.0;
  double prev_s = 0.0, prev_u = frontier.front().second;
  for (const auto& [s, u] : frontier) {
    auc += (s - prev_s) * 0.5 * (u + prev_u);
    prev_s = s;
    prev_u = u;
  }
  return auc;
}

}  // namespace detail

/// Generalized compositional evaluation: bias sweep over the grid, per-bias
/// seen/unseen accuracies, maxima, harmonic mean, and the seen-unseen AUC.
/// ATTR/OBJ component accuracies are taken from the bias-0 predictions.
inline CZSLReport czsl_evaluate(const ClassifierBank& bank, const RowMatrixXd& queries,
                                const std::vector<std::vector<std::string>>& truths,
                                const std::vector<bool>& is_seen, const std::vector<double>& bias_grid) {
  if (bias_grid.empty()) throw ConfigError("bias grid must be nonempty");
  auto red = detail::reduce_queries(bank, queries, truths, is_seen);

  CZSLReport rep;
  const std::size_t nq = red.size();
  std::size_t n_seen_q = 0, n_unseen_q = 0;
  for (const auto& r : red) (r.truth_seen ? n_seen_q : n_unseen_q) += 1;
  if (n_unseen_q == 0) rep.diagnostics.push_back("degenerate split: no test queries with unseen true pairs");
  if (n_seen_q == 0) rep.diagnostics.push_back("degenerate split: no test queries with seen true pairs");

  // component accuracies at bias 0
  if (nq > 0) {
    std::size_t attr_ok = 0, obj_ok = 0;
    const std::size_t s = bank.labels.front().size();
    for (const auto& r : red) {
      std::ptrdiff_t p = detail::biased_argmax(r, bank, 0.0);
      if (p < 0 || r.truth_index < 0) continue;
      const auto& pl = bank.labels[static_cast<std::size_t>(p)];
      const auto& tl = bank.labels[static_cast<std::size_t>(r.truth_index)];
      if (pl.front() == tl.front()) ++attr_ok;
      if (pl[s - 1] == tl[s - 1]) ++obj_ok;
    }
    rep.attr_acc = static_cast<double>(attr_ok) / static_cast<double>(nq);
    rep.obj_acc = static_cast<double>(obj_ok) / static_cast<double>(nq);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<double, double>> curve_points;
  double best_seen = nan, best_unseen = nan, best_hm = nan;
  for (double bias : bias_grid) {
    std::size_t seen_ok = 0, unseen_ok = 0;
    for (const auto& r : red) {
      std::ptrdiff_t p = detail::biased_argmax(r, bank, bias);
      bool ok = p >= 0 && p == r.truth_index;
      if (r.truth_seen) seen_ok += ok ? 1 : 0;
      else unseen_ok += ok ? 1 : 0;
    }
    double sa = n_seen_q ? static_cast<double>(seen_ok) / static_cast<double>(n_seen_q) : nan;
    double ua = n_unseen_q ? static_cast<double>(unseen_ok) / static_cast<double>(n_unseen_q) : nan;
    rep.curve.push_back({bias, sa, ua});
    curve_points.emplace_back(sa, ua);
    if (!std::isnan(sa) && !(sa <= best_seen)) best_seen = sa;
    if (!std::isnan(ua) && !(ua <= best_unseen)) best_unseen = ua;
    if (!std::isnan(sa) && !std::isnan(ua)) {
      double hm = (sa + ua) > 0.0 ? 2.0 * sa * ua / (sa + ua) : 0.0;
      if (!(hm <= best_hm)) best_hm = hm;
    }
  }
  rep.best_seen = best_seen;
  rep.best_unseen = best_unseen;
  rep.best_hm = best_hm;
  rep.auc = detail::seen_unseen_auc(curve_points);
  return rep;
}

inline CZSLReport czsl_evaluate(const ClassifierBank& bank, const RowMatrixXd& queries,
                                const std::vector<std::vector<std::string>>& truths,
                                const std::vector<bool>& is_seen,
                                BiasGridPolicy policy = BiasGridPolicy::Exact, int uniform_points = 201) {
  auto red = detail::reduce_queries(bank, queries, truths, is_seen);
  return czsl_evaluate(bank, queries, truths, is_seen, detail::default_bias_grid(red, policy, uniform_points));
}

/// Relative performance in percent.
inline double auc_ratio(double auc, double baseline_auc) {
  if (baseline_auc == 0.0) throw DivisionByZero("baseline AUC is zero");
  if (!(baseline_auc > 0.0)) throw DivisionByZero("baseline AUC must be positive");
  return 100.0 * auc / baseline_auc;
}

struct GroupReport {
  double worst_group = 0.0;
  double avg = 0.0;  // unweighted mean of per-group accuracies
  double gap = 0.0;  // avg - worst_group
  double avg_sample_weighted = 0.0;
  std::map<std::string, double> per_group;
  std::vector<std::string> excluded_groups;  // declared groups with no queries
};

/// Per-group accuracy of the object classifier; WG is the minimum, AVG the
/// unweighted group mean, GAP their difference.
inline GroupReport group_evaluate(const ClassifierBank& bank, const RowMatrixXd& queries,
                                  const std::vector<std::string>& true_objects,
                                  const std::vector<std::string>& groups,
                                  const std::vector<std::string>& declared_groups = {}) {
  if (bank.size() == 0) throw EmptyInput("classifier bank has no candidates");
  if (static_cast<std::size_t>(queries.rows()) != true_objects.size() || true_objects.size() != groups.size())
    throw AlignmentError("queries, labels, and groups must align");
  std::vector<bool> seen(bank.size(), true);
  PredictResult pred = predict(bank, queries, 0.0, seen);
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // group -> (correct, total)
  for (std::size_t q = 0; q < true_objects.size(); ++q) {
    auto& t = tally[groups[q]];
    t.second += 1;
    if (pred.labels[q].front() == true_objects[q]) t.first += 1;
  }
  GroupReport rep;
  for (const auto& g : declared_groups)
    if (!tally.count(g)) rep.excluded_groups.push_back(g);
  double sum = 0.0;
  std::size_t correct = 0, total = 0;
  rep.worst_group = 1.0;
  for (const auto& [g, t] : tally) {
    double acc = static_cast<double>(t.first) / static_cast<double>(t.second);
    rep.per_group[g] = acc;
    sum += acc;
    correct += t.first;
    total += t.second;
    rep.worst_group = std::min(rep.worst_group, acc);
  }
  if (tally.empty()) throw EmptyInput("no queries to evaluate");
  rep.avg = sum / static_cast<double>(tally.size());
  rep.gap = rep.avg - rep.worst_group;
  rep.avg_sample_weighted = static_cast<double>(correct) / static_cast<double>(total);
  return rep;
}

struct PcaResult {
  Eigen::MatrixXd coords;  // n x out_dim, zero-filled beyond the rank
  std::vector<double> explained_variance;  // fraction per retained axis
  int rank = 0;
  std::vector<std::string> diagnostics;
  Eigen::RowVectorXd center;  // mean of the fitted vectors
  Eigen::MatrixXd axes;       // coord_dim x out_dim (zero columns beyond rank)

  // Maps further vectors from the same tangent space onto the fitted axes.
  Eigen::MatrixXd transform(const RowMatrixXd& vectors) const {
    return (vectors.rowwise() - center) * axes;
  }
};

/// Centered SVD projection of tangent vectors sharing a base point. Axis
/// signs follow a fixed convention: the largest-magnitude loading of every
/// axis is positive.
inline PcaResult pca_project(const RowMatrixXd& tangents, int out_dim) {
  if (out_dim != 2 && out_dim != 3) throw ConfigError("out_dim must be 2 or 3");
  if (tangents.rows() < out_dim + 1)
    throw EmptyInput("need at least out_dim + 1 vectors, got " + std::to_string(tangents.rows()));
  Eigen::RowVectorXd mean = tangents.colwise().mean();
  Eigen::MatrixXd centered = tangents.rowwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * smax && sv(i) > 0.0) ++rank;
  PcaResult res;
  res.rank = std::min(rank, out_dim);
  res.coords = Eigen::MatrixXd::Zero(tangents.rows(), out_dim);
  res.center = mean;
  res.axes = Eigen::MatrixXd::Zero(tangents.cols(), out_dim);
  double total_var = sv.squaredNorm();
  for (int j = 0; j < res.rank; ++j) {
    Eigen::VectorXd axis = svd.matrixV().col(j);
    Eigen::Index imax = 0;
    axis.cwiseAbs().maxCoeff(&imax);
    if (axis(imax) < 0.0) axis = -axis;
    res.axes.col(j) = axis;
    res.coords.col(j) = centered * axis;
    res.explained_variance.push_back(total_var > 0.0 ? sv(j) * sv(j) / total_var : 0.0);
  }
  for (int j = res.rank; j < out_dim; ++j) res.explained_variance.push_back(0.0);
  if (res.rank < out_dim)
    res.diagnostics.push_back("rank " + std::to_string(res.rank) + " < requested " + std::to_string(out_dim) +
                              "; trailing coordinates are zero");
  return res;
}

inline PcaResult pca_project(const std::vector<TangentVector>& vectors, int out_dim) {
  if (vectors.empty()) throw EmptyInput("no tangent vectors");
  const auto& base = vectors.front().base;
  RowMatrixXd m(vectors.size(), base.coords.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if ((vectors[i].base.coords - base.coords).norm() > kTangencyTol)
      throw ConfigError("tangent vectors must share a base point");
    m.row(static_cast<Eigen::Index>(i)) = vectors[i].coords;
  }
  return pca_project(m, out_dim);
}

}  // namespace geodecomp
