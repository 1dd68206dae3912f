#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "geodecomp/eval.hpp"
#include "geodecomp/synthlab.hpp"

namespace geodecomp {

enum class TuneObjective { CzslAuc, WorstGroup };

inline const char* to_string(TuneObjective o) {
  return o == TuneObjective::CzslAuc ? "auc" : "worst-group";
}

struct TuneEntry {
  double temperature = 0.0;
  double score = 0.0;
  bool ok = false;
  std::string error;
};

struct TuneResult {
  double best_t = 0.0;
  std::vector<TuneEntry> table;  // in grid order
};

namespace detail {

inline std::vector<Tuple> candidate_union(const LabeledEmbeddingSet& train, const LabeledEmbeddingSet& val) {
  std::vector<std::uint64_t> ids = train.covered_tuples();
  ids.insert(ids.end(), val.covered_tuples().begin(), val.covered_tuples().end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<Tuple> out;
  out.reserve(ids.size());
  for (std::uint64_t id : ids) out.push_back(train.space().tuple_from_id(id));
  return out;
}

}  // namespace detail

/// Grid search over the score temperature: per grid point, rebuild the noise
/// distribution, re-run the sparse decomposition on the train split, and
/// evaluate the requested objective on the validation split. Ties break
/// toward the smaller temperature; failed grid points are recorded in the
/// table and excluded from the argmax.
inline TuneResult tune_temperature(const LabeledEmbeddingSet& train, const LabeledEmbeddingSet& val,
                                   const AnchorSet& anchors, const std::vector<double>& grid,
                                   TuneObjective objective, NoiseMode mode = NoiseMode::Softmax,
                                   double logit_bias = -16.5, std::size_t object_factor = std::size_t(-1),
                                   const DecomposeConfig& cfg = {}) {
  if (grid.empty()) throw ConfigError("temperature grid must be nonempty");
  if (mode == NoiseMode::Uniform) throw ConfigError("temperature tuning needs softmax or sigmoid scores");
  if (!train.space().same_structure(val.space()))
    throw ConfigError("train and validation splits use different composition spaces");
  if (object_factor == std::size_t(-1)) object_factor = train.space().num_factors() - 1;

  TuneResult result;
  result.table.reserve(grid.size());
  for (double t : grid) {
    TuneEntry entry;
    entry.temperature = t;
    try {
      NoiseModel noise = mode == NoiseMode::Softmax ? softmax_scores(train, anchors, t)
                                                    : sigmoid_scores(train, anchors, t, logit_bias);
      Decomposition dec = decompose_sparse(train, noise, cfg);
      if (objective == TuneObjective::CzslAuc) {
        std::vector<Tuple> candidates = detail::candidate_union(train, val);
        ClassifierBank bank = make_pair_bank(dec, candidates);
        std::vector<bool> seen(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c)
          seen[c] = dec.is_seen(train.space().tuple_id(candidates[c]));
        std::vector<std::vector<std::string>> truths(val.size());
        for (std::size_t q = 0; q < val.size(); ++q) truths[q] = val.space().tuple_names(val.label(q));
        CZSLReport rep = czsl_evaluate(bank, val.rows(), truths, seen, BiasGridPolicy::Exact);
        if (std::isnan(rep.auc)) throw TuningError("AUC undefined on this validation split");
        entry.score = rep.auc;
      } else {
        ClassifierBank bank = make_object_bank(dec, object_factor);
        std::vector<std::string> truths(val.size()), groups(val.size());
        for (std::size_t q = 0; q < val.size(); ++q) {
          truths[q] = val.space().primitive_name(object_factor, val.label(q)[object_factor]);
          groups[q] = val.space().tuple_label(val.label(q));
        }
        GroupReport rep = group_evaluate(bank, val.rows(), truths, groups);
        entry.score = rep.worst_group;
      }
      entry.ok = true;
    } catch (const Error& e) {
      entry.error = std::string(e.code()) + ": " + e.what();
    }
    result.table.push_back(entry);
  }

  const TuneEntry* best = nullptr;
  for (const auto& e : result.table) {
    if (!e.ok) continue;
    if (!best || e.score > best->score || (e.score == best->score && e.temperature < best->temperature))
      best = &e;
  }
  if (!best) throw TuningError("every grid point failed");
  result.best_t = best->temperature;
  return result;
}

}  // namespace geodecomp
