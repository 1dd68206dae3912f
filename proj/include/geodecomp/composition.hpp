#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "geodecomp/geometry.hpp"

namespace geodecomp {

struct Factor {
  std::string name;
  std::vector<std::string> primitives;
};

using Tuple = std::vector<std::uint32_t>;  // one primitive index per factor
using TupleRef = std::span<const std::uint32_t>;

/// Cartesian product of named primitive lists. Tuples are addressed either as
/// per-factor index vectors or as a flat mixed-radix id in [0, total_tuples).
class CompositionSpace {
 public:
  CompositionSpace() = default;

  explicit CompositionSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw ConfigError("composition space needs at least one factor");
    offsets_.resize(factors_.size());
    lookup_.resize(factors_.size());
    std::size_t off = 0;
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      if (factors_[f].primitives.empty())
        throw ConfigError("factor '" + factors_[f].name + "' has no primitives");
      offsets_[f] = off;
      off += factors_[f].primitives.size();
      for (std::size_t i = 0; i < factors_[f].primitives.size(); ++i) {
        auto [it, inserted] = lookup_[f].emplace(factors_[f].primitives[i], static_cast<std::uint32_t>(i));
        if (!inserted)
          throw ConfigError("duplicate primitive '" + factors_[f].primitives[i] + "' in factor '" +
                            factors_[f].name + "'");
      }
    }
    total_primitives_ = off;
    strides_.assign(factors_.size(), 1);
    for (std::size_t f = factors_.size(); f-- > 1;)
      strides_[f - 1] = strides_[f] * factors_[f].primitives.size();
    total_tuples_ = strides_[0] * factors_[0].primitives.size();
  }

  std::size_t num_factors() const { return factors_.size(); }
  const std::vector<Factor>& factors() const { return factors_; }
  const Factor& factor(std::size_t f) const { return factors_[f]; }
  std::size_t factor_size(std::size_t f) const { return factors_[f].primitives.size(); }
  std::size_t total_primitives() const { return total_primitives_; }
  std::uint64_t total_tuples() const { return total_tuples_; }

  std::size_t primitive_flat(std::size_t f, std::uint32_t idx) const { return offsets_[f] + idx; }
  const std::string& primitive_name(std::size_t f, std::uint32_t idx) const {
    return factors_[f].primitives[idx];
  }

  std::uint32_t primitive_index(std::size_t f, const std::string& name) const {
    auto it = lookup_[f].find(name);
    if (it == lookup_[f].end())
      throw UnknownPrimitive("unknown primitive '" + name + "' in factor '" + factors_[f].name + "'",
                             {{"primitive", name}, {"factor", factors_[f].name}});
    return it->second;
  }

  // First factor containing the name, scanning in factor order.
  std::optional<std::pair<std::size_t, std::uint32_t>> find_primitive(const std::string& name) const {
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      auto it = lookup_[f].find(name);
      if (it != lookup_[f].end()) return std::make_pair(f, it->second);
    }
    return std::nullopt;
  }

  std::uint64_t tuple_id(TupleRef t) const {
    if (t.size() != factors_.size()) throw DimensionError("tuple arity does not match factor count");
    std::uint64_t id = 0;
    for (std::size_t f = 0; f < t.size(); ++f) {
      if (t[f] >= factors_[f].primitives.size())
        throw UnknownPrimitive("primitive index out of range in factor '" + factors_[f].name + "'");
      id += strides_[f] * t[f];
    }
    return id;
  }

  Tuple tuple_from_id(std::uint64_t id) const {
    Tuple t(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      t[f] = static_cast<std::uint32_t>(id / strides_[f]);
      id %= strides_[f];
    }
    return t;
  }

  std::vector<std::string> tuple_names(TupleRef t) const {
    std::vector<std::string> names(t.size());
    for (std::size_t f = 0; f < t.size(); ++f) names[f] = factors_[f].primitives[t[f]];
    return names;
  }

  std::string tuple_label(TupleRef t, char sep = '|') const {
    std::string s;
    for (std::size_t f = 0; f < t.size(); ++f) {
      if (f) s += sep;
      s += factors_[f].primitives[t[f]];
    }
    return s;
  }

  Tuple tuple_from_names(const std::vector<std::string>& names) const {
    if (names.size() != factors_.size()) throw DimensionError("tuple arity does not match factor count");
    Tuple t(names.size());
    for (std::size_t f = 0; f < names.size(); ++f) t[f] = primitive_index(f, names[f]);
    return t;
  }

  bool same_structure(const CompositionSpace& o) const {
    if (factors_.size() != o.factors_.size()) return false;
    for (std::size_t f = 0; f < factors_.size(); ++f)
      if (factors_[f].name != o.factors_[f].name || factors_[f].primitives != o.factors_[f].primitives)
        return false;
    return true;
  }

 private:
  std::vector<Factor> factors_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint64_t> strides_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> lookup_;
  std::size_t total_primitives_ = 0;
  std::uint64_t total_tuples_ = 0;
};

/// N embeddings, each tagged with a composite label and an opaque sample id.
/// Rows are validated against the geometry's membership constraint once, at
/// construction; downstream math relies on that.
class LabeledEmbeddingSet {
 public:
  LabeledEmbeddingSet(Geometry geometry, CompositionSpace space, RowMatrixXd rows,
                      std::vector<std::uint32_t> labels_flat, std::vector<std::string> sample_ids)
      : geometry_(geometry),
        space_(std::move(space)),
        rows_(std::move(rows)),
        labels_(std::move(labels_flat)),
        sample_ids_(std::move(sample_ids)) {
    const std::size_t n = static_cast<std::size_t>(rows_.rows());
    const std::size_t s = space_.num_factors();
    if (n == 0) throw EmptyInput("embedding set has no rows");
    if (rows_.cols() != geometry_.coord_dim())
      throw DimensionError("row width " + std::to_string(rows_.cols()) + " does not match geometry layout " +
                           std::to_string(geometry_.coord_dim()));
    if (labels_.size() != n * s) throw AlignmentError("label count does not match embedding row count");
    if (sample_ids_.size() != n) throw AlignmentError("sample id count does not match embedding row count");
    for (std::size_t i = 0; i < n; ++i) {
      check_on_manifold(geometry_, rows_.row(static_cast<Eigen::Index>(i)).transpose(),
                        "row " + std::to_string(i));
      for (std::size_t f = 0; f < s; ++f)
        if (labels_[i * s + f] >= space_.factor_size(f))
          throw UnknownPrimitive("label index out of range at row " + std::to_string(i));
    }
    index_tuples();
  }

  const Geometry& geometry() const { return geometry_; }
  const CompositionSpace& space() const { return space_; }
  const RowMatrixXd& rows() const { return rows_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  const std::vector<std::uint32_t>& labels_flat() const { return labels_; }

  TupleRef label(std::size_t i) const {
    return TupleRef(labels_.data() + i * space_.num_factors(), space_.num_factors());
  }
  std::uint64_t tuple_id_of_row(std::size_t i) const { return row_tuple_ids_[i]; }

  // Covered tuples Z' (sorted flat ids) and the rows carrying each of them.
  const std::vector<std::uint64_t>& covered_tuples() const { return covered_; }
  const std::vector<std::vector<std::uint32_t>>& rows_per_tuple() const { return tuple_rows_; }

  bool covers_all_tuples() const { return covered_.size() == space_.total_tuples(); }

  // Flat-primitive coverage counts (how many covered tuples contain each primitive).
  std::vector<std::uint32_t> primitive_coverage() const {
    std::vector<std::uint32_t> cov(space_.total_primitives(), 0);
    for (std::uint64_t id : covered_) {
      Tuple t = space_.tuple_from_id(id);
      for (std::size_t f = 0; f < t.size(); ++f) ++cov[space_.primitive_flat(f, t[f])];
    }
    return cov;
  }

 private:
  void index_tuples() {
    const std::size_t n = size();
    row_tuple_ids_.resize(n);
    std::unordered_map<std::uint64_t, std::uint32_t> pos;
    for (std::size_t i = 0; i < n; ++i) row_tuple_ids_[i] = space_.tuple_id(label(i));
    std::vector<std::uint64_t> ids = row_tuple_ids_;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    covered_ = std::move(ids);
    pos.reserve(covered_.size());
    for (std::uint32_t k = 0; k < covered_.size(); ++k) pos[covered_[k]] = k;
    tuple_rows_.assign(covered_.size(), {});
    for (std::size_t i = 0; i < n; ++i)
      tuple_rows_[pos[row_tuple_ids_[i]]].push_back(static_cast<std::uint32_t>(i));
  }

  Geometry geometry_;
  CompositionSpace space_;
  RowMatrixXd rows_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::string> sample_ids_;
  std::vector<std::uint64_t> row_tuple_ids_;
  std::vector<std::uint64_t> covered_;
  std::vector<std::vector<std::uint32_t>> tuple_rows_;
};

}  // namespace geodecomp
