#pragma once

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geodecomp/decompose.hpp"
#include "geodecomp/detail/base64.hpp"
#include "geodecomp/eval.hpp"
#include "geodecomp/noise.hpp"
#include "geodecomp/tuning.hpp"

namespace geodecomp {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

// ---------------------------------------------------------------------------
// Canonical JSON: sorted keys (nlohmann's default object ordering), floats as
// %.6f, non-finite floats as null. Byte-stable across runs, diffable.
// ---------------------------------------------------------------------------

namespace detail {

inline void canonical_dump_impl(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        canonical_dump_impl(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        canonical_dump_impl(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        out += buf;
      }
      break;
    }
    default:
      out += j.dump();
      break;
  }
}

}  // namespace detail

inline std::string canonical_dump(const json& j) {
  std::string out;
  detail::canonical_dump_impl(j, out);
  return out;
}

// Write-to-temp plus atomic rename; no partial files on failure.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

inline void write_json_canonical(const std::string& path, const json& j) {
  write_file_atomic(path, canonical_dump(j) + "\n");
}

// ---------------------------------------------------------------------------
// Embedding file ("GDE1"): magic, geometry kind byte, u32 N, u32 cols,
// N*cols float32 little-endian row-major payload. See docs/formats.md.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint8_t kind_byte(GeometryKind k) {
  switch (k) {
    case GeometryKind::Sphere: return 0;
    case GeometryKind::Lorentz: return 1;
    case GeometryKind::Euclidean: return 2;
  }
  return 0xff;
}

inline GeometryKind kind_from_byte(std::uint8_t b) {
  switch (b) {
    case 0: return GeometryKind::Sphere;
    case 1: return GeometryKind::Lorentz;
    case 2: return GeometryKind::Euclidean;
    default: throw FormatError("unknown geometry kind byte " + std::to_string(b));
  }
}

inline Geometry geometry_for_cols(GeometryKind kind, Eigen::Index cols, double curvature) {
  Geometry g;
  g.kind = kind;
  g.ambient_dim = kind == GeometryKind::Lorentz ? static_cast<int>(cols) - 1 : static_cast<int>(cols);
  g.curvature = curvature;
  if (g.ambient_dim < 1) throw FormatError("embedding width too small for the geometry");
  return g;
}

}  // namespace detail

struct EmbeddingData {
  GeometryKind kind = GeometryKind::Sphere;
  RowMatrixXd rows;  // promoted to float64 and re-projected onto the manifold
};

inline void write_embeddings(const std::string& path, GeometryKind kind, const RowMatrixXd& rows) {
  if (!rows.allFinite()) throw DataError("refusing to write non-finite embeddings");
  std::string bytes;
  const std::uint32_t n = static_cast<std::uint32_t>(rows.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(rows.cols());
  bytes.reserve(13 + 4ull * n * d);
  bytes += "GDE1";
  bytes.push_back(static_cast<char>(detail::kind_byte(kind)));
  bytes.append(reinterpret_cast<const char*>(&n), 4);
  bytes.append(reinterpret_cast<const char*>(&d), 4);
  std::vector<float> payload(static_cast<std::size_t>(n) * d);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j)
      payload[static_cast<std::size_t>(i) * d + j] = static_cast<float>(rows(i, j));
  bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size() * 4);
  write_file_atomic(path, bytes);
}

inline EmbeddingData read_embeddings(const std::string& path, double curvature = 1.0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "GDE1")
    throw FormatError("bad magic in " + path + " (expected GDE1)");
  std::uint8_t kind_byte = 0;
  std::uint32_t n = 0, d = 0;
  if (!is.read(reinterpret_cast<char*>(&kind_byte), 1) || !is.read(reinterpret_cast<char*>(&n), 4) ||
      !is.read(reinterpret_cast<char*>(&d), 4))
    throw TruncationError("embedding header truncated in " + path);
  EmbeddingData out;
  out.kind = detail::kind_from_byte(kind_byte);
  if (n == 0) throw EmptyInput("embedding file " + path + " holds zero rows");
  if (d == 0) throw FormatError("embedding file " + path + " declares zero columns");
  std::vector<float> payload(static_cast<std::size_t>(n) * d);
  if (!is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4)))
    throw TruncationError("embedding payload truncated in " + path + " (expected " +
                          std::to_string(payload.size() * 4) + " bytes)");
  char extra;
  if (is.read(&extra, 1)) throw FormatError("trailing bytes after the declared payload in " + path);

  Geometry g = detail::geometry_for_cols(out.kind, static_cast<Eigen::Index>(d), curvature);
  out.rows.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      float v = payload[static_cast<std::size_t>(i) * d + j];
      if (!std::isfinite(v))
        throw DataError("non-finite value at row " + std::to_string(i), {{"row", std::to_string(i)}});
      out.rows(i, j) = static_cast<double>(v);
    }
    Eigen::VectorXd row = out.rows.row(i).transpose();
    detail::reproject(g, row);  // cancel float32 quantization drift
    out.rows.row(i) = row;
    check_on_manifold(g, out.rows.row(i).transpose(), "row " + std::to_string(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label file: UTF-8 TSV, header `sample_id<TAB>factor...`, one row per
// embedding row, in order.
// ---------------------------------------------------------------------------

struct LabelData {
  CompositionSpace space;
  std::vector<std::uint32_t> labels;  // N x s flat
  std::vector<std::string> sample_ids;
};

namespace detail {

inline std::vector<std::string> split_tsv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline LabelData read_labels_impl(const std::string& path, const CompositionSpace* expected) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("label file " + path + " is empty");
  std::vector<std::string> header = split_tsv_line(line);
  if (header.size() < 2 || header[0] != "sample_id")
    throw FormatError("label header must start with 'sample_id' followed by factor names");
  const std::size_t s = header.size() - 1;

  std::vector<Factor> factors(s);
  for (std::size_t f = 0; f < s; ++f) factors[f].name = header[f + 1];
  if (expected) {
    if (expected->num_factors() != s) throw FormatError("label file factor count does not match the space");
    for (std::size_t f = 0; f < s; ++f)
      if (expected->factor(f).name != factors[f].name)
        throw FormatError("label file factor '" + factors[f].name + "' does not match the space's '" +
                          expected->factor(f).name + "'");
  }

  LabelData out;
  std::vector<std::unordered_map<std::string, std::uint32_t>> seen(s);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() && is.peek() == std::ifstream::traits_type::eof()) break;  // trailing newline
    std::vector<std::string> fields = split_tsv_line(line);
    if (fields.size() != s + 1)
      throw FormatError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(s + 1));
    for (const auto& fld : fields)
      if (fld.empty()) throw FormatError("empty field at line " + std::to_string(line_no));
    out.sample_ids.push_back(fields[0]);
    for (std::size_t f = 0; f < s; ++f) {
      const std::string& name = fields[f + 1];
      if (expected) {
        try {
          out.labels.push_back(expected->primitive_index(f, name));
        } catch (const UnknownPrimitive&) {
          throw UnknownPrimitive("unknown primitive '" + name + "' at line " + std::to_string(line_no),
                                 {{"primitive", name}, {"line", std::to_string(line_no)}});
        }
      } else {
        auto [it, inserted] = seen[f].emplace(name, static_cast<std::uint32_t>(factors[f].primitives.size()));
        if (inserted) factors[f].primitives.push_back(name);
        out.labels.push_back(it->second);
      }
    }
  }
  if (out.sample_ids.empty()) throw EmptyInput("label file " + path + " has no data rows");
  out.space = expected ? *expected : CompositionSpace(std::move(factors));
  return out;
}

}  // namespace detail

/// Derives the composition space from the header and the first appearance
/// order of each primitive.
inline LabelData read_labels(const std::string& path) { return detail::read_labels_impl(path, nullptr); }

/// Validates the file against a known space (unknown primitives carry the
/// offending line number).
inline LabelData read_labels(const std::string& path, const CompositionSpace& space) {
  return detail::read_labels_impl(path, &space);
}

inline void write_labels(const std::string& path, const CompositionSpace& space,
                         const std::vector<std::uint32_t>& labels_flat,
                         const std::vector<std::string>& sample_ids) {
  const std::size_t s = space.num_factors();
  std::string out = "sample_id";
  for (std::size_t f = 0; f < s; ++f) out += "\t" + space.factor(f).name;
  out += "\n";
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    out += sample_ids[i];
    for (std::size_t f = 0; f < s; ++f) out += "\t" + space.primitive_name(f, labels_flat[i * s + f]);
    out += "\n";
  }
  write_file_atomic(path, out);
}

/// Reads an embedding file and its label file into one validated set.
inline LabeledEmbeddingSet load_labeled_set(const std::string& emb_path, const std::string& labels_path,
                                            double curvature = 1.0, const CompositionSpace* space = nullptr) {
  EmbeddingData emb = read_embeddings(emb_path, curvature);
  LabelData lab = space ? read_labels(labels_path, *space) : read_labels(labels_path);
  if (lab.sample_ids.size() != static_cast<std::size_t>(emb.rows.rows()))
    throw AlignmentError("label rows (" + std::to_string(lab.sample_ids.size()) + ") do not match embedding rows (" +
                         std::to_string(emb.rows.rows()) + ")");
  Geometry g = detail::geometry_for_cols(emb.kind, emb.rows.cols(), curvature);
  return LabeledEmbeddingSet(g, lab.space, std::move(emb.rows), std::move(lab.labels), std::move(lab.sample_ids));
}

// ---------------------------------------------------------------------------
// Split file: JSON with seen_pairs, test_pairs or open_world, optional groups.
// ---------------------------------------------------------------------------

struct Split {
  std::vector<Tuple> seen_pairs;
  std::vector<Tuple> test_pairs;
  bool has_test_pairs = false;
  bool open_world = false;
  std::map<std::string, std::string> groups;  // sample_id -> group
};

namespace detail {

inline std::vector<Tuple> parse_pairs(const json& arr, const CompositionSpace& space, const std::string& key) {
  std::vector<Tuple> out;
  if (!arr.is_array()) throw FormatError("'" + key + "' must be an array of tuples");
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != space.num_factors())
      throw FormatError("each entry of '" + key + "' must list one primitive per factor");
    std::vector<std::string> names;
    for (const auto& v : item) names.push_back(v.get<std::string>());
    out.push_back(space.tuple_from_names(names));
  }
  return out;
}

}  // namespace detail

inline Split read_split(const std::string& path, const CompositionSpace& space) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError("split file " + path + " is not valid JSON: " + e.what());
  }
  Split out;
  if (!j.contains("seen_pairs")) throw FormatError("split file must declare 'seen_pairs'");
  out.seen_pairs = detail::parse_pairs(j["seen_pairs"], space, "seen_pairs");
  if (j.contains("test_pairs")) {
    out.test_pairs = detail::parse_pairs(j["test_pairs"], space, "test_pairs");
    out.has_test_pairs = true;
  }
  if (j.contains("open_world")) out.open_world = j["open_world"].get<bool>();
  if (j.contains("groups")) {
    if (!j["groups"].is_object()) throw FormatError("'groups' must map sample ids to group names");
    for (auto it = j["groups"].begin(); it != j["groups"].end(); ++it)
      out.groups[it.key()] = it.value().get<std::string>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decomposition file: JSON header plus base64 float32 blocks for mu and the
// direction matrix. Reload reproduces compose() at float32 precision.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string f32_block(const Eigen::Ref<const RowMatrixXd>& m) {
  std::vector<float> buf(static_cast<std::size_t>(m.rows()) * static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      buf[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<float>(m(i, j));
  return base64_encode(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size() * 4);
}

inline RowMatrixXd f32_unblock(const std::string& b64, Eigen::Index rows, Eigen::Index cols) {
  std::vector<std::uint8_t> bytes = base64_decode(b64);
  if (bytes.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4)
    throw TruncationError("float block has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(rows * cols * 4));
  RowMatrixXd out(rows, cols);
  const float* f = reinterpret_cast<const float*>(bytes.data());
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = static_cast<double>(f[i * cols + j]);
  return out;
}

inline json space_to_json(const CompositionSpace& space) {
  json factors = json::array();
  for (const auto& f : space.factors()) factors.push_back({{"name", f.name}, {"primitives", f.primitives}});
  return json{{"factors", factors}};
}

inline CompositionSpace space_from_json(const json& j) {
  std::vector<Factor> factors;
  for (const auto& f : j.at("factors"))
    factors.push_back(Factor{f.at("name").get<std::string>(), f.at("primitives").get<std::vector<std::string>>()});
  return CompositionSpace(std::move(factors));
}

}  // namespace detail

inline json to_json(const ClosenessReport& r) {
  return json{{"avg", r.avg}, {"max", r.max}, {"within_half_pi", r.within_half_pi}, {"radius", r.radius}};
}

inline json to_json(const MeanResult& r) {
  return json{{"iterations", r.iterations},
              {"final_step_norm", r.final_step_norm},
              {"converged", r.converged},
              {"closeness", to_json(r.closeness)},
              {"closeness_warning", r.closeness_warning}};
}

inline json diagnostics_to_json(const DecompositionDiagnostics& d) {
  return json{{"mean", to_json(d.mean_result)},
              {"closeness", to_json(d.closeness)},
              {"centering_residuals", d.centering_residuals},
              {"low_support", d.low_support}};
}

inline json to_json(const CZSLReport& r) {
  json curve = json::array();
  for (const auto& p : r.curve) {
    json bias = std::isinf(p.bias) ? json(p.bias > 0 ? "inf" : "-inf") : json(p.bias);
    curve.push_back({{"bias", bias}, {"seen_acc", p.seen_acc}, {"unseen_acc", p.unseen_acc}});
  }
  return json{{"attr_acc", r.attr_acc},   {"obj_acc", r.obj_acc}, {"best_seen", r.best_seen},
              {"best_unseen", r.best_unseen}, {"best_hm", r.best_hm}, {"auc", r.auc},
              {"curve", curve},           {"diagnostics", r.diagnostics}};
}

inline json to_json(const GroupReport& r) {
  return json{{"worst_group", r.worst_group},
              {"avg", r.avg},
              {"gap", r.gap},
              {"avg_sample_weighted", r.avg_sample_weighted},
              {"per_group", r.per_group},
              {"excluded_groups", r.excluded_groups}};
}

inline json to_json(const TuneResult& r) {
  json table = json::array();
  for (const auto& e : r.table) {
    json row{{"t", e.temperature}, {"ok", e.ok}};
    if (e.ok) row["score"] = e.score;
    else row["error"] = e.error;
    table.push_back(row);
  }
  return json{{"best_t", r.best_t}, {"table", table}};
}

inline void write_report(const std::string& path, const json& report) { write_json_canonical(path, report); }

inline void write_decomposition(const std::string& path, const Decomposition& dec,
                                std::optional<double> temperature = std::nullopt,
                                std::optional<NoiseMode> noise_mode = std::nullopt) {
  json j;
  j["format"] = "gde-decomposition-v1";
  j["geometry"] = {{"kind", to_string(dec.mu.geometry.kind)},
                   {"ambient_dim", dec.mu.geometry.ambient_dim},
                   {"curvature", dec.mu.geometry.curvature}};
  j["space"] = detail::space_to_json(dec.space);
  j["seen"] = dec.seen;
  j["diagnostics"] = diagnostics_to_json(dec.diagnostics);
  j["temperature"] = temperature ? json(*temperature) : json(nullptr);
  j["noise_mode"] = noise_mode ? json(to_string(*noise_mode)) : json(nullptr);
  j["mu_b64"] = detail::f32_block(Eigen::Map<const RowMatrixXd>(dec.mu.coords.data(), 1, dec.mu.coords.size()));
  j["directions_b64"] = detail::f32_block(dec.directions);
  // full-precision dump: keys sorted, floats embedded as base64, %.6f for the
  // scalar diagnostics
  write_json_canonical(path, j);
}

inline Decomposition read_decomposition(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError("decomposition file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("format") || j["format"] != "gde-decomposition-v1")
    throw FormatError("not a decomposition file: " + path);
  Decomposition dec;
  Geometry g;
  g.kind = geometry_kind_from_string(j.at("geometry").at("kind").get<std::string>());
  g.ambient_dim = j.at("geometry").at("ambient_dim").get<int>();
  g.curvature = j.at("geometry").at("curvature").get<double>();
  dec.space = detail::space_from_json(j.at("space"));
  dec.seen = j.at("seen").get<std::vector<std::uint64_t>>();
  RowMatrixXd mu = detail::f32_unblock(j.at("mu_b64").get<std::string>(), 1, g.coord_dim());
  Eigen::VectorXd mu_v = mu.row(0).transpose();
  detail::reproject(g, mu_v);
  dec.mu = ManifoldPoint{mu_v, g};
  dec.directions = detail::f32_unblock(j.at("directions_b64").get<std::string>(),
                                       static_cast<Eigen::Index>(dec.space.total_primitives()), g.coord_dim());
  const json& d = j.at("diagnostics");
  dec.diagnostics.centering_residuals = d.at("centering_residuals").get<std::vector<double>>();
  dec.diagnostics.low_support = d.at("low_support").get<std::vector<std::string>>();
  const json& m = d.at("mean");
  dec.diagnostics.mean_result.iterations = m.at("iterations").get<int>();
  dec.diagnostics.mean_result.final_step_norm = m.at("final_step_norm").get<double>();
  dec.diagnostics.mean_result.converged = m.at("converged").get<bool>();
  dec.diagnostics.mean_result.closeness_warning = m.at("closeness_warning").get<bool>();
  dec.diagnostics.mean_result.mean = dec.mu;
  const json& c = d.at("closeness");
  dec.diagnostics.closeness.avg = c.at("avg").get<double>();
  dec.diagnostics.closeness.max = c.at("max").get<double>();
  dec.diagnostics.closeness.within_half_pi = c.at("within_half_pi").get<bool>();
  dec.diagnostics.closeness.radius = c.at("radius").is_null() ? std::numeric_limits<double>::infinity()
                                                              : c.at("radius").get<double>();
  dec.diagnostics.mean_result.closeness = dec.diagnostics.closeness;
  return dec;
}

}  // namespace geodecomp
