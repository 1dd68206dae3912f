// geodecomp: geodesically decomposable embedding toolkit.
//
// Subcommands: mean, decompose, classify, robustness, tune-temp, synth,
// project. Structured JSON on stdout (canonical byte-stable form), exit 0 on
// success, exit 1 with a {code, message, context} object on domain errors,
// exit 2 on usage errors.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "geodecomp/geodecomp.hpp"

namespace gd = geodecomp;
using gd::json;

namespace {

struct Timing {
  bool enabled = false;
  std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();
  json laps = json::object();

  void lap(const std::string& name) {
    if (!enabled) return;
    auto now = std::chrono::steady_clock::now();
    laps[name] = std::chrono::duration<double>(now - last).count();
    last = now;
  }
  void flush() {
    if (enabled) std::cerr << gd::canonical_dump(laps) << "\n";
  }
};

void emit(const json& j, bool pretty) {
  if (pretty)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << gd::canonical_dump(j) << "\n";
}

gd::GeometryKind require_kind_match(const std::string& flag, gd::GeometryKind file_kind) {
  if (flag.empty()) return file_kind;
  gd::GeometryKind want = gd::geometry_kind_from_string(flag);
  if (want != file_kind)
    throw gd::ConfigError("file geometry is '" + std::string(gd::to_string(file_kind)) +
                          "' but --geometry requested '" + flag + "'");
  return want;
}

Eigen::VectorXd read_weights_file(const std::string& path, Eigen::Index n) {
  std::ifstream is(path);
  if (!is) throw gd::DataError("cannot open " + path);
  std::vector<double> w;
  double v;
  while (is >> v) w.push_back(v);
  if (static_cast<Eigen::Index>(w.size()) != n)
    throw gd::AlignmentError("weight file has " + std::to_string(w.size()) + " entries for " + std::to_string(n) +
                             " rows");
  return Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

gd::AnchorSet load_anchors(const std::string& emb_path, const std::string& labels_path,
                           const gd::CompositionSpace& space, double curvature) {
  gd::EmbeddingData emb = gd::read_embeddings(emb_path, curvature);
  gd::LabelData lab = gd::read_labels(labels_path, space);
  if (lab.sample_ids.size() != static_cast<std::size_t>(emb.rows.rows()))
    throw gd::AlignmentError("anchor labels do not align with anchor embeddings");
  const std::size_t s = space.num_factors();
  std::vector<std::uint64_t> ids(lab.sample_ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    ids[i] = space.tuple_id(gd::TupleRef(lab.labels.data() + i * s, s));
  gd::Geometry g = gd::detail::geometry_for_cols(emb.kind, emb.rows.cols(), curvature);
  return gd::AnchorSet(g, std::move(emb.rows), std::move(ids));
}

std::size_t resolve_object_factor(const gd::CompositionSpace& space, const std::string& flag) {
  if (flag.empty()) return space.num_factors() - 1;  // object factor defaults to the last one
  for (std::size_t f = 0; f < space.num_factors(); ++f)
    if (space.factor(f).name == flag) return f;
  throw gd::ConfigError("no factor named '" + flag + "'");
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    grid.push_back(std::stod(tok));
  }
  if (grid.empty()) throw gd::ConfigError("empty temperature grid");
  return grid;
}

json run_mean(const std::string& input, const std::string& weights, const std::string& geometry, double curvature,
              double tol, int max_iters, double eta, std::uint64_t subsample, std::uint64_t seed, Timing& tm) {
  gd::EmbeddingData emb = gd::read_embeddings(input, curvature);
  require_kind_match(geometry, emb.kind);
  gd::Geometry g = gd::detail::geometry_for_cols(emb.kind, emb.rows.cols(), curvature);
  tm.lap("read");

  gd::RowMatrixXd rows = std::move(emb.rows);
  Eigen::VectorXd w;
  if (weights.empty() || weights == "uniform")
    w = Eigen::VectorXd::Constant(rows.rows(), 1.0 / static_cast<double>(rows.rows()));
  else
    w = read_weights_file(weights, rows.rows());

  if (subsample > 0 && subsample < static_cast<std::uint64_t>(rows.rows())) {
    gd::detail::Rng rng(seed);
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(rows.rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(idx);
    idx.resize(subsample);
    std::sort(idx.begin(), idx.end());
    gd::RowMatrixXd sub(idx.size(), rows.cols());
    Eigen::VectorXd wsub(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      sub.row(static_cast<Eigen::Index>(i)) = rows.row(idx[i]);
      wsub(static_cast<Eigen::Index>(i)) = w(idx[i]);
    }
    double s = wsub.sum();
    if (s <= 0.0) throw gd::DegenerateInput("subsample carries zero weight");
    wsub /= s;
    rows = std::move(sub);
    w = std::move(wsub);
  }

  gd::MeanConfig cfg;
  cfg.tolerance = tol;
  cfg.max_iters = max_iters;
  cfg.learning_rate = eta;
  gd::MeanResult res = gd::intrinsic_mean(g, rows, w, cfg);
  tm.lap("mean");

  std::vector<double> mean_coords(res.mean.coords.data(), res.mean.coords.data() + res.mean.coords.size());
  return json{{"geometry", gd::to_string(g.kind)},
              {"ambient_dim", g.ambient_dim},
              {"mean", mean_coords},
              {"iterations", res.iterations},
              {"final_step_norm", res.final_step_norm},
              {"converged", res.converged},
              {"closeness", gd::to_json(res.closeness)},
              {"closeness_warning", res.closeness_warning}};
}

json run_decompose(const std::string& embeddings, const std::string& labels, const std::string& geometry,
                   double curvature, const std::string& noise_mode, double temperature, double logit_bias,
                   const std::string& anchors, const std::string& anchor_labels, const std::string& out,
                   Timing& tm) {
  gd::LabeledEmbeddingSet set = gd::load_labeled_set(embeddings, labels, curvature);
  require_kind_match(geometry, set.geometry().kind);
  tm.lap("read");

  gd::NoiseMode mode = gd::noise_mode_from_string(noise_mode);
  gd::NoiseModel noise;
  std::optional<double> temp_out;
  if (mode == gd::NoiseMode::Uniform) {
    noise = gd::uniform_scores(set);
  } else {
    if (anchors.empty() || anchor_labels.empty())
      throw gd::ConfigError("softmax/sigmoid noise needs --anchors and --anchor-labels");
    gd::AnchorSet anchor_set = load_anchors(anchors, anchor_labels, set.space(), curvature);
    noise = mode == gd::NoiseMode::Softmax ? gd::softmax_scores(set, anchor_set, temperature)
                                           : gd::sigmoid_scores(set, anchor_set, temperature, logit_bias);
    temp_out = temperature;
  }
  tm.lap("noise");

  gd::Decomposition dec = gd::decompose_sparse(set, noise);
  tm.lap("decompose");
  gd::write_decomposition(out, dec, temp_out, mode);
  tm.lap("write");

  return json{{"out", out},
              {"geometry", gd::to_string(set.geometry().kind)},
              {"rows", set.size()},
              {"seen_tuples", dec.seen.size()},
              {"total_tuples", dec.space.total_tuples()},
              {"subspace_rank", gd::subspace_rank(dec)},
              {"diagnostics", gd::diagnostics_to_json(dec.diagnostics)}};
}

json run_classify(const std::string& decomposition, const std::string& test_embeddings,
                  const std::string& test_labels, const std::string& world, const std::string& seen_path,
                  const std::string& bias_grid, double curvature, Timing& tm) {
  gd::Decomposition dec = gd::read_decomposition(decomposition);
  gd::LabeledEmbeddingSet test = gd::load_labeled_set(test_embeddings, test_labels,
                                                      dec.mu.geometry.curvature, &dec.space);
  (void)curvature;
  gd::detail::require_same_geometry(dec.mu.geometry, test.geometry());
  gd::Split split = gd::read_split(seen_path, dec.space);
  tm.lap("read");

  std::vector<std::uint64_t> seen_ids;
  for (const auto& t : split.seen_pairs) seen_ids.push_back(dec.space.tuple_id(t));
  std::sort(seen_ids.begin(), seen_ids.end());
  seen_ids.erase(std::unique(seen_ids.begin(), seen_ids.end()), seen_ids.end());

  std::vector<std::uint64_t> cand_ids;
  if (world == "open") {
    cand_ids.resize(dec.space.total_tuples());
    for (std::uint64_t i = 0; i < cand_ids.size(); ++i) cand_ids[i] = i;
  } else if (world == "closed") {
    if (split.has_test_pairs) {
      for (const auto& t : split.test_pairs) cand_ids.push_back(dec.space.tuple_id(t));
    } else {
      cand_ids = seen_ids;  // pairs appearing in the data
      for (std::uint64_t id : test.covered_tuples()) cand_ids.push_back(id);
    }
    std::sort(cand_ids.begin(), cand_ids.end());
    cand_ids.erase(std::unique(cand_ids.begin(), cand_ids.end()), cand_ids.end());
  } else {
    throw gd::ConfigError("--world must be closed or open");
  }

  std::vector<gd::Tuple> candidates;
  candidates.reserve(cand_ids.size());
  std::vector<bool> is_seen;
  is_seen.reserve(cand_ids.size());
  for (std::uint64_t id : cand_ids) {
    candidates.push_back(dec.space.tuple_from_id(id));
    is_seen.push_back(std::binary_search(seen_ids.begin(), seen_ids.end(), id));
  }
  gd::ClassifierBank bank = gd::make_pair_bank(dec, candidates);
  tm.lap("bank");

  std::vector<std::vector<std::string>> truths(test.size());
  for (std::size_t q = 0; q < test.size(); ++q) truths[q] = dec.space.tuple_names(test.label(q));

  gd::CZSLReport rep;
  if (bias_grid.empty() || bias_grid == "exact") {
    rep = gd::czsl_evaluate(bank, test.rows(), truths, is_seen, gd::BiasGridPolicy::Exact);
  } else if (bias_grid == "uniform") {
    rep = gd::czsl_evaluate(bank, test.rows(), truths, is_seen, gd::BiasGridPolicy::Uniform, 201);
  } else {
    rep = gd::czsl_evaluate(bank, test.rows(), truths, is_seen, parse_grid(bias_grid));
  }
  tm.lap("evaluate");

  json j = gd::to_json(rep);
  j["world"] = world;
  j["candidates"] = candidates.size();
  j["queries"] = test.size();
  return j;
}

json run_robustness(const std::string& decomposition, const std::string& test_embeddings,
                    const std::string& test_labels, const std::string& split_path,
                    const std::string& object_factor, Timing& tm) {
  gd::Decomposition dec = gd::read_decomposition(decomposition);
  gd::LabeledEmbeddingSet test = gd::load_labeled_set(test_embeddings, test_labels,
                                                      dec.mu.geometry.curvature, &dec.space);
  gd::detail::require_same_geometry(dec.mu.geometry, test.geometry());
  tm.lap("read");

  std::size_t of = resolve_object_factor(dec.space, object_factor);
  gd::ClassifierBank bank = gd::make_object_bank(dec, of);

  std::map<std::string, std::string> group_map;
  if (!split_path.empty()) group_map = gd::read_split(split_path, dec.space).groups;

  std::vector<std::string> truths(test.size()), groups(test.size());
  for (std::size_t q = 0; q < test.size(); ++q) {
    truths[q] = dec.space.primitive_name(of, test.label(q)[of]);
    if (!group_map.empty()) {
      auto it = group_map.find(test.sample_ids()[q]);
      if (it == group_map.end())
        throw gd::AlignmentError("sample '" + test.sample_ids()[q] + "' is missing from the groups map");
      groups[q] = it->second;
    } else {
      groups[q] = dec.space.tuple_label(test.label(q));
    }
  }
  gd::GroupReport rep = gd::group_evaluate(bank, test.rows(), truths, groups);
  tm.lap("evaluate");

  json j = gd::to_json(rep);
  j["object_factor"] = dec.space.factor(of).name;
  j["queries"] = test.size();
  return j;
}

json run_tune_temp(const std::string& train_emb, const std::string& train_lab, const std::string& val_emb,
                   const std::string& val_lab, const std::string& anchors, const std::string& anchor_labels,
                   const std::string& grid_csv, const std::string& objective, const std::string& noise_mode,
                   double logit_bias, const std::string& object_factor, double curvature, Timing& tm) {
  gd::LabeledEmbeddingSet train = gd::load_labeled_set(train_emb, train_lab, curvature);
  gd::LabeledEmbeddingSet val = gd::load_labeled_set(val_emb, val_lab, curvature, &train.space());
  gd::AnchorSet anchor_set = load_anchors(anchors, anchor_labels, train.space(), curvature);
  tm.lap("read");

  gd::TuneObjective obj;
  if (objective == "auc") obj = gd::TuneObjective::CzslAuc;
  else if (objective == "worst-group") obj = gd::TuneObjective::WorstGroup;
  else throw gd::ConfigError("--objective must be auc or worst-group");

  gd::NoiseMode mode = gd::noise_mode_from_string(noise_mode);
  std::size_t of = resolve_object_factor(train.space(), object_factor);
  gd::TuneResult res =
      gd::tune_temperature(train, val, anchor_set, parse_grid(grid_csv), obj, mode, logit_bias, of);
  tm.lap("tune");

  json j = gd::to_json(res);
  j["objective"] = objective;
  j["noise"] = noise_mode;
  return j;
}

json run_synth(const std::string& spec_path, const std::string& out_embeddings, const std::string& out_labels,
               const std::string& out_truth, std::optional<std::uint64_t> seed_flag, Timing& tm) {
  std::ifstream is(spec_path);
  if (!is) throw gd::DataError("cannot open " + spec_path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw gd::FormatError("spec file is not valid JSON: " + std::string(e.what()));
  }

  gd::SynthSpec spec;
  std::vector<gd::Factor> factors;
  for (const auto& f : j.at("factors"))
    factors.push_back(gd::Factor{f.at("name").get<std::string>(),
                                 f.at("primitives").get<std::vector<std::string>>()});
  spec.space = gd::CompositionSpace(std::move(factors));
  spec.geometry.kind = gd::geometry_kind_from_string(j.at("geometry").get<std::string>());
  spec.geometry.ambient_dim = j.at("ambient_dim").get<int>();
  spec.geometry.curvature = j.value("curvature", 1.0);
  spec.direction_scale = j.value("direction_scale", 0.3);
  spec.noise_sigma = j.value("noise_sigma", 0.0);
  spec.samples_per_tuple = j.value("samples_per_tuple", 1);
  spec.keep_fraction = j.value("keep_fraction", 1.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  if (seed_flag) spec.seed = *seed_flag;
  spec.validate();
  tm.lap("read");

  gd::SynthInstance inst = gd::gen_decomposable(spec);
  gd::LabeledEmbeddingSet set = inst.set;
  if (spec.noise_sigma > 0.0 || spec.samples_per_tuple > 1)
    set = gd::add_noise(set, spec.noise_sigma, spec.samples_per_tuple, spec.seed + 1);
  if (spec.keep_fraction < 1.0) set = gd::sparsify(set, spec.keep_fraction, spec.seed + 2);
  tm.lap("generate");

  gd::write_embeddings(out_embeddings, set.geometry().kind, set.rows());
  gd::write_labels(out_labels, set.space(), set.labels_flat(), set.sample_ids());
  if (!out_truth.empty()) gd::write_decomposition(out_truth, inst.truth);
  tm.lap("write");

  return json{{"embeddings", out_embeddings},
              {"labels", out_labels},
              {"truth", out_truth},
              {"rows", set.size()},
              {"kept_tuples", set.covered_tuples().size()},
              {"total_tuples", set.space().total_tuples()},
              {"seed", spec.seed}};
}

json run_project(const std::string& decomposition, int dim, const std::string& out,
                 const std::string& embeddings, const std::string& labels, Timing& tm) {
  gd::Decomposition dec = gd::read_decomposition(decomposition);
  const gd::Geometry& g = dec.mu.geometry;
  tm.lap("read");

  const std::uint64_t total = dec.space.total_tuples();
  gd::RowMatrixXd tangents(static_cast<Eigen::Index>(total), g.coord_dim());
  Eigen::VectorXd v(g.coord_dim());
  for (std::uint64_t id = 0; id < total; ++id) {
    gd::Tuple t = dec.space.tuple_from_id(id);
    v.setZero();
    for (std::size_t f = 0; f < t.size(); ++f) v += dec.direction(f, t[f]);
    tangents.row(static_cast<Eigen::Index>(id)) = v;
  }
  gd::PcaResult pca = gd::pca_project(tangents, dim);
  tm.lap("pca");

  char buf[64];
  std::string csv = "kind,label,seen";
  for (int a = 0; a < dim; ++a) csv += ",axis" + std::to_string(a + 1);
  csv += "\n";
  auto append_row = [&](const std::string& kind, const std::string& label, const std::string& seen,
                        const Eigen::RowVectorXd& c) {
    csv += kind + "," + label + "," + seen;
    for (int a = 0; a < dim; ++a) {
      std::snprintf(buf, sizeof(buf), "%.6f", c(a));
      csv += std::string(",") + buf;
    }
    csv += "\n";
  };
  for (std::uint64_t id = 0; id < total; ++id) {
    gd::Tuple t = dec.space.tuple_from_id(id);
    append_row("composition", dec.space.tuple_label(t), dec.is_seen(id) ? "1" : "0",
               pca.coords.row(static_cast<Eigen::Index>(id)));
  }

  std::size_t sample_rows = 0;
  if (!embeddings.empty()) {
    if (labels.empty()) throw gd::ConfigError("--embeddings needs --labels");
    gd::LabeledEmbeddingSet set = gd::load_labeled_set(embeddings, labels, g.curvature, &dec.space);
    gd::detail::require_same_geometry(g, set.geometry());
    gd::RowMatrixXd logs(set.size(), g.coord_dim());
    Eigen::VectorXd tmp(g.coord_dim());
    for (std::size_t i = 0; i < set.size(); ++i) {
      gd::detail::log(g, dec.mu.coords, set.rows().row(static_cast<Eigen::Index>(i)).transpose(), tmp);
      logs.row(static_cast<Eigen::Index>(i)) = tmp;
    }
    Eigen::MatrixXd coords = pca.transform(logs);
    for (std::size_t i = 0; i < set.size(); ++i)
      append_row("sample", dec.space.tuple_label(set.label(i)), "", coords.row(static_cast<Eigen::Index>(i)));
    sample_rows = set.size();
  }
  gd::write_file_atomic(out, csv);
  tm.lap("write");

  return json{{"out", out},
              {"dim", dim},
              {"rank", pca.rank},
              {"explained_variance", pca.explained_variance},
              {"compositions", total},
              {"samples", sample_rows},
              {"diagnostics", pca.diagnostics}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geodesically decomposable embeddings toolkit"};
  app.require_subcommand(1);

  bool pretty = false;
  bool timing = false;
  std::uint64_t seed = 0;
  app.add_flag("--pretty", pretty, "indent the JSON output");
  app.add_flag("--timing", timing, "print phase wall times to stderr");
  app.add_option("--seed", seed, "seed for every random choice (default 0)");

  // mean
  auto* mean_cmd = app.add_subcommand("mean", "weighted intrinsic mean of an embedding file");
  std::string mean_input, mean_weights = "uniform", mean_geometry;
  double mean_curvature = 1.0, mean_tol = 1e-5, mean_eta = 1.0;
  int mean_iters = 1000;
  std::uint64_t mean_subsample = 0;
  mean_cmd->add_option("--input", mean_input, "embedding file")->required();
  mean_cmd->add_option("--weights", mean_weights, "'uniform' or a text file with one weight per row");
  mean_cmd->add_option("--geometry", mean_geometry, "sphere|lorentz|euclidean (validated against the file)");
  mean_cmd->add_option("--curvature", mean_curvature, "Lorentz curvature c (default 1.0)");
  mean_cmd->add_option("--tol", mean_tol, "stopping tolerance (default 1e-5)");
  mean_cmd->add_option("--max-iters", mean_iters, "iteration cap (default 1000)");
  mean_cmd->add_option("--eta", mean_eta, "learning rate (default 1.0)");
  mean_cmd->add_option("--subsample", mean_subsample, "approximate the mean from N sampled rows (0 = off)");

  // decompose
  auto* dec_cmd = app.add_subcommand("decompose", "compute the decomposable approximation of a labeled set");
  std::string dec_emb, dec_lab, dec_geometry, dec_noise = "uniform", dec_anchors, dec_anchor_labels, dec_out;
  double dec_curvature = 1.0, dec_temperature = 0.01, dec_bias = -16.5;
  dec_cmd->add_option("--embeddings", dec_emb, "embedding file")->required();
  dec_cmd->add_option("--labels", dec_lab, "label TSV")->required();
  dec_cmd->add_option("--geometry", dec_geometry, "sphere|lorentz|euclidean (validated against the file)");
  dec_cmd->add_option("--curvature", dec_curvature, "Lorentz curvature c (default 1.0)");
  dec_cmd->add_option("--noise", dec_noise, "uniform|softmax|sigmoid");
  dec_cmd->add_option("--temperature", dec_temperature, "score temperature for softmax/sigmoid");
  dec_cmd->add_option("--logit-bias", dec_bias, "sigmoid logit bias (default -16.5)");
  dec_cmd->add_option("--anchors", dec_anchors, "anchor embedding file (softmax/sigmoid)");
  dec_cmd->add_option("--anchor-labels", dec_anchor_labels, "anchor label TSV (softmax/sigmoid)");
  dec_cmd->add_option("--out", dec_out, "output decomposition file")->required();

  // classify
  auto* cls_cmd = app.add_subcommand("classify", "generalized compositional classification metrics");
  std::string cls_dec, cls_emb, cls_lab, cls_world = "closed", cls_seen, cls_grid = "exact";
  double cls_curvature = 1.0;
  cls_cmd->add_option("--decomposition", cls_dec, "decomposition file")->required();
  cls_cmd->add_option("--test-embeddings", cls_emb, "test embedding file")->required();
  cls_cmd->add_option("--test-labels", cls_lab, "test label TSV")->required();
  cls_cmd->add_option("--world", cls_world, "closed|open");
  cls_cmd->add_option("--seen", cls_seen, "split file with seen_pairs (and optional test_pairs)")->required();
  cls_cmd->add_option("--bias-grid", cls_grid, "exact|uniform|comma-separated values");
  cls_cmd->add_option("--curvature", cls_curvature, "unused; geometry comes from the decomposition");

  // robustness
  auto* rob_cmd = app.add_subcommand("robustness", "worst-group / average / gap object-classifier metrics");
  std::string rob_dec, rob_emb, rob_lab, rob_split, rob_factor;
  rob_cmd->add_option("--decomposition", rob_dec, "decomposition file")->required();
  rob_cmd->add_option("--test-embeddings", rob_emb, "test embedding file")->required();
  rob_cmd->add_option("--test-labels", rob_lab, "test label TSV")->required();
  rob_cmd->add_option("--split", rob_split, "split file with a groups map (default: groups = label tuples)");
  rob_cmd->add_option("--object-factor", rob_factor, "factor holding the target classes (default: last)");

  // tune-temp
  auto* tune_cmd = app.add_subcommand("tune-temp", "grid search the noise temperature on a validation split");
  std::string tt_train_emb, tt_train_lab, tt_val_emb, tt_val_lab, tt_anchors, tt_anchor_labels;
  std::string tt_grid = "0.005,0.01,0.02,0.04,0.07,0.1,0.2,0.5,1.0";  // log-spaced around the trained value
  std::string tt_objective = "auc", tt_noise = "softmax", tt_factor;
  double tt_bias = -16.5, tt_curvature = 1.0;
  tune_cmd->add_option("--train-embeddings", tt_train_emb, "train embedding file")->required();
  tune_cmd->add_option("--train-labels", tt_train_lab, "train label TSV")->required();
  tune_cmd->add_option("--val-embeddings", tt_val_emb, "validation embedding file")->required();
  tune_cmd->add_option("--val-labels", tt_val_lab, "validation label TSV")->required();
  tune_cmd->add_option("--anchors", tt_anchors, "anchor embedding file")->required();
  tune_cmd->add_option("--anchor-labels", tt_anchor_labels, "anchor label TSV")->required();
  tune_cmd->add_option("--grid", tt_grid, "comma-separated temperatures");
  tune_cmd->add_option("--objective", tt_objective, "auc|worst-group");
  tune_cmd->add_option("--noise", tt_noise, "softmax|sigmoid");
  tune_cmd->add_option("--logit-bias", tt_bias, "sigmoid logit bias (default -16.5)");
  tune_cmd->add_option("--object-factor", tt_factor, "factor holding the target classes (default: last)");
  tune_cmd->add_option("--curvature", tt_curvature, "Lorentz curvature c (default 1.0)");

  // synth
  auto* syn_cmd = app.add_subcommand("synth", "generate a decomposable set with optional noise and sparsity");
  std::string syn_spec, syn_emb, syn_lab, syn_truth;
  syn_cmd->add_option("--spec", syn_spec, "JSON generator spec")->required();
  syn_cmd->add_option("--out-embeddings", syn_emb, "output embedding file")->required();
  syn_cmd->add_option("--out-labels", syn_lab, "output label TSV")->required();
  syn_cmd->add_option("--out-truth", syn_truth, "output ground-truth decomposition file");

  // project
  auto* prj_cmd = app.add_subcommand("project", "export PCA coordinates of the composed tangent vectors");
  std::string prj_dec, prj_out, prj_emb, prj_lab;
  int prj_dim = 2;
  prj_cmd->add_option("--decomposition", prj_dec, "decomposition file")->required();
  prj_cmd->add_option("--dim", prj_dim, "2 or 3");
  prj_cmd->add_option("--out", prj_out, "output CSV")->required();
  prj_cmd->add_option("--embeddings", prj_emb, "also project these raw embeddings");
  prj_cmd->add_option("--labels", prj_lab, "labels for --embeddings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  Timing tm;
  tm.enabled = timing;
  bool seed_given = app.count("--seed") > 0;
  try {
    json out;
    if (*mean_cmd)
      out = run_mean(mean_input, mean_weights, mean_geometry, mean_curvature, mean_tol, mean_iters, mean_eta,
                     mean_subsample, seed, tm);
    else if (*dec_cmd)
      out = run_decompose(dec_emb, dec_lab, dec_geometry, dec_curvature, dec_noise, dec_temperature, dec_bias,
                          dec_anchors, dec_anchor_labels, dec_out, tm);
    else if (*cls_cmd)
      out = run_classify(cls_dec, cls_emb, cls_lab, cls_world, cls_seen, cls_grid, cls_curvature, tm);
    else if (*rob_cmd)
      out = run_robustness(rob_dec, rob_emb, rob_lab, rob_split, rob_factor, tm);
    else if (*tune_cmd)
      out = run_tune_temp(tt_train_emb, tt_train_lab, tt_val_emb, tt_val_lab, tt_anchors, tt_anchor_labels,
                          tt_grid, tt_objective, tt_noise, tt_bias, tt_factor, tt_curvature, tm);
    else if (*syn_cmd)
      out = run_synth(syn_spec, syn_emb, syn_lab, syn_truth,
                      seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt, tm);
    else if (*prj_cmd)
      out = run_project(prj_dec, prj_dim, prj_out, prj_emb, prj_lab, tm);
    emit(out, pretty);
    tm.flush();
    return 0;
  } catch (const gd::Error& e) {
    json ctx = json::object();
    for (const auto& [k, v] : e.context()) ctx[k] = v;
    emit(json{{"code", e.code()}, {"message", e.what()}, {"context", ctx}}, pretty);
    return 1;
  } catch (const std::exception& e) {
    emit(json{{"code", "internal_error"}, {"message", e.what()}, {"context", json::object()}}, pretty);
    return 1;
  }
}
