#include <catch2/catch_amalgamated.hpp>

#include "geodecomp/noise.hpp"
#include "geodecomp/synthlab.hpp"
#include "geodecomp/tuning.hpp"

using namespace geodecomp;
using Catch::Approx;

namespace {

const Geometry S8{GeometryKind::Sphere, 8, 1.0};

// one tuple per row group; samples placed so that row i of group g has the
// prescribed cosine similarity to that group's anchor
struct SimFixture {
  LabeledEmbeddingSet set;
  AnchorSet anchors;
};

SimFixture with_similarities(const std::vector<std::vector<double>>& sims_per_tuple) {
  const std::size_t m = sims_per_tuple.size();
  CompositionSpace space({Factor{"t", [&] {
                            std::vector<std::string> p;
                            for (std::size_t i = 0; i < m; ++i) p.push_back("p" + std::to_string(i));
                            return p;
                          }()}});
  std::size_t n = 0;
  for (const auto& s : sims_per_tuple) n += s.size();
  RowMatrixXd rows(n, 8);
  RowMatrixXd anchor_rows(m, 8);
  std::vector<std::uint32_t> labels;
  std::vector<std::string> ids;
  std::vector<std::uint64_t> anchor_ids(m);
  std::size_t r = 0;
  for (std::size_t g = 0; g < m; ++g) {
    Eigen::VectorXd anchor = Eigen::VectorXd::Zero(8);
    anchor(2 * (g % 4)) = 1.0;
    anchor_rows.row(static_cast<Eigen::Index>(g)) = anchor;
    anchor_ids[g] = g;
    for (double s : sims_per_tuple[g]) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
      u = s * anchor;
      u(2 * (g % 4) + 1) = std::sqrt(1.0 - s * s);
      rows.row(static_cast<Eigen::Index>(r)) = u;
      labels.push_back(static_cast<std::uint32_t>(g));
      ids.push_back("r" + std::to_string(r));
      ++r;
    }
  }
  return SimFixture{LabeledEmbeddingSet(S8, space, rows, labels, ids),
                    AnchorSet(S8, anchor_rows, anchor_ids)};
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log(x);
  return h;
}

std::vector<double> tuple_probs(const LabeledEmbeddingSet& set, const NoiseModel& m, std::size_t tuple_pos) {
  std::vector<double> out;
  for (std::uint32_t r : set.rows_per_tuple()[tuple_pos]) out.push_back(m.probs(r));
  return out;
}

}  // namespace

TEST_CASE("uniform scores") {
  auto fx = with_similarities({{0.5}, {0.1, 0.2, 0.3, 0.4}, {0.7, 0.9}, {0.1, 0.5, 0.9}});
  NoiseModel m = uniform_scores(fx.set);
  CHECK(tuple_probs(fx.set, m, 0) == std::vector<double>{1.0});
  CHECK(tuple_probs(fx.set, m, 1) == std::vector<double>(4, 0.25));
  CHECK(tuple_probs(fx.set, m, 2) == std::vector<double>(2, 0.5));
  for (double p : tuple_probs(fx.set, m, 3)) CHECK(p == Approx(1.0 / 3));
  CHECK_NOTHROW(validate_noise(fx.set, m));
}

TEST_CASE("softmax scores") {
  auto fx = with_similarities({{0.42}, {1.0, 0.0}});
  NoiseModel m = softmax_scores(fx.set, fx.anchors, 1.0);
  CHECK(tuple_probs(fx.set, m, 0) == std::vector<double>{1.0});  // single-element softmax
  auto p = tuple_probs(fx.set, m, 1);
  CHECK(p[0] == Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).margin(1e-12));  // ~0.7311
  CHECK(p[1] == Approx(1.0 / (std::exp(1.0) + 1.0)).margin(1e-12));            // ~0.2689
  CHECK_NOTHROW(validate_noise(fx.set, m));

  // enormous temperature flattens to uniform
  auto fx2 = with_similarities({{0.9, 0.1}});
  NoiseModel flat = softmax_scores(fx2.set, fx2.anchors, 1e6);
  auto q = tuple_probs(fx2.set, flat, 0);
  CHECK(q[0] == Approx(0.5).margin(1e-6));
  CHECK(q[1] == Approx(0.5).margin(1e-6));
}

TEST_CASE("softmax preconditions") {
  auto fx = with_similarities({{0.5, 0.2}});
  CHECK_THROWS_AS(softmax_scores(fx.set, fx.anchors, 0.0), ConfigError);
  CHECK_THROWS_AS(softmax_scores(fx.set, fx.anchors, -1.0), ConfigError);

  // anchor missing for a covered tuple
  RowMatrixXd one_anchor(1, 8);
  one_anchor.setZero();
  one_anchor(0, 0) = 1.0;
  AnchorSet partial(S8, one_anchor, {99});
  CHECK_THROWS_AS(softmax_scores(fx.set, partial, 1.0), MissingAnchor);

  // similarity scoring is a sphere-only construction
  Geometry e{GeometryKind::Euclidean, 2, 1.0};
  CompositionSpace space({Factor{"t", {"p0"}}});
  RowMatrixXd rows(1, 2);
  rows << 3, 4;
  LabeledEmbeddingSet eset(e, space, rows, {0}, {"x"});
  RowMatrixXd arow(1, 2);
  arow << 0, 1;
  AnchorSet eanchor(e, arow, {0});
  CHECK_THROWS_AS(softmax_scores(eset, eanchor, 1.0), ConfigError);
}

TEST_CASE("sigmoid scores") {
  // sim/t + b = 0 for both samples: raw 0.5 each, renormalized to 0.5
  auto fx = with_similarities({{0.25, 0.25}});
  NoiseModel m = sigmoid_scores(fx.set, fx.anchors, 1.0, -0.25);
  auto p = tuple_probs(fx.set, m, 0);
  CHECK(p[0] == Approx(0.5).margin(1e-12));
  CHECK(p[1] == Approx(0.5).margin(1e-12));

  auto single = with_similarities({{0.3}});
  NoiseModel s = sigmoid_scores(single.set, single.anchors, 1.0);
  CHECK(tuple_probs(single.set, s, 0) == std::vector<double>{1.0});

  // raws sigma(log 4) = 0.8 and sigma(-log 4) = 0.2 sum to one already
  double sim = std::log(4.0) / 2.0;
  auto fx2 = with_similarities({{sim, -sim}});
  NoiseModel r = sigmoid_scores(fx2.set, fx2.anchors, 0.5, 0.0);
  auto q = tuple_probs(fx2.set, r, 0);
  CHECK(q[0] == Approx(0.8).margin(1e-12));
  CHECK(q[1] == Approx(0.2).margin(1e-12));
}

TEST_CASE("per-tuple normalization holds for every mode") {
  auto fx = with_similarities({{0.9, 0.3, -0.5}, {0.8}, {0.2, 0.4}, {-0.9, 0.9, 0.0, 0.5}});
  for (const NoiseModel& m : {uniform_scores(fx.set), softmax_scores(fx.set, fx.anchors, 0.07),
                              sigmoid_scores(fx.set, fx.anchors, 0.5, -1.0)}) {
    CHECK_NOTHROW(validate_noise(fx.set, m));
    const auto& per_tuple = fx.set.rows_per_tuple();
    for (std::size_t k = 0; k < per_tuple.size(); ++k) {
      double s = 0.0;
      for (std::uint32_t r : per_tuple[k]) s += m.probs(r);
      REQUIRE(s == Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("softmax entropy grows with temperature") {
  auto fx = with_similarities({{0.9, 0.4, -0.2, 0.0, 0.6}});
  double prev = -1.0;
  for (double t : {0.01, 0.05, 0.1, 0.5, 1.0, 10.0}) {
    double h = entropy(tuple_probs(fx.set, softmax_scores(fx.set, fx.anchors, t), 0));
    REQUIRE(h >= prev - 1e-12);
    prev = h;
  }
}

TEST_CASE("softmax with equal similarities is exactly uniform") {
  auto fx = with_similarities({{0.37, 0.37, 0.37}});
  NoiseModel m = softmax_scores(fx.set, fx.anchors, 0.04);
  NoiseModel u = uniform_scores(fx.set);
  CHECK((m.probs - u.probs).norm() == 0.0);
}

TEST_CASE("softmax shift invariance") {
  auto base = with_similarities({{0.2, 0.5, -0.1}});
  auto shifted = with_similarities({{0.3, 0.6, 0.0}});  // every similarity + 0.1
  for (double t : {0.03, 0.2, 1.0}) {
    auto p = tuple_probs(base.set, softmax_scores(base.set, base.anchors, t), 0);
    auto q = tuple_probs(shifted.set, softmax_scores(shifted.set, shifted.anchors, t), 0);
    for (std::size_t i = 0; i < p.size(); ++i) REQUIRE(p[i] == Approx(q[i]).margin(1e-12));
  }
}

namespace {

// train split with one corrupted tuple: half of its samples are dragged far
// from the concept while the anchor stays clean
struct CorruptionFixture {
  LabeledEmbeddingSet train;
  LabeledEmbeddingSet val;
  AnchorSet anchors;
};

CorruptionFixture corruption_fixture() {
  SynthSpec spec;
  spec.space = CompositionSpace({Factor{"attr", {"a0", "a1"}}, Factor{"obj", {"o0", "o1", "o2"}}});
  spec.geometry = S8;
  spec.direction_scale = 0.25;
  spec.seed = 101;
  SynthInstance inst = gen_decomposable(spec);
  const Geometry& g = inst.set.geometry();

  // hold out tuple (a1,o2) from the train split so validation has an unseen pair
  std::uint64_t hidden = inst.set.space().tuple_id(Tuple{1, 2});
  std::vector<std::uint32_t> keep;
  for (std::size_t i = 0; i < inst.set.size(); ++i)
    if (inst.set.tuple_id_of_row(i) != hidden) keep.push_back(static_cast<std::uint32_t>(i));
  RowMatrixXd rows(keep.size(), g.coord_dim());
  std::vector<std::uint32_t> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = inst.set.rows().row(keep[i]);
    TupleRef t = inst.set.label(keep[i]);
    labels.insert(labels.end(), t.begin(), t.end());
    ids.push_back(inst.set.sample_ids()[keep[i]]);
  }
  LabeledEmbeddingSet held(g, inst.set.space(), rows, labels, ids);
  LabeledEmbeddingSet train = add_noise(held, 0.02, 6, 5);

  // corrupt half the samples of tuple (a0,o0)
  detail::Rng rng(7);
  RowMatrixXd train_rows = train.rows();
  std::uint64_t victim = train.space().tuple_id(Tuple{0, 0});
  int moved = 0;
  for (std::size_t i = 0; i < train.size() && moved < 3; ++i) {
    if (train.tuple_id_of_row(i) != victim) continue;
    Eigen::VectorXd away = random_tangent(g, train_rows.row(static_cast<Eigen::Index>(i)).transpose(), 1.0, rng);
    away *= 1.2 / away.norm();
    Eigen::VectorXd u(g.coord_dim());
    detail::exp(g, train_rows.row(static_cast<Eigen::Index>(i)).transpose(), away, u);
    train_rows.row(static_cast<Eigen::Index>(i)) = u;
    ++moved;
  }
  LabeledEmbeddingSet corrupted(g, train.space(), train_rows, train.labels_flat(), train.sample_ids());

  // anchors and validation queries are the clean concept embeddings
  std::vector<std::uint64_t> anchor_ids(inst.set.size());
  for (std::size_t i = 0; i < inst.set.size(); ++i) anchor_ids[i] = inst.set.tuple_id_of_row(i);
  AnchorSet anchors(g, inst.set.rows(), anchor_ids);
  return CorruptionFixture{corrupted, inst.set, anchors};
}

double auc_with_noise(const CorruptionFixture& fx, const NoiseModel& noise) {
  Decomposition dec = decompose_sparse(fx.train, noise);
  std::vector<Tuple> candidates;
  for (std::uint64_t id = 0; id < fx.val.space().total_tuples(); ++id)
    candidates.push_back(fx.val.space().tuple_from_id(id));
  ClassifierBank bank = make_pair_bank(dec, candidates);
  std::vector<bool> seen(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c)
    seen[c] = dec.is_seen(fx.val.space().tuple_id(candidates[c]));
  std::vector<std::vector<std::string>> truths(fx.val.size());
  for (std::size_t q = 0; q < fx.val.size(); ++q) truths[q] = fx.val.space().tuple_names(fx.val.label(q));
  return czsl_evaluate(bank, fx.val.rows(), truths, seen, BiasGridPolicy::Exact).auc;
}

}  // namespace

TEST_CASE("sharp softmax down-weights corrupted samples") {
  CorruptionFixture fx = corruption_fixture();
  double uniform_auc = auc_with_noise(fx, uniform_scores(fx.train));
  double sharp_auc = auc_with_noise(fx, softmax_scores(fx.train, fx.anchors, 0.01));
  CHECK(sharp_auc >= uniform_auc);

  TuneResult tuned = tune_temperature(fx.train, fx.val, fx.anchors, {0.01, 1e6}, TuneObjective::CzslAuc);
  REQUIRE(tuned.table.size() == 2);
  REQUIRE(tuned.table[0].ok);
  REQUIRE(tuned.table[1].ok);
  CHECK(tuned.table[0].score >= tuned.table[1].score);
  CHECK(tuned.best_t == 0.01);
}

TEST_CASE("temperature grid of one") {
  CorruptionFixture fx = corruption_fixture();
  TuneResult r = tune_temperature(fx.train, fx.val, fx.anchors, {0.07}, TuneObjective::CzslAuc);
  CHECK(r.best_t == 0.07);
  CHECK(r.table.size() == 1);
}

TEST_CASE("ties break toward the smaller temperature") {
  // one sample per tuple: any temperature yields the same scores, hence a tie
  SynthSpec spec;
  spec.space = CompositionSpace({Factor{"attr", {"a0", "a1"}}, Factor{"obj", {"o0", "o1", "o2"}}});
  spec.geometry = S8;
  spec.direction_scale = 0.2;
  spec.seed = 31;
  SynthInstance inst = gen_decomposable(spec);
  LabeledEmbeddingSet train = sparsify(inst.set, 5.0 / 6.0, 3);
  std::vector<std::uint64_t> anchor_ids(inst.set.size());
  for (std::size_t i = 0; i < inst.set.size(); ++i) anchor_ids[i] = inst.set.tuple_id_of_row(i);
  AnchorSet anchors(inst.set.geometry(), inst.set.rows(), anchor_ids);

  TuneResult r = tune_temperature(train, inst.set, anchors, {0.5, 0.1, 0.9}, TuneObjective::CzslAuc);
  REQUIRE(r.table.size() == 3);
  CHECK(r.table[0].score == r.table[1].score);
  CHECK(r.table[1].score == r.table[2].score);
  CHECK(r.best_t == 0.1);
}

TEST_CASE("worst-group tuning objective runs end to end") {
  CorruptionFixture fx = corruption_fixture();
  TuneResult r = tune_temperature(fx.train, fx.val, fx.anchors, {0.01, 0.1}, TuneObjective::WorstGroup);
  REQUIRE(r.table[0].ok);
  CHECK(r.table[0].score >= 0.0);
  CHECK(r.table[0].score <= 1.0);
}

TEST_CASE("tuning validates its inputs") {
  CorruptionFixture fx = corruption_fixture();
  CHECK_THROWS_AS(tune_temperature(fx.train, fx.val, fx.anchors, {}, TuneObjective::CzslAuc), ConfigError);
  CHECK_THROWS_AS(
      tune_temperature(fx.train, fx.val, fx.anchors, {0.1}, TuneObjective::CzslAuc, NoiseMode::Uniform),
      ConfigError);
  // a grid point that fails is recorded, not fatal, as long as one succeeds
  TuneResult r = tune_temperature(fx.train, fx.val, fx.anchors, {-1.0, 0.05}, TuneObjective::CzslAuc);
  CHECK_FALSE(r.table[0].ok);
  CHECK(r.table[0].error.find("config_error") != std::string::npos);
  CHECK(r.table[1].ok);
  CHECK(r.best_t == 0.05);
  // every point failing is fatal
  CHECK_THROWS_AS(tune_temperature(fx.train, fx.val, fx.anchors, {-1.0, -2.0}, TuneObjective::CzslAuc),
                  TuningError);
}
