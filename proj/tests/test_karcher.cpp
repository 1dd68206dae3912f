#include <catch2/catch_amalgamated.hpp>

#include "geodecomp/karcher.hpp"
#include "geodecomp/synthlab.hpp"

using namespace geodecomp;
using Catch::Approx;

namespace {

const Geometry S3{GeometryKind::Sphere, 3, 1.0};

double objective(const Geometry& g, const RowMatrixXd& rows, const Eigen::VectorXd& w, ConstRowRef p) {
  double obj = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double d = detail::dist(g, p, rows.row(i).transpose());
    obj += w(i) * d * d;
  }
  return obj;
}

// Brute-force minimizer on S^2: exhaustive tangent grid at the normalized
// arithmetic mean, coarse pass then a fine pass at 1e-3 resolution. The
// objective is geodesically convex inside the pi/2 ball, so refining around
// the coarse argmin cannot miss the minimizer.
Eigen::Vector3d grid_oracle_s2(const RowMatrixXd& rows, const Eigen::VectorXd& w) {
  Eigen::Vector3d center = (rows.transpose() * w).normalized();
  Eigen::Vector3d helper = std::abs(center(0)) < 0.9 ? Eigen::Vector3d(1, 0, 0) : Eigen::Vector3d(0, 1, 0);
  Eigen::Vector3d b1 = (helper - helper.dot(center) * center).normalized();
  Eigen::Vector3d b2 = center.cross(b1);

  auto scan = [&](Eigen::Vector2d at, double radius, double step) {
    Eigen::Vector2d best = at;
    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::VectorXd u(3);
    for (double a = at(0) - radius; a <= at(0) + radius; a += step) {
      for (double b = at(1) - radius; b <= at(1) + radius; b += step) {
        Eigen::Vector3d v = a * b1 + b * b2;
        detail::exp(S3, center, v, u);
        double obj = objective(S3, rows, w, u);
        if (obj < best_obj) {
          best_obj = obj;
          best = Eigen::Vector2d(a, b);
        }
      }
    }
    return best;
  };

  Eigen::Vector2d coarse = scan(Eigen::Vector2d(0, 0), M_PI / 4 + 0.05, 1e-2);
  Eigen::Vector2d fine = scan(coarse, 1.5e-2, 1e-3);
  Eigen::Vector3d v = fine(0) * b1 + fine(1) * b2;
  Eigen::VectorXd u(3);
  detail::exp(S3, center, v, u);
  return u;
}

RowMatrixXd random_cloud_s2(detail::Rng& rng, int n, double radius) {
  ManifoldPoint c = random_point(S3, rng);
  RowMatrixXd rows(n, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = random_tangent(S3, c.coords, 1.0, rng);
    double target = rng.uniform() * radius;
    if (v.norm() > 0) v *= target / v.norm();
    Eigen::VectorXd u(3);
    detail::exp(S3, c.coords, v, u);
    rows.row(i) = u;
  }
  return rows;
}

}  // namespace

TEST_CASE("init guess") {
  RowMatrixXd one(1, 3);
  one << 0, 0, 1;
  auto p = init_guess(S3, one, Eigen::VectorXd::Ones(1));
  CHECK(p.coords(2) == 1.0);

  RowMatrixXd two(2, 3);
  two << 1, 0, 0, 0, 1, 0;
  auto q = init_guess(S3, two, Eigen::VectorXd::Constant(2, 0.5));
  CHECK(q.coords(0) == Approx(1.0 / std::sqrt(2.0)));
  CHECK(q.coords(1) == Approx(1.0 / std::sqrt(2.0)));

  Geometry e{GeometryKind::Euclidean, 2, 1.0};
  RowMatrixXd three(3, 2);
  three << 0, 0, 2, 0, 0, 4;
  Eigen::VectorXd w(3);
  w << 0.5, 0.25, 0.25;
  auto m = init_guess(e, three, w);
  CHECK(m.coords(0) == Approx(0.5));
  CHECK(m.coords(1) == Approx(1.0));

  // antipodal pair with equal weights: arithmetic mean degenerates
  RowMatrixXd anti(2, 3);
  anti << 1, 0, 0, -1, 0, 0;
  CHECK_THROWS_AS(init_guess(S3, anti, Eigen::VectorXd::Constant(2, 0.5)), DegenerateInput);
}

TEST_CASE("single point is a fixed point") {
  RowMatrixXd one(1, 3);
  one << 0, 1, 0;
  MeanResult r = intrinsic_mean(S3, one, Eigen::VectorXd::Ones(1));
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK((r.mean.coords - one.row(0).transpose()).norm() < 1e-15);
}

TEST_CASE("symmetric pair centered on mu") {
  detail::Rng rng(21);
  ManifoldPoint mu = random_point(S3, rng);
  Eigen::VectorXd v = random_tangent(S3, mu.coords, 1.0, rng);
  v *= 0.3 / v.norm();
  RowMatrixXd rows(2, 3);
  Eigen::VectorXd u(3);
  detail::exp(S3, mu.coords, v, u);
  rows.row(0) = u;
  Eigen::VectorXd nv = -v;
  detail::exp(S3, mu.coords, nv, u);
  rows.row(1) = u;
  MeanResult r = intrinsic_mean(S3, rows, Eigen::VectorXd::Constant(2, 0.5));
  CHECK(r.converged);
  CHECK((r.mean.coords - mu.coords).norm() < 1e-9);
}

TEST_CASE("orthogonal triple") {
  RowMatrixXd rows(3, 3);
  rows << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  MeanResult r = intrinsic_mean(S3, rows, w);
  REQUIRE(r.converged);
  Eigen::Vector3d expected = Eigen::Vector3d::Ones().normalized();
  CHECK((r.mean.coords - expected).norm() < 1e-6);
  // independent confirmation by exhaustive grid search
  Eigen::Vector3d oracle = grid_oracle_s2(rows, w);
  CHECK(detail::dist(S3, r.mean.coords, oracle) < 2e-3);
}

TEST_CASE("characterization residual below tolerance at convergence") {
  detail::Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    RowMatrixXd rows = random_cloud_s2(rng, 12, M_PI / 4 * 0.95);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(12, 1.0 / 12.0);
    MeanResult r = intrinsic_mean(S3, rows, w);
    REQUIRE(r.converged);
    REQUIRE(characterization_residual(S3, rows, w, r.mean) < 1e-5);
  }
}

TEST_CASE("grid oracle agreement on S2") {
  detail::Rng rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    RowMatrixXd rows = random_cloud_s2(rng, 10, M_PI / 4 * 0.9);
    Eigen::VectorXd w(10);
    for (int i = 0; i < 10; ++i) w(i) = 0.5 + rng.uniform();
    w /= w.sum();
    MeanResult r = intrinsic_mean(S3, rows, w);
    REQUIRE(r.converged);
    Eigen::Vector3d oracle = grid_oracle_s2(rows, w);
    REQUIRE(detail::dist(S3, r.mean.coords, oracle) < 2e-3);
  }
}

TEST_CASE("objective is non-increasing with eta = 1") {
  detail::Rng rng(15);
  RowMatrixXd rows = random_cloud_s2(rng, 20, M_PI / 3);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(20, 0.05);
  MeanConfig cfg;
  cfg.record_objective = true;
  cfg.tolerance = 1e-12;
  MeanResult r = intrinsic_mean(S3, rows, w, cfg);
  REQUIRE(r.objective_trace.size() >= 2);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    REQUIRE(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-12);
}

TEST_CASE("permutation invariance") {
  detail::Rng rng(16);
  RowMatrixXd rows = random_cloud_s2(rng, 15, 0.6);
  Eigen::VectorXd w(15);
  for (int i = 0; i < 15; ++i) w(i) = 0.2 + rng.uniform();
  w /= w.sum();
  MeanResult a = intrinsic_mean(S3, rows, w);

  std::vector<int> perm(15);
  for (int i = 0; i < 15; ++i) perm[i] = i;
  detail::Rng shuffler(99);
  shuffler.shuffle(perm);
  RowMatrixXd rows2(15, 3);
  Eigen::VectorXd w2(15);
  for (int i = 0; i < 15; ++i) {
    rows2.row(i) = rows.row(perm[i]);
    w2(i) = w(perm[i]);
  }
  MeanResult b = intrinsic_mean(S3, rows2, w2);
  CHECK((a.mean.coords - b.mean.coords).norm() < 1e-9);
}

TEST_CASE("Euclidean closed form in one step") {
  Geometry e{GeometryKind::Euclidean, 4, 1.0};
  detail::Rng rng(23);
  RowMatrixXd rows(9, 4);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 4; ++j) rows(i, j) = rng.gaussian();
  Eigen::VectorXd w(9);
  for (int i = 0; i < 9; ++i) w(i) = 0.1 + rng.uniform();
  w /= w.sum();
  MeanResult r = intrinsic_mean(e, rows, w);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  Eigen::VectorXd direct = rows.transpose() * w;
  CHECK((r.mean.coords - direct).norm() < 1e-12);
}

TEST_CASE("weight validation") {
  RowMatrixXd rows(2, 3);
  rows << 1, 0, 0, 0, 1, 0;
  Eigen::VectorXd near_one(2);
  near_one << 0.5000004, 0.5000004;  // inside the 1e-6 renormalization band
  CHECK_NOTHROW(intrinsic_mean(S3, rows, near_one));
  Eigen::VectorXd off(2);
  off << 0.6, 0.6;
  CHECK_THROWS_AS(intrinsic_mean(S3, rows, off), ConfigError);
  Eigen::VectorXd neg(2);
  neg << 1.5, -0.5;
  CHECK_THROWS_AS(intrinsic_mean(S3, rows, neg), ConfigError);
  CHECK_THROWS_AS(intrinsic_mean(S3, rows, Eigen::VectorXd::Constant(3, 1.0 / 3)), AlignmentError);
}

TEST_CASE("non-convergence is a soft flag") {
  detail::Rng rng(31);
  RowMatrixXd rows = random_cloud_s2(rng, 30, 1.2);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(30, 1.0 / 30.0);
  MeanConfig cfg;
  cfg.max_iters = 1;
  cfg.tolerance = 1e-14;
  MeanResult r = intrinsic_mean(S3, rows, w, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("closeness warning for spread-out clouds") {
  RowMatrixXd rows(2, 3);
  rows << 1, 0, 0, 0, 1, 0;
  MeanConfig cfg;
  cfg.tolerance = 1e-3;
  cfg.max_iters = 50;
  MeanResult r = intrinsic_mean(S3, rows, Eigen::VectorXd::Constant(2, 0.5), cfg);
  CHECK_FALSE(r.closeness_warning);  // max pi/4 from the init guess

  // heavy weight pins the init near the first point; the second sits 2.6 rad away
  rows.row(1) = Eigen::Vector3d(-0.9, std::sqrt(0.19), 0).transpose();
  Eigen::VectorXd w(2);
  w << 0.9, 0.1;
  MeanResult r2 = intrinsic_mean(S3, rows, w, cfg);
  CHECK(r2.closeness_warning);
  CHECK(r2.closeness.max >= M_PI / 2);
}

TEST_CASE("Lorentz mean satisfies the characterization") {
  Geometry g{GeometryKind::Lorentz, 8, 1.0};
  detail::Rng rng(77);
  ManifoldPoint c = random_point(g, rng);
  RowMatrixXd rows(12, g.coord_dim());
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd v = random_tangent(g, c.coords, 0.3, rng);
    Eigen::VectorXd u(g.coord_dim());
    detail::exp(g, c.coords, v, u);
    rows.row(i) = u;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(12, 1.0 / 12.0);
  MeanResult r = intrinsic_mean(g, rows, w);
  REQUIRE(r.converged);
  REQUIRE(characterization_residual(g, rows, w, r.mean) < 1e-5);
}
