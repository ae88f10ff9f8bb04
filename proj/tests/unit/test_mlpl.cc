#include <doctest.h>

#include <algorithm>
#include <map>
#include <numbers>
#include <set>

#include "mlcfl/mlpl.h"
#include "test_util.h"

using namespace mlcfl;
using namespace mlcfl::mlpl;
using mlcfl::testing::random_rows;
using mlcfl::testing::random_vector;

namespace {

// Scans every rival explicitly.
double hinge_oracle(const Matrix& w, const DataMatrix& x, const std::vector<int>& z) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int zi = z[static_cast<std::size_t>(i)];
    double own = 0.0;
    for (Eigen::Index d = 0; d < x.cols(); ++d) own += w(d, zi) * x(i, d);
    double rival = -1e300;
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      if (k == zi) continue;
      double s = 0.0;
      for (Eigen::Index d = 0; d < x.cols(); ++d) s += w(d, k) * x(i, d);
      rival = std::max(rival, s);
    }
    total += std::max(0.0, 1.0 + rival - own);
  }
  return total;
}

// Labels 0..n_labels-1, each instance near its label's centre.
std::pair<DataMatrix, std::vector<int>> clustered(Rng& rng, int n_labels, int per, int dim,
                                                  double spread, double radius) {
  const DataMatrix centres = random_rows(rng, n_labels, dim, radius);
  DataMatrix x(n_labels * per, dim);
  std::vector<int> z;
  for (int l = 0; l < n_labels; ++l)
    for (int p = 0; p < per; ++p) {
      x.row(l * per + p) = centres.row(l) + spread * random_vector(rng, dim).transpose();
      z.push_back(l);
    }
  return {x, z};
}

double min_margin(const Matrix& w, const DataMatrix& x, const std::vector<int>& z) {
  double worst = 1e300;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector s = w.transpose() * x.row(i).transpose();
    const int zi = z[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (k != zi) worst = std::min(worst, s[zi] - s[k]);
  }
  return worst;
}

}  // namespace

TEST_CASE("hinge: zero weights cost one per instance; objective adds the norm") {
  Rng rng(1);
  const DataMatrix x = random_rows(rng, 7, 3);
  const std::vector<int> z = {0, 1, 2, 0, 1, 2, 1};
  const Matrix w0 = Matrix::Zero(3, 3);
  CHECK(hinge_loss(w0, x, z) == doctest::Approx(7.0));
  CHECK(objective(w0, x, z, 1.0) == doctest::Approx(7.0));
  const Matrix w = Matrix::Random(3, 3);
  const double h = hinge_loss(w, x, z);
  CHECK(objective(w, x, z, 2.0) - w.squaredNorm() ==
        doctest::Approx(2.0 * (objective(w, x, z, 1.0) - w.squaredNorm())));
  CHECK(objective(w, x, z, 0.7) == doctest::Approx(w.squaredNorm() + 0.7 * h));
}

TEST_CASE("hinge: hand-set 2-D weights match the rival-scan oracle") {
  DataMatrix x(3, 2);
  x << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
  Matrix w(2, 3);
  w << 2.0, -1.0, 0.5, 0.0, 1.5, 0.5;
  const std::vector<int> z = {0, 1, 2};
  // Scores: x0 -> (2, -1, .5): own 2, rival .5, loss 0
  //         x1 -> (0, 1.5, .5): own 1.5, rival .5, loss 0
  //         x2 -> (2, .5, 1): own 1, rival 2, loss 2
  CHECK(hinge_loss(w, x, z) == doctest::Approx(2.0));
  CHECK(hinge_oracle(w, x, z) == doctest::Approx(2.0));
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const int labels = 2 + static_cast<int>(rng.uniform_index(4));
    const DataMatrix xr = random_rows(rng, 10, 4);
    std::vector<int> zr(10);
    for (int& v : zr) v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(labels)));
    const Matrix wr = random_rows(rng, 4, labels);
    CHECK(hinge_loss(wr, xr, zr) == doctest::Approx(hinge_oracle(wr, xr, zr)).epsilon(1e-12));
  }
}

TEST_CASE("hinge: zero loss implies unit margins over every rival") {
  Rng rng(3);
  int zero_cases = 0;
  for (int t = 0; t < 300; ++t) {
    const DataMatrix x = random_rows(rng, 4, 2);
    std::vector<int> z(4);
    for (int& v : z) v = static_cast<int>(rng.uniform_index(3));
    // Label each point by its best score so that large weights leave no loss.
    const Matrix w = random_rows(rng, 2, 3, 50.0);
    for (Eigen::Index i = 0; i < 4; ++i) {
      Eigen::Index arg = 0;
      (w.transpose() * x.row(i).transpose()).maxCoeff(&arg);
      z[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    if (hinge_loss(w, x, z) == 0.0) {
      ++zero_cases;
      CHECK(min_margin(w, x, z) >= 1.0);
    }
  }
  CHECK(zero_cases > 0);
}

TEST_CASE("solver: monotone incumbent trace and separable data") {
  // Three clusters in distinct angular sectors: separable without a bias.
  Rng rng(4);
  DataMatrix x(30, 2);
  std::vector<int> z;
  for (int l = 0; l < 3; ++l)
    for (int p = 0; p < 10; ++p) {
      const double angle = 2.0 * std::numbers::pi * l / 3.0;
      x(l * 10 + p, 0) = 5.0 * std::cos(angle) + 0.3 * rng.normal();
      x(l * 10 + p, 1) = 5.0 * std::sin(angle) + 0.3 * rng.normal();
      z.push_back(l);
    }
  SolverOptions opt;
  opt.tol = 1e-8;
  opt.max_epochs = 5000;
  const SolverResult r = solve_multiclass_svm(x, z, 3, 1e3, opt);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-9);
  CHECK(r.objective_trace.size() == r.epochs);
  CHECK(r.dual_trace.back() <= r.objective_trace.back() + 1e-9);
  CHECK(min_margin(r.weights, x, z) >= 1.0 - 1e-3);
  CHECK(r.weights.allFinite());
}

TEST_CASE("solver: orthogonal unit inputs align each weight with its instance") {
  DataMatrix x = DataMatrix::Identity(4, 4);
  const std::vector<int> z = {0, 1, 2, 3};
  const SolverResult r = solve_multiclass_svm(x, z, 4, 1.0);
  for (Eigen::Index k = 0; k < 4; ++k) {
    const Vector s = r.weights.transpose() * x.row(k).transpose();
    CHECK(s[k] > 0.0);
    for (Eigen::Index j = 0; j < 4; ++j)
      if (j != k) CHECK(s[k] > s[j]);
  }
}

TEST_CASE("solver: duplicating the data equals doubling alpha") {
  Rng rng(5);
  auto [x, z] = clustered(rng, 3, 6, 3, 1.5, 1.0);
  DataMatrix x2(2 * x.rows(), x.cols());
  x2 << x, x;
  std::vector<int> z2 = z;
  z2.insert(z2.end(), z.begin(), z.end());
  SolverOptions opt;
  opt.tol = 1e-10;
  opt.max_epochs = 20000;
  const SolverResult dup = solve_multiclass_svm(x2, z2, 3, 0.8, opt);
  const SolverResult dbl = solve_multiclass_svm(x, z, 3, 1.6, opt);
  const double od = objective(dup.weights, x, z, 1.6);
  const double ob = objective(dbl.weights, x, z, 1.6);
  CHECK(od == doctest::Approx(ob).epsilon(1e-6));
  CHECK((dup.weights - dbl.weights).norm() < 1e-3 * (1.0 + dbl.weights.norm()));
}

TEST_CASE("solver: errors and determinism") {
  Rng rng(6);
  auto [x, z] = clustered(rng, 2, 5, 2, 0.5, 2.0);
  CHECK_THROWS_AS(solve_multiclass_svm(x, z, 1, 1.0), Error);
  CHECK_THROWS_AS(solve_multiclass_svm(x, z, 2, 0.0), Error);
  DataMatrix bad = x;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_multiclass_svm(bad, z, 2, 1.0), Error);
  SolverOptions opt;
  opt.seed = 77;
  const SolverResult a = solve_multiclass_svm(x, z, 2, 1.0, opt);
  const SolverResult b = solve_multiclass_svm(x, z, 2, 1.0, opt);
  CHECK(a.weights == b.weights);
  CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("train_class: separated clusters are recovered up to permutation") {
  Rng rng(7);
  for (int k : {2, 3, 4}) {
    DataMatrix centres = random_rows(rng, k, 4, 8.0);
    DataMatrix pos(k * 15, 4);
    std::vector<int> truth;
    for (int c = 0; c < k; ++c)
      for (int j = 0; j < 15; ++j) {
        pos.row(c * 15 + j) = centres.row(c) + 0.05 * random_vector(rng, 4).transpose();
        truth.push_back(c);
      }
    const DataMatrix neg = random_rows(rng, 40, 4, 8.0);
    TrainConfig cfg;
    cfg.seed = 3;
    const TrainClassResult r = train_class(pos, neg, k, cfg);
    REQUIRE(r.positive_assignment.size() == pos.rows());
    std::map<int, std::set<int>> to_truth;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      CHECK(r.positive_assignment[j] >= 1);
      CHECK(r.positive_assignment[j] <= k);
      to_truth[r.positive_assignment[j]].insert(truth[j]);
    }
    CHECK(to_truth.size() == static_cast<std::size_t>(k));
    for (const auto& [latent, ts] : to_truth) CHECK(ts.size() == 1);
    CHECK(r.model.weights.cols() == k + 1);
    CHECK(r.objective_after_solve.size() == cfg.n_iter);
    CHECK(r.objective_after_update.size() == cfg.n_iter);
    for (const auto& s : r.solves)
      for (std::size_t i = 1; i < s.objective_trace.size(); ++i)
        CHECK(s.objective_trace[i] <= s.objective_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("train_class: K = 1 is a binary max-margin problem") {
  Rng rng(8);
  DataMatrix pos = random_rows(rng, 20, 2, 0.3);
  for (Eigen::Index i = 0; i < 20; ++i) pos(i, 0) += 3.0;
  DataMatrix neg = random_rows(rng, 20, 2, 0.3);
  for (Eigen::Index i = 0; i < 20; ++i) neg(i, 0) -= 3.0;
  TrainConfig cfg;
  const TrainClassResult r = train_class(pos, neg, 1, cfg);
  for (int z : r.positive_assignment) CHECK(z == 1);
  const Vector diff = r.model.weights.col(1) - r.model.weights.col(0);
  for (Eigen::Index i = 0; i < 20; ++i) {
    CHECK(pos.row(i).dot(diff) > 0.0);
    CHECK(neg.row(i).dot(diff) < 0.0);
  }
  // With fixed labels, repeated solves land on the same objective.
  CHECK(r.objective_after_solve.back() == doctest::Approx(r.objective_after_solve.front()).epsilon(1e-3));
}

TEST_CASE("train_class: preconditions") {
  Rng rng(9);
  const DataMatrix pos = random_rows(rng, 3, 2);
  const DataMatrix neg = random_rows(rng, 5, 2);
  CHECK_THROWS_WITH_AS(train_class(pos, neg, 5, TrainConfig{}, 4), doctest::Contains("smaller scale"),
                       Error);
  CHECK_THROWS_AS(train_class(pos, DataMatrix(0, 2), 2, TrainConfig{}), Error);
}

TEST_CASE("embedding dimension follows sum over scales of m (K + 1)") {
  const std::vector<int> defaults = {5, 10};
  CHECK(embedding_dimension(11, defaults) == 187);
  CHECK(embedding_dimension(6, defaults) == 102);
  CHECK(embedding_dimension(14, defaults) == 238);
  CHECK(embedding_dimension(2, std::vector<int>{1}) == 4);
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 1 + rng.uniform_index(20);
    std::vector<int> scales(1 + rng.uniform_index(4));
    std::size_t want = 0;
    for (int& s : scales) {
      s = 1 + static_cast<int>(rng.uniform_index(12));
      want += m * static_cast<std::size_t>(s + 1);
    }
    CHECK(embedding_dimension(m, scales) == want);
  }
}

TEST_CASE("mlpl_fit: dimensions, ordering, thread independence and transform") {
  Rng rng(11);
  const int m = 4;
  DataMatrix x(m * 12, 5);
  std::vector<Label> y;
  for (int c = 0; c < m; ++c)
    for (int j = 0; j < 12; ++j) {
      x.row(c * 12 + j) = random_vector(rng, 5).transpose() + Vector::Constant(5, c).transpose();
      y.push_back(c);
    }
  TrainConfig cfg;
  cfg.scales = {2, 3};
  cfg.seed = 5;
  const MlplModel a = mlpl_fit(x, y, cfg, 1);
  const MlplModel b = mlpl_fit(x, y, cfg, 3);
  CHECK(a.embedding_dimension() == 4 * 3 + 4 * 4);
  REQUIRE(a.models.size() == 8);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(a.models[s * 4 + c].scale == cfg.scales[s]);
      CHECK(a.models[s * 4 + c].class_id == static_cast<Label>(c));
    }
  for (std::size_t i = 0; i < a.models.size(); ++i) CHECK(a.models[i].weights == b.models[i].weights);

  CHECK(mlpl_transform(a, Vector(Vector::Zero(5))).norm() == 0.0);
  const Vector x1 = random_vector(rng, 5), x2 = random_vector(rng, 5);
  const Vector f1 = mlpl_transform(a, x1), f2 = mlpl_transform(a, x2);
  CHECK((mlpl_transform(a, Vector(2.5 * x1)) - 2.5 * f1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((mlpl_transform(a, Vector(x1 + x2)) - f1 - f2).cwiseAbs().maxCoeff() < 1e-12);
  // Layout: scale-major, class, then latent columns 0..K.
  Eigen::Index pos = 0;
  for (const auto& model : a.models)
    for (Eigen::Index k = 0; k < model.weights.cols(); ++k)
      CHECK(f1[pos++] == doctest::Approx(model.weights.col(k).dot(x1)));
  const DataMatrix rows = mlpl_transform(a, DataMatrix(x.topRows(3)));
  CHECK(rows.row(1).transpose().isApprox(mlpl_transform(a, Vector(x.row(1).transpose()))));
  CHECK_THROWS_AS(mlpl_transform(a, Vector(Vector::Zero(4))), Error);
}

TEST_CASE("mlpl_transform: hand-set single-class model") {
  MlplModel model;
  model.input_dim = 2;
  model.classes = {0};
  model.scales = {1};
  ClassLatentModel cm;
  cm.weights.resize(2, 2);
  cm.weights << 1.0, 2.0, 3.0, 4.0;
  model.models = {cm};
  const Vector f = mlpl_transform(model, Vector(Eigen::Vector2d(1.0, -1.0)));
  REQUIRE(f.size() == 2);
  CHECK(f[0] == doctest::Approx(1.0 - 3.0));
  CHECK(f[1] == doctest::Approx(2.0 - 4.0));
}

TEST_CASE("mlpl_fit: class support, null class and negative cap options") {
  Rng rng(12);
  DataMatrix x = random_rows(rng, 33, 3);
  std::vector<Label> y(33, 1);
  for (std::size_t i = 0; i < 15; ++i) y[i] = 0;
  for (std::size_t i = 15; i < 18; ++i) y[i] = 2;
  TrainConfig cfg;
  cfg.scales = {4};
  CHECK_THROWS_WITH_AS(mlpl_fit(x, y, cfg), doctest::Contains("class 2"), Error);
  cfg.skip_small_classes = true;
  const MlplModel skipped = mlpl_fit(x, y, cfg);
  CHECK(skipped.classes == std::vector<Label>{0, 1});
  cfg.model_null_class = false;
  const MlplModel no_null = mlpl_fit(x, y, cfg);
  CHECK(no_null.classes == std::vector<Label>{1});
  cfg.negative_cap = 5;
  const MlplModel capped = mlpl_fit(x, y, cfg);
  CHECK(capped.embedding_dimension() == 5);
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(mlpl_fit(x, y, cfg), Error);
}
