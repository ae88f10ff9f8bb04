#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "mlcfl/classifiers.h"
#include "test_util.h"

using namespace mlcfl;
using namespace mlcfl::classifiers;
using mlcfl::testing::random_rows;
using mlcfl::testing::random_vector;

namespace {

// Full sort by (distance, index), then count votes; ties go to the label met first.
Label knn_oracle(const DataMatrix& pts, const std::vector<Label>& labels, std::size_t k,
                 const Vector& q) {
  std::vector<std::size_t> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> d(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    d[i] = (pts.row(static_cast<Eigen::Index>(i)).transpose() - q).squaredNorm();
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return d[a] != d[b] ? d[a] < d[b] : a < b;
  });
  std::map<Label, std::size_t> votes;
  for (std::size_t r = 0; r < k; ++r) ++votes[labels[idx[r]]];
  std::size_t top = 0;
  for (const auto& [l, v] : votes) top = std::max(top, v);
  for (std::size_t r = 0; r < k; ++r)
    if (votes[labels[idx[r]]] == top) return labels[idx[r]];
  return -1;
}

std::pair<DataMatrix, std::vector<Label>> blobs(Rng& rng, int classes, int per, int dim,
                                                double spread) {
  DataMatrix x(classes * per, dim);
  std::vector<Label> y;
  for (int c = 0; c < classes; ++c) {
    const Vector centre = random_vector(rng, dim) * 4.0;
    for (int p = 0; p < per; ++p) {
      x.row(c * per + p) = (centre + spread * random_vector(rng, dim)).transpose();
      y.push_back(c);
    }
  }
  return {x, y};
}

}  // namespace

TEST_CASE("knn: exact match and majority") {
  DataMatrix pts(6, 1);
  pts << 0.0, 1.0, 2.0, 3.0, 4.0, 100.0;
  const KnnModel m1 = knn_fit(pts, {3, 3, 3, 1, 1, 7}, 1);
  CHECK(knn_predict(m1, Vector::Constant(1, 100.0)) == 7);
  const KnnModel m5 = knn_fit(pts, {3, 3, 3, 1, 1, 7}, 5);
  const KnnPrediction p = knn_predict_detail(m5, Vector::Constant(1, 2.0));
  CHECK(p.label == 3);
  REQUIRE(p.votes.size() == 2);
  CHECK(p.votes[0].label == 1);
  CHECK(p.votes[0].votes == 2);
  CHECK(p.votes[1].votes == 3);
  CHECK_THROWS_AS(knn_fit(pts, {1, 1, 1, 1, 1, 1}, 7), Error);
  CHECK_THROWS_AS(knn_fit(pts, {1, 1, 1, 1, 1, 1}, 0), Error);
  CHECK_THROWS_AS(knn_predict(m5, Vector::Zero(2)), Error);
}

TEST_CASE("knn: vote ties go to the tied label with the nearest neighbor") {
  DataMatrix pts(4, 1);
  pts << 1.0, -2.0, 3.0, -4.0;
  const KnnModel m = knn_fit(pts, {5, 2, 5, 2}, 4);
  CHECK(knn_predict(m, Vector::Zero(1)) == 5);
  const KnnModel m2 = knn_fit(pts, {2, 5, 2, 5}, 4);
  CHECK(knn_predict(m2, Vector::Zero(1)) == 2);
  // Distance tie at the k-th rank keeps the lower training index.
  DataMatrix eq(3, 1);
  eq << 1.0, -1.0, 1.0;
  CHECK(knn_predict(knn_fit(eq, {4, 9, 9}, 1), Vector::Zero(1)) == 4);
}

TEST_CASE("knn: matches the brute-force oracle and is translation and scale invariant") {
  Rng rng(1);
  const DataMatrix pts = random_rows(rng, 200, 3);
  std::vector<Label> labels(200);
  for (Label& l : labels) l = static_cast<Label>(rng.uniform_index(4));
  const Vector shift = random_vector(rng, 3) * 10.0;
  DataMatrix moved = pts;
  moved.rowwise() += shift.transpose();
  for (std::size_t k : {1u, 4u, 5u, 9u}) {
    const KnnModel m = knn_fit(pts, labels, k);
    const KnnModel mt = knn_fit(moved, labels, k);
    const KnnModel ms = knn_fit(DataMatrix(pts * 3.5), labels, k);
    for (int t = 0; t < 100; ++t) {
      const Vector q = random_vector(rng, 3);
      const Label l = knn_predict(m, q);
      CHECK(l == knn_oracle(pts, labels, k, q));
      CHECK(knn_predict(mt, Vector(q + shift)) == l);
      CHECK(knn_predict(ms, Vector(q * 3.5)) == l);
    }
  }
}

TEST_CASE("ncc: centroids, ties and the mean-only dependence") {
  DataMatrix x(4, 2);
  x << 1.0, 0.0, 3.0, 0.0, -1.0, 0.0, -3.0, 0.0;
  const NccModel m = ncc_fit(x, std::vector<Label>{4, 4, 2, 2});
  CHECK(m.classes == std::vector<Label>{2, 4});
  CHECK(ncc_predict(m, Vector(Eigen::Vector2d(2.0, 0.0))) == 4);
  CHECK(ncc_predict(m, Vector(Eigen::Vector2d(0.0, 5.0))) == 2);

  Rng rng(2);
  auto [xr, yr] = blobs(rng, 4, 25, 3, 1.5);
  const NccModel mr = ncc_fit(xr, yr);
  for (int c = 0; c < 4; ++c) {
    const Vector mean = xr.middleRows(c * 25, 25).colwise().mean().transpose();
    CHECK((mr.centroids.row(c).transpose() - mean).norm() < 1e-12);
    CHECK(ncc_predict(mr, mean) == c);
  }
  DataMatrix means = xr;
  for (int c = 0; c < 4; ++c)
    for (int p = 0; p < 25; ++p) means.row(c * 25 + p) = mr.centroids.row(c);
  const NccModel mm = ncc_fit(means, yr);
  for (int t = 0; t < 100; ++t) {
    const Vector q = random_vector(rng, 3) * 4.0;
    CHECK(ncc_predict(mm, q) == ncc_predict(mr, q));
  }
}

TEST_CASE("linear: separable data, zero input and error on one class") {
  Rng rng(3);
  DataMatrix x(40, 2);
  std::vector<Label> y;
  for (Eigen::Index i = 0; i < 40; ++i) {
    const bool pos = i < 20;
    x(i, 0) = (pos ? 2.0 : -2.0) + 0.4 * rng.normal();
    x(i, 1) = rng.normal();
    y.push_back(pos ? 1 : 3);
  }
  const LinearClassifier m = linear_fit(x, y);
  CHECK(m.classes == std::vector<Label>{1, 3});
  CHECK(m.weights.rows() == 2);
  CHECK(m.weights.allFinite());
  for (Eigen::Index i = 0; i < 40; ++i) CHECK(linear_predict(m, x.row(i).transpose()) == y[i]);
  CHECK(linear_predict(m, Vector::Zero(2)) == 1);
  CHECK_THROWS_AS(linear_fit(x, std::vector<Label>(40, 2)), Error);
}

TEST_CASE("linear: relabeling permutes predictions and common weight shifts are harmless") {
  Rng rng(4);
  auto [x, y] = blobs(rng, 3, 20, 4, 1.0);
  const LinearClassifier m = linear_fit(x, y, 1.0);
  const std::map<Label, Label> perm = {{0, 7}, {1, 2}, {2, 5}};
  std::vector<Label> yp;
  for (Label l : y) yp.push_back(perm.at(l));
  const LinearClassifier mp = linear_fit(x, yp, 1.0);
  LinearClassifier shifted = m;
  const Vector common = random_vector(rng, 4);
  shifted.weights.colwise() += common;
  for (int t = 0; t < 100; ++t) {
    const Vector q = random_vector(rng, 4) * 4.0;
    const Label l = linear_predict(m, q);
    CHECK(linear_predict(mp, q) == perm.at(l));
    CHECK(linear_predict(shifted, q) == l);
  }
}

TEST_CASE("classifiers: names parse and print") {
  for (Kind k : {Kind::kKnn, Kind::kSvm, Kind::kNcc}) CHECK(parse_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_kind("rf"), Error);
}
