#include "mlcfl/classifiers.h"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace mlcfl::classifiers {
namespace {

constexpr const char* kModule = "classifiers";

void check_dimension(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw Error(kModule, "query dimension " + std::to_string(got) +
                             " does not match model dimension " +
                             std::to_string(expected));
  }
}

std::vector<Label> sorted_classes(std::span<const Label> y) {
  std::vector<Label> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kKnn:
      return "knn";
    case Kind::kSvm:
      return "svm";
    case Kind::kNcc:
      return "ncc";
  }
  return "unknown";
}

Kind parse_kind(std::string_view name) {
  if (name == "knn") return Kind::kKnn;
  if (name == "svm") return Kind::kSvm;
  if (name == "ncc") return Kind::kNcc;
  throw Error("config", "unknown classifier '" + std::string(name) +
                            "' (expected knn|svm|ncc)");
}

KnnModel knn_fit(DataMatrix points, std::vector<Label> labels,
                 std::size_t neighbor_k) {
  if (points.rows() == 0) throw Error(kModule, "knn needs training points");
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) {
    throw Error(kModule, "knn label count does not match point count");
  }
  if (neighbor_k < 1 || neighbor_k > labels.size()) {
    throw Error(kModule, "knn neighbor count " + std::to_string(neighbor_k) +
                             " must lie in [1, " + std::to_string(labels.size()) + "]");
  }
  return {std::move(points), std::move(labels), neighbor_k};
}

KnnPrediction knn_predict_detail(const KnnModel& model,
                                 const Eigen::Ref<const Vector>& x) {
  check_dimension(model.points.cols(), x.size());
  const auto n = static_cast<std::size_t>(model.points.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = {(model.points.row(static_cast<Eigen::Index>(i)).transpose() - x).squaredNorm(), i};
  }
  const std::size_t k = model.neighbor_k;
  // Pairs order by (distance, index), which is the tie rule.
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::map<Label, std::size_t> votes;
  std::map<Label, std::size_t> first_rank;
  for (std::size_t r = 0; r < k; ++r) {
    const Label l = model.labels[dist[r].second];
    ++votes[l];
    first_rank.try_emplace(l, r);
  }
  KnnPrediction out;
  std::size_t best_votes = 0;
  std::size_t best_rank = std::numeric_limits<std::size_t>::max();
  for (const auto& [label, count] : votes) {
    out.votes.push_back({label, count});
    const std::size_t rank = first_rank.at(label);
    if (count > best_votes || (count == best_votes && rank < best_rank)) {
      best_votes = count;
      best_rank = rank;
      out.label = label;
    }
  }
  return out;
}

Label knn_predict(const KnnModel& model, const Eigen::Ref<const Vector>& x) {
  return knn_predict_detail(model, x).label;
}

NccModel ncc_fit(const DataMatrix& x, std::span<const Label> y) {
  if (x.rows() == 0) throw Error(kModule, "ncc needs training data");
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw Error(kModule, "ncc label count does not match instance count");
  }
  NccModel model;
  model.classes = sorted_classes(y);
  model.centroids = DataMatrix::Zero(static_cast<Eigen::Index>(model.classes.size()), x.cols());
  std::vector<double> counts(model.classes.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto c = static_cast<std::size_t>(
        std::lower_bound(model.classes.begin(), model.classes.end(), y[i]) -
        model.classes.begin());
    model.centroids.row(static_cast<Eigen::Index>(c)) += x.row(static_cast<Eigen::Index>(i));
    counts[c] += 1.0;
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    model.centroids.row(static_cast<Eigen::Index>(c)) /= counts[c];
  return model;
}

Label ncc_predict(const NccModel& model, const Eigen::Ref<const Vector>& x) {
  check_dimension(model.centroids.cols(), x.size());
  double best = std::numeric_limits<double>::infinity();
  Label arg = model.classes.front();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const double d =
        (model.centroids.row(static_cast<Eigen::Index>(c)).transpose() - x).squaredNorm();
    if (d < best) {
      best = d;
      arg = model.classes[c];
    }
  }
  return arg;
}

LinearClassifier linear_fit(const DataMatrix& x, std::span<const Label> y,
                            double c, const mlpl::SolverOptions& options) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw Error(kModule, "linear classifier label count does not match instance count");
  }
  LinearClassifier model;
  model.classes = sorted_classes(y);
  model.c = c;
  if (model.classes.size() < 2) {
    throw Error(kModule, "linear classifier needs at least 2 classes");
  }
  model.weights = Matrix::Zero(x.cols(), static_cast<Eigen::Index>(model.classes.size()));
  std::vector<int> z(y.size());
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = y[i] == model.classes[k] ? 1 : 0;
    // Same seed for every class so results depend only on the partition.
    const auto solved = mlpl::solve_multiclass_svm(x, z, 2, c, options);
    model.weights.col(static_cast<Eigen::Index>(k)) =
        solved.weights.col(1) - solved.weights.col(0);
  }
  return model;
}

Vector linear_scores(const LinearClassifier& model,
                     const Eigen::Ref<const Vector>& x) {
  check_dimension(model.weights.rows(), x.size());
  return model.weights.transpose() * x;
}

Label linear_predict(const LinearClassifier& model,
                     const Eigen::Ref<const Vector>& x) {
  const Vector s = linear_scores(model, x);
  Eigen::Index arg = 0;
  for (Eigen::Index k = 1; k < s.size(); ++k)
    if (s[k] > s[arg]) arg = k;
  return model.classes[static_cast<std::size_t>(arg)];
}

}  // namespace mlcfl::classifiers
