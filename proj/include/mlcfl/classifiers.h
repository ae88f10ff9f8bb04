#ifndef MLCFL_CLASSIFIERS_H_
#define MLCFL_CLASSIFIERS_H_

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mlcfl/common.h"
#include "mlcfl/mlpl.h"

namespace mlcfl::classifiers {

enum class Kind { kKnn, kSvm, kNcc };

std::string_view to_string(Kind kind);
Kind parse_kind(std::string_view name);

// ---------------------------------------------------------------------------

struct KnnModel {
  DataMatrix points;
  std::vector<Label> labels;
  std::size_t neighbor_k = 5;
};

struct KnnVote {
  Label label;
  std::size_t votes;
};

struct KnnPrediction {
  Label label = 0;
  std::vector<KnnVote> votes;  // ascending label order
};

KnnModel knn_fit(DataMatrix points, std::vector<Label> labels,
                 std::size_t neighbor_k = 5);

// Majority vote of the k nearest points (Euclidean). Distance ties at the
// k-th rank keep the lower training index; vote ties go to the tied label
// whose closest neighbor is nearest.
KnnPrediction knn_predict_detail(const KnnModel& model,
                                 const Eigen::Ref<const Vector>& x);
Label knn_predict(const KnnModel& model, const Eigen::Ref<const Vector>& x);

// ---------------------------------------------------------------------------

struct NccModel {
  std::vector<Label> classes;  // ascending
  DataMatrix centroids;        // one row per class
};

NccModel ncc_fit(const DataMatrix& x, std::span<const Label> y);
// Nearest centroid; lowest class index on ties.
Label ncc_predict(const NccModel& model, const Eigen::Ref<const Vector>& x);

// ---------------------------------------------------------------------------

struct LinearClassifier {
  std::vector<Label> classes;  // ascending
  Matrix weights;              // d x m, one column per class
  double c = 1.0;
};

// One-vs-rest: each class is the K = 1 configuration of the latent solver
// (negatives label 0, positives label 1); its score is (w_1 - w_0) . x.
LinearClassifier linear_fit(const DataMatrix& x, std::span<const Label> y,
                            double c = 1.0,
                            const mlpl::SolverOptions& options = {});
Vector linear_scores(const LinearClassifier& model,
                     const Eigen::Ref<const Vector>& x);
// argmax score, lowest class index on ties.
Label linear_predict(const LinearClassifier& model,
                     const Eigen::Ref<const Vector>& x);

}  // namespace mlcfl::classifiers

#endif  // MLCFL_CLASSIFIERS_H_
