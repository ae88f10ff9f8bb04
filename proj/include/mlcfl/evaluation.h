#ifndef MLCFL_EVALUATION_H_
#define MLCFL_EVALUATION_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mlcfl/config.h"
#include "mlcfl/dataio.h"
#include "mlcfl/pipeline.h"

namespace mlcfl::evaluation {

inline constexpr int kReportFormatVersion = 1;

// Confusion matrix over the union of truth and predicted classes;
// matrix[t][p] counts frames of class classes[t] predicted as classes[p].
struct ConfusionCounts {
  std::vector<Label> classes;  // ascending
  std::vector<std::vector<std::int64_t>> matrix;

  std::int64_t tp(std::size_t i) const;
  std::int64_t fp(std::size_t i) const;
  std::int64_t fn(std::size_t i) const;
  std::int64_t support(std::size_t i) const;  // truth count
  std::int64_t total() const;

  // Adds another table, widening the class set as needed.
  void merge(const ConfusionCounts& other);
};

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> pred);

struct ClassMetrics {
  Label label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double weight = 0.0;  // share of the truth labels
  std::int64_t support = 0;
};

struct Metrics {
  std::vector<ClassMetrics> per_class;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::int64_t n = 0;
  // Some precision or recall had a zero denominator and was taken as 0.
  bool zero_division = false;
};

Metrics metrics(const ConfusionCounts& counts);

// sum_i 2 w_i p_i r_i / (p_i + r_i), w_i the class share of `truth`.
double weighted_f1(std::span<const Label> truth, std::span<const Label> pred);
double accuracy(std::span<const Label> truth, std::span<const Label> pred);

// ---------------------------------------------------------------------------

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<Label> truth;
  std::vector<Label> pred;
  ConfusionCounts counts;
  Metrics metrics;
  std::vector<std::string> warnings;
};

struct EvalReport {
  FeatureLevel level = FeatureLevel::kMlcf;
  classifiers::Kind classifier = classifiers::Kind::kKnn;
  std::vector<std::string> label_names;
  std::vector<FoldResult> folds;
  // Confusion counts pooled over all folds.
  ConfusionCounts pooled_counts;
  Metrics pooled;
  double mean_weighted_f1 = 0.0;
  double std_weighted_f1 = 0.0;  // population std across folds
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::string config_echo;
  std::vector<std::string> notes;
};

// Called after every fold with whatever was fitted on its training frames.
using FoldObserver = std::function<void(std::size_t fold, const FeaturePipeline&,
                                        const TrainedClassifier&)>;

// For each fold, fits every learned component on the training frames only,
// then predicts the test frames. Uses config.level and config.classifier.
EvalReport run_cv(std::span<const dataio::Frame> frames, const dataio::SplitPlan& plan,
                  const PipelineConfig& config,
                  std::span<const std::string> label_names = {},
                  const FoldObserver& observer = {});

// One report per (level, classifier) cell, level-major in the order
// low, mid, compl, mlcf and classifier order knn, svm, ncc. The feature
// pipeline is fitted once per fold and shared by all cells.
std::vector<EvalReport> compare_levels(std::span<const dataio::Frame> frames,
                                       const dataio::SplitPlan& plan,
                                       const PipelineConfig& config,
                                       std::span<const std::string> label_names = {});

// Versioned key-value text document.
void write_report(std::ostream& out, const EvalReport& report);
// Versioned delimiter-separated table: one row per (cell, fold) plus
// pooled/mean/std rows.
void write_metrics_table(std::ostream& out, std::span<const EvalReport> reports);
// Weighted F1 (pooled) with levels as rows and classifiers as columns.
void write_comparison_table(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace mlcfl::evaluation

#endif  // MLCFL_EVALUATION_H_
