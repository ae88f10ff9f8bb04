#ifndef MLCFL_MLPL_H_
#define MLCFL_MLPL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "mlcfl/common.h"

namespace mlcfl::mlpl {

// Latent label per instance: 0 for negatives, 1..K for positives.
using LatentAssignment = std::vector<int>;

// [w_0 ... w_K] for one class at one scale; column 0 models the negatives.
struct ClassLatentModel {
  Label class_id = 0;
  int scale = 1;
  Matrix weights;  // d x (K + 1)
};

struct SolverOptions {
  // Convergence: relative duality gap below tol, or primal and dual both
  // moving by less than tol (relative) over one epoch.
  double tol = 1e-4;
  std::size_t max_epochs = 1000;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  double alpha = 1.0;
  std::size_t n_iter = 3;
  std::vector<int> scales = {5, 10};
  std::uint64_t seed = 0;
  // When false, class 0 only serves as negatives and gets no latent model.
  bool model_null_class = true;
  // 0 keeps every negative; otherwise a class-stratified subsample.
  std::size_t negative_cap = 0;
  // When true, classes below the minimum support are used only as
  // negatives instead of raising an error.
  bool skip_small_classes = false;
  SolverOptions solver;
  std::size_t kmeans_max_iter = 100;
  // K-means seedings tried for the initial latent partition.
  std::size_t init_restarts = 10;

  void validate() const;
};

// sum_i max(0, 1 + w_r . x_i - w_z . x_i), r the best-scoring rival of z_i
// (lowest index on ties). X holds one instance per row.
double hinge_loss(const Matrix& weights, const DataMatrix& x,
                  std::span<const int> z);

// sum_k ||w_k||^2 + alpha * hinge_loss.
double objective(const Matrix& weights, const DataMatrix& x,
                 std::span<const int> z, double alpha);

struct SolverResult {
  Matrix weights;
  // Objective of the returned (incumbent) weights after each epoch.
  std::vector<double> objective_trace;
  // Objective of the raw dual iterate after each epoch; not monotone in
  // general.
  std::vector<double> iterate_trace;
  std::vector<double> dual_trace;
  std::size_t epochs = 0;
  bool converged = false;
};

// Minimizes objective() over W for fixed labels z in [0, n_labels) with a
// Crammer-Singer dual coordinate descent. Labels absent from z keep a
// column that regularization holds near zero.
SolverResult solve_multiclass_svm(const DataMatrix& x, std::span<const int> z,
                                  int n_labels, double alpha,
                                  const SolverOptions& options = {});

struct TrainClassResult {
  ClassLatentModel model;
  // Final latent labels (1..K) of the positives, in input order.
  LatentAssignment positive_assignment;
  // Initial k-means partition of the positives (1..K).
  LatentAssignment initial_assignment;
  // Objective after each W solve, and after the following z update.
  std::vector<double> objective_after_solve;
  std::vector<double> objective_after_update;
  std::vector<SolverResult> solves;
};

// K-means initialization of the positives, then n_iter rounds of
// (solve W with z fixed; z_j = argmax_{k in 1..K} (w_k - w_0) . x_j).
TrainClassResult train_class(const DataMatrix& positives,
                             const DataMatrix& negatives, int scale,
                             const TrainConfig& config, Label class_id = 0);

struct MlplModel {
  std::size_t input_dim = 0;
  std::vector<Label> classes;  // modeled classes, ascending
  std::vector<int> scales;
  // Scale-major, then class order: models[s * classes.size() + c].
  std::vector<ClassLatentModel> models;
  TrainConfig config;
  // Objective after each W solve of the alternation, same order as models.
  std::vector<std::vector<double>> objective_traces;

  std::size_t embedding_dimension() const;
};

// sum_s m * (K_s + 1).
std::size_t embedding_dimension(std::size_t n_classes, std::span<const int> scales);

// One-vs-rest over every class in y and every scale. Throws if a modeled
// class has fewer than max(scales) instances. `jobs` workers train
// (scale, class) pairs concurrently; results do not depend on it.
MlplModel mlpl_fit(const DataMatrix& x, std::span<const Label> y,
                   const TrainConfig& config, std::size_t jobs = 1);

// Scores w_k . x in model order, latent index 0..K innermost.
Vector mlpl_transform(const MlplModel& model, const Vector& x);
DataMatrix mlpl_transform(const MlplModel& model, const DataMatrix& rows);
FeatureVector mlpl_transform(const MlplModel& model, const FeatureVector& x);

}  // namespace mlcfl::mlpl

#endif  // MLCFL_MLPL_H_
