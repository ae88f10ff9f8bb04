#include "mlcfl/mlpl.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "mlcfl/midlevel.h"
#include "mlcfl/rng.h"

namespace mlcfl::mlpl {
namespace {

constexpr const char* kModule = "mlpl";

void check_shapes(const Matrix& weights, const DataMatrix& x,
                  std::span<const int> z) {
  if (weights.rows() != x.cols()) {
    throw Error(kModule, "weight dimension " + std::to_string(weights.rows()) +
                             " does not match instance dimension " +
                             std::to_string(x.cols()));
  }
  if (static_cast<Eigen::Index>(z.size()) != x.rows()) {
    throw Error(kModule, "latent label count does not match instance count");
  }
  for (int label : z)
    if (label < 0 || label >= weights.cols())
      throw Error(kModule, "latent label " + std::to_string(label) + " out of range");
}

// Exact minimizer of the per-instance Crammer-Singer subproblem (the
// sorting procedure of Keerthi et al. / LIBLINEAR's MCSVM_CS).
void solve_subproblem(double a_i, int y, double c, const std::vector<double>& b,
                      std::vector<double>& d, std::vector<double>& alpha_new) {
  const std::size_t n = b.size();
  d = b;
  d[static_cast<std::size_t>(y)] += a_i * c;
  std::sort(d.begin(), d.end(), std::greater<>());
  double beta = d[0] - a_i * c;
  std::size_t r = 1;
  for (; r < n && beta < static_cast<double>(r) * d[r]; ++r) beta += d[r];
  beta /= static_cast<double>(r);
  for (std::size_t m = 0; m < n; ++m) {
    const double bound = static_cast<int>(m) == y ? c : 0.0;
    alpha_new[m] = std::min(bound, (beta - b[m]) / a_i);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw Error(kModule, "alpha must be positive");
  if (n_iter < 1) throw Error(kModule, "n_iter must be at least 1");
  if (scales.empty()) throw Error(kModule, "at least one latent scale required");
  if (init_restarts < 1) throw Error(kModule, "init_restarts must be at least 1");
  for (int s : scales)
    if (s < 1) throw Error(kModule, "latent scales must be at least 1");
}

double hinge_loss(const Matrix& weights, const DataMatrix& x,
                  std::span<const int> z) {
  check_shapes(weights, x, z);
  const Eigen::Index n_labels = weights.cols();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector scores = weights.transpose() * x.row(i).transpose();
    const int zi = z[static_cast<std::size_t>(i)];
    double rival = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n_labels; ++k)
      if (k != zi && scores[k] > rival) rival = scores[k];
    if (n_labels == 1) rival = scores[0];
    loss += std::max(0.0, 1.0 + rival - scores[zi]);
  }
  return loss;
}

double objective(const Matrix& weights, const DataMatrix& x,
                 std::span<const int> z, double alpha) {
  return weights.squaredNorm() + alpha * hinge_loss(weights, x, z);
}

SolverResult solve_multiclass_svm(const DataMatrix& x, std::span<const int> z,
                                  int n_labels, double alpha,
                                  const SolverOptions& options) {
  if (n_labels < 2) throw Error(kModule, "multi-class solver needs at least 2 labels");
  if (!(alpha > 0.0)) throw Error(kModule, "alpha must be positive");
  if (!x.allFinite()) throw Error(kModule, "non-finite feature values");
  const Eigen::Index n = x.rows();
  const Eigen::Index dim = x.cols();
  const auto labels = static_cast<std::size_t>(n_labels);
  SolverResult result;
  result.weights = Matrix::Zero(dim, n_labels);
  check_shapes(result.weights, x, z);
  if (n == 0) return result;

  // Our objective is twice  1/2 sum ||w||^2 + C sum xi  with C = alpha / 2.
  const double c = alpha / 2.0;
  Matrix w = Matrix::Zero(dim, n_labels);
  std::vector<double> dual(static_cast<std::size_t>(n) * labels, 0.0);
  Vector norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms[i] = x.row(i).squaredNorm();

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(options.seed);
  std::vector<double> g(labels), b(labels), scratch(labels), alpha_new(labels);

  double best = objective(w, x, z, alpha);
  double prev_primal = best;
  double prev_dual = 0.0;
  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t idx : order) {
      const auto i = static_cast<Eigen::Index>(idx);
      const double a_i = norms[i];
      if (a_i <= 0.0) continue;
      const int y = z[idx];
      double* alpha_i = &dual[idx * labels];
      const Vector scores = w.transpose() * x.row(i).transpose();
      for (std::size_t m = 0; m < labels; ++m) {
        g[m] = scores[static_cast<Eigen::Index>(m)] + (static_cast<int>(m) == y ? 0.0 : 1.0);
        b[m] = g[m] - a_i * alpha_i[m];
      }
      solve_subproblem(a_i, y, c, b, scratch, alpha_new);
      for (std::size_t m = 0; m < labels; ++m) {
        const double delta = alpha_new[m] - alpha_i[m];
        alpha_i[m] = alpha_new[m];
        if (std::abs(delta) >= 1e-14)
          w.col(static_cast<Eigen::Index>(m)) += delta * x.row(i).transpose();
      }
    }

    // Dual lower bound on the optimum, in the scale of objective().
    double linear = 0.0;
    for (std::size_t idx = 0; idx < order.size(); ++idx)
      for (std::size_t m = 0; m < labels; ++m)
        if (static_cast<int>(m) != z[idx]) linear += dual[idx * labels + m];
    const double dual_value = -w.squaredNorm() - 2.0 * linear;
    const double primal = objective(w, x, z, alpha);
    result.iterate_trace.push_back(primal);
    result.dual_trace.push_back(dual_value);
    if (primal < best) {
      best = primal;
      result.weights = w;
    }
    result.objective_trace.push_back(best);
    result.epochs = epoch + 1;

    const double scale = std::max(std::abs(best), 1e-300);
    const double gap = (best - dual_value) / scale;
    const double primal_move = std::abs(prev_primal - primal) / scale;
    const double dual_move = std::abs(dual_value - prev_dual) / scale;
    if (gap < options.tol ||
        (epoch > 0 && primal_move < options.tol && dual_move < options.tol)) {
      result.converged = true;
      break;
    }
    prev_primal = primal;
    prev_dual = dual_value;
  }
  return result;
}

TrainClassResult train_class(const DataMatrix& positives,
                             const DataMatrix& negatives, int scale,
                             const TrainConfig& config, Label class_id) {
  config.validate();
  if (scale < 1) throw Error(kModule, "latent scale must be at least 1");
  const auto n_pos = static_cast<std::size_t>(positives.rows());
  if (n_pos < static_cast<std::size_t>(scale)) {
    throw Error(kModule, "class " + std::to_string(class_id) + " has " +
                             std::to_string(n_pos) + " positive instances, fewer than " +
                             std::to_string(scale) +
                             " latent patterns; use a smaller scale");
  }
  if (negatives.rows() == 0) {
    throw Error(kModule, "class " + std::to_string(class_id) + " has no negative instances");
  }
  if (positives.cols() != negatives.cols()) {
    throw Error(kModule, "positive and negative dimensions differ");
  }

  const Eigen::Index n_neg = negatives.rows();
  DataMatrix x(static_cast<Eigen::Index>(n_pos) + n_neg, positives.cols());
  x << positives, negatives;

  TrainClassResult result;
  midlevel::KMeansOptions km;
  km.max_iter = config.kmeans_max_iter;
  km.seed = derive_seed(config.seed, 0x6b6d);
  km.restarts = config.init_restarts;
  const auto init = midlevel::kmeans_fit(positives, static_cast<std::size_t>(scale), km);
  std::vector<int> z(static_cast<std::size_t>(x.rows()), 0);
  for (std::size_t j = 0; j < n_pos; ++j) z[j] = static_cast<int>(init.assignment[j]) + 1;
  result.initial_assignment.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n_pos));

  Matrix w;
  for (std::size_t it = 0; it < config.n_iter; ++it) {
    SolverOptions so = config.solver;
    so.seed = derive_seed(config.seed, it);
    SolverResult solved = solve_multiclass_svm(x, z, scale + 1, config.alpha, so);
    w = solved.weights;
    result.objective_after_solve.push_back(objective(w, x, z, config.alpha));
    result.solves.push_back(std::move(solved));

    for (std::size_t j = 0; j < n_pos; ++j) {
      const Vector s = w.transpose() * positives.row(static_cast<Eigen::Index>(j)).transpose();
      int arg = 1;
      double top = s[1] - s[0];
      for (int k = 2; k <= scale; ++k) {
        if (s[k] - s[0] > top) {
          top = s[k] - s[0];
          arg = k;
        }
      }
      z[j] = arg;
    }
    result.objective_after_update.push_back(objective(w, x, z, config.alpha));
  }

  result.model.class_id = class_id;
  result.model.scale = scale;
  result.model.weights = std::move(w);
  result.positive_assignment.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n_pos));
  return result;
}

std::size_t embedding_dimension(std::size_t n_classes, std::span<const int> scales) {
  std::size_t d = 0;
  for (int s : scales) d += n_classes * static_cast<std::size_t>(s + 1);
  return d;
}

std::size_t MlplModel::embedding_dimension() const {
  std::size_t d = 0;
  for (const auto& m : models) d += static_cast<std::size_t>(m.weights.cols());
  return d;
}

namespace {

DataMatrix gather_rows(const DataMatrix& x, const std::vector<std::size_t>& rows) {
  DataMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// Class-stratified subsample of at most `cap` negatives, kept in input order.
std::vector<std::size_t> cap_negatives(const std::vector<std::size_t>& negatives,
                                       std::span<const Label> y, std::size_t cap,
                                       std::uint64_t seed) {
  if (cap == 0 || negatives.size() <= cap) return negatives;
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i : negatives) by_class[y[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> kept;
  const double ratio = static_cast<double>(cap) / static_cast<double>(negatives.size());
  for (auto& [label, idx] : by_class) {
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size()))));
    rng.shuffle(std::span(idx));
    kept.insert(kept.end(), idx.begin(),
                idx.begin() + static_cast<std::ptrdiff_t>(std::min(take, idx.size())));
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

MlplModel mlpl_fit(const DataMatrix& x, std::span<const Label> y,
                   const TrainConfig& config, std::size_t jobs) {
  config.validate();
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw Error(kModule, "label count does not match instance count");
  }
  if (!x.allFinite()) throw Error(kModule, "non-finite feature values");

  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(i);

  MlplModel model;
  model.input_dim = static_cast<std::size_t>(x.cols());
  model.scales = config.scales;
  model.config = config;
  const int max_scale = *std::max_element(config.scales.begin(), config.scales.end());
  for (const auto& [label, idx] : members) {
    if (label == 0 && !config.model_null_class) continue;
    if (idx.size() < static_cast<std::size_t>(max_scale)) {
      if (config.skip_small_classes) continue;
      throw Error(kModule, "class " + std::to_string(label) + " has " +
                               std::to_string(idx.size()) +
                               " training instances, below the minimum of " +
                               std::to_string(max_scale) + " for the largest scale");
    }
    model.classes.push_back(label);
  }
  if (model.classes.empty()) throw Error(kModule, "no classes to model");

  const std::size_t n_classes = model.classes.size();
  const std::size_t n_tasks = n_classes * config.scales.size();
  model.models.resize(n_tasks);
  model.objective_traces.resize(n_tasks);

  std::vector<DataMatrix> positives(n_classes), negatives(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const Label label = model.classes[c];
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] != label) neg.push_back(i);
    neg = cap_negatives(neg, y, config.negative_cap,
                        derive_seed(config.seed, 0x6e6567 + static_cast<std::uint64_t>(label)));
    positives[c] = gather_rows(x, members.at(label));
    negatives[c] = gather_rows(x, neg);
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      try {
        const std::size_t s = t / n_classes;
        const std::size_t c = t % n_classes;
        TrainConfig task = config;
        task.seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(config.scales[s])),
                                static_cast<std::uint64_t>(model.classes[c]));
        auto trained = train_class(positives[c], negatives[c], config.scales[s], task,
                                   model.classes[c]);
        model.objective_traces[t] = trained.objective_after_solve;
        model.models[t] = std::move(trained.model);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(jobs, 1, n_tasks);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return model;
}

Vector mlpl_transform(const MlplModel& model, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim) {
    throw Error(kModule, "transform input dimension " + std::to_string(x.size()) +
                             " does not match model dimension " +
                             std::to_string(model.input_dim));
  }
  Vector out(static_cast<Eigen::Index>(model.embedding_dimension()));
  Eigen::Index pos = 0;
  for (const auto& m : model.models) {
    out.segment(pos, m.weights.cols()) = m.weights.transpose() * x;
    pos += m.weights.cols();
  }
  return out;
}

DataMatrix mlpl_transform(const MlplModel& model, const DataMatrix& rows) {
  if (static_cast<std::size_t>(rows.cols()) != model.input_dim) {
    throw Error(kModule, "transform input dimension " + std::to_string(rows.cols()) +
                             " does not match model dimension " +
                             std::to_string(model.input_dim));
  }
  DataMatrix out(rows.rows(), static_cast<Eigen::Index>(model.embedding_dimension()));
  Eigen::Index pos = 0;
  for (const auto& m : model.models) {
    out.middleCols(pos, m.weights.cols()) = rows * m.weights;
    pos += m.weights.cols();
  }
  return out;
}

FeatureVector mlpl_transform(const MlplModel& model, const FeatureVector& x) {
  FeatureVector out;
  out.values = mlpl_transform(model, x.values);
  out.level = FeatureLevel::kMlcf;
  out.source = x.source;
  std::string scales;
  for (int s : model.scales) scales += std::to_string(s) + ",";
  out.provenance = make_provenance("mlcf", x.provenance + ";scales=" + scales +
                                               "classes=" +
                                               std::to_string(model.classes.size()));
  return out;
}

}  // namespace mlcfl::mlpl
