#include "mlcfl/midlevel.h"

#include <algorithm>
#include <limits>
#include <string>

#include "mlcfl/rng.h"

namespace mlcfl::midlevel {
namespace {

constexpr const char* kModule = "midlevel";

double squared_distance(const DataMatrix& a, Eigen::Index i, const DataMatrix& b,
                        Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Returns inertia; fills assignment and per-sample distance.
double assign_all(const DataMatrix& samples, const DataMatrix& centroids,
                  std::vector<std::size_t>& assignment, std::vector<double>& dist) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index k = centroids.rows();
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double d = squared_distance(samples, i, centroids, j);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    assignment[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
    dist[static_cast<std::size_t>(i)] = best;
    inertia += best;
  }
  return inertia;
}

DataMatrix seed_plus_plus(const DataMatrix& samples, std::size_t k, Rng& rng) {
  const Eigen::Index n = samples.rows();
  DataMatrix centroids(static_cast<Eigen::Index>(k), samples.cols());
  const auto first = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
  centroids.row(0) = samples.row(first);
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    d2[static_cast<std::size_t>(i)] = squared_distance(samples, i, centroids, 0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) {
      throw Error(kModule, "K=" + std::to_string(k) +
                               " exceeds the number of distinct samples (" +
                               std::to_string(c) + ")");
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2[static_cast<std::size_t>(i)];
      if (d2[static_cast<std::size_t>(i)] > 0.0) {
        pick = i;
        if (acc > target) break;
      }
    }
    const auto row = static_cast<Eigen::Index>(c);
    centroids.row(row) = samples.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = squared_distance(samples, i, centroids, row);
      if (d < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = d;
    }
  }
  return centroids;
}

}  // namespace

std::string_view to_string(Scope scope) {
  return scope == Scope::kPerChannel ? "per-channel" : "joint";
}

Scope parse_scope(std::string_view name) {
  if (name == "per-channel") return Scope::kPerChannel;
  if (name == "joint") return Scope::kJoint;
  throw Error("config", "unknown codebook scope '" + std::string(name) + "'");
}

namespace {

KMeansResult kmeans_run(const DataMatrix& samples, std::size_t k,
                        const KMeansOptions& options, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(samples.rows());
  Rng rng(seed);
  KMeansResult result;
  DataMatrix centroids = seed_plus_plus(samples, k, rng);
  std::vector<std::size_t> assignment(n);
  std::vector<double> dist(n);
  result.inertia_trace.push_back(assign_all(samples, centroids, assignment, dist));

  std::vector<std::size_t> counts(k);
  std::size_t iter = 0;
  for (; iter < options.max_iter; ++iter) {
    // Update step: running means in sample order, exact for identical samples.
    centroids.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<Eigen::Index>(assignment[i]);
      const double count = static_cast<double>(++counts[assignment[i]]);
      centroids.row(j) += (samples.row(static_cast<Eigen::Index>(i)) - centroids.row(j)) / count;
    }
    std::vector<std::size_t> reseeded;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      // Empty cluster: move to the sample farthest from its centroid,
      // skipping samples already used for another re-seed.
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] <= far_d) continue;
        bool used = false;
        for (std::size_t r : reseeded)
          used = used || samples.row(static_cast<Eigen::Index>(i)) ==
                             samples.row(static_cast<Eigen::Index>(r));
        if (!used) {
          far = i;
          far_d = dist[i];
        }
      }
      centroids.row(static_cast<Eigen::Index>(j)) =
          samples.row(static_cast<Eigen::Index>(far));
      dist[far] = 0.0;
      reseeded.push_back(far);
    }

    const std::vector<std::size_t> previous = assignment;
    result.inertia_trace.push_back(assign_all(samples, centroids, assignment, dist));
    if (assignment == previous && reseeded.empty()) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  result.codebook.centroids = std::move(centroids);
  result.codebook.seed = options.seed;
  result.codebook.iterations = iter;
  result.assignment = std::move(assignment);
  return result;
}

}  // namespace

KMeansResult kmeans_fit(const DataMatrix& samples, std::size_t k,
                        const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(samples.rows());
  if (k < 1) throw Error(kModule, "K must be at least 1");
  if (k > n) {
    throw Error(kModule, "K=" + std::to_string(k) + " exceeds sample count " +
                             std::to_string(n));
  }
  if (!samples.allFinite()) throw Error(kModule, "k-means input is not finite");
  if (options.restarts < 1) throw Error(kModule, "k-means needs at least one restart");

  KMeansResult best = kmeans_run(samples, k, options, options.seed);
  for (std::size_t r = 1; r < options.restarts; ++r) {
    KMeansResult next = kmeans_run(samples, k, options, derive_seed(options.seed, r));
    if (next.inertia_trace.back() < best.inertia_trace.back()) best = std::move(next);
  }
  return best;
}

std::size_t assign(const Codebook& codebook, const Eigen::Ref<const Vector>& v) {
  if (static_cast<std::size_t>(v.size()) != codebook.dimension()) {
    throw Error(kModule, "assign: vector dimension " + std::to_string(v.size()) +
                             " does not match codebook dimension " +
                             std::to_string(codebook.dimension()));
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (Eigen::Index j = 0; j < codebook.centroids.rows(); ++j) {
    const double d = (codebook.centroids.row(j).transpose() - v).squaredNorm();
    if (d < best) {
      best = d;
      arg = static_cast<std::size_t>(j);
    }
  }
  return arg;
}

// ---------------------------------------------------------------------------

Vector subframe_descriptor(const Matrix& samples, const SubframeFeature& feature) {
  switch (feature.family) {
    case lowlevel::Family::kFft:
      return lowlevel::fft_features(
          samples, std::min<std::size_t>(feature.fft_coeffs,
                                         static_cast<std::size_t>(samples.cols()) / 2));
    case lowlevel::Family::kStat:
      return lowlevel::stat_features(samples);
    case lowlevel::Family::kEcdfPca:
      return lowlevel::ecdf_features(samples, feature.ecdf_points);
  }
  throw Error(kModule, "unknown sub-frame feature family");
}

std::size_t BowEncoder::histogram_dimension() const {
  std::size_t d = 0;
  for (const auto& c : codebooks) d += c.size();
  return d;
}

namespace {

// Descriptors for one frame: one per (block, sub-frame).
std::vector<std::vector<Vector>> frame_descriptors(const dataio::Frame& frame,
                                                   const SubframeParams& sub,
                                                   const SubframeFeature& feature,
                                                   Scope scope) {
  const auto subs = dataio::subframes(frame, sub.window, sub.overlap);
  const std::size_t blocks = scope == Scope::kPerChannel ? frame.channel_count() : 1;
  std::vector<std::vector<Vector>> out(blocks);
  for (const auto& sf : subs) {
    if (scope == Scope::kJoint) {
      out[0].push_back(subframe_descriptor(sf.samples, feature));
    } else {
      for (std::size_t c = 0; c < blocks; ++c)
        out[c].push_back(
            subframe_descriptor(sf.samples.row(static_cast<Eigen::Index>(c)), feature));
    }
  }
  return out;
}

}  // namespace

BowEncoder fit_bow_encoder(std::span<const dataio::Frame> frames,
                           const BowFitOptions& options) {
  if (frames.empty()) throw Error(kModule, "codebook training needs frames");
  BowEncoder enc;
  enc.sub = options.sub;
  enc.feature = options.feature;
  enc.scope = options.scope;
  const std::size_t blocks =
      options.scope == Scope::kPerChannel ? frames.front().channel_count() : 1;
  std::vector<std::vector<Vector>> per_block(blocks);
  for (const auto& f : frames) {
    if (f.channel_count() != frames.front().channel_count()) {
      throw Error(kModule, "frames disagree on channel count");
    }
    auto d = frame_descriptors(f, options.sub, options.feature, options.scope);
    for (std::size_t b = 0; b < blocks; ++b)
      std::move(d[b].begin(), d[b].end(), std::back_inserter(per_block[b]));
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    DataMatrix raw = lowlevel::stack_rows(per_block[b]);
    enc.normalizers.push_back(lowlevel::zscore_fit(raw));
    const DataMatrix normalized = lowlevel::zscore_apply(enc.normalizers.back(), raw);
    KMeansOptions km = options.kmeans;
    km.seed = derive_seed(options.kmeans.seed, b);
    enc.codebooks.push_back(kmeans_fit(normalized, options.dict_k, km).codebook);
  }
  return enc;
}

std::int64_t BowHistogram::block_sum(std::size_t b) const {
  std::int64_t s = 0;
  for (std::size_t j = 0; j < k; ++j) s += counts[b * k + j];
  return s;
}

BowHistogram bow_encode(const BowEncoder& encoder, const dataio::Frame& frame) {
  const std::size_t blocks =
      encoder.scope == Scope::kPerChannel ? frame.channel_count() : 1;
  if (blocks != encoder.codebooks.size()) {
    throw Error(kModule, "frame has " + std::to_string(frame.channel_count()) +
                             " channels but the encoder has " +
                             std::to_string(encoder.codebooks.size()) + " codebooks");
  }
  BowHistogram h;
  h.k = encoder.codebooks.front().size();
  h.blocks = blocks;
  h.source = frame.source;
  h.counts.assign(h.k * blocks, 0);
  const auto desc = frame_descriptors(frame, encoder.sub, encoder.feature, encoder.scope);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (const auto& v : desc[b]) {
      const Vector z = lowlevel::zscore_apply(encoder.normalizers[b], v);
      ++h.counts[b * h.k + assign(encoder.codebooks[b], z)];
    }
  }
  return h;
}

Vector histogram_values(const BowHistogram& h, bool l1_normalize) {
  Vector v(static_cast<Eigen::Index>(h.counts.size()));
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = static_cast<double>(h.counts[i]);
  if (l1_normalize) {
    for (std::size_t b = 0; b < h.blocks; ++b) {
      const double s = static_cast<double>(h.block_sum(b));
      if (s > 0.0)
        v.segment(static_cast<Eigen::Index>(b * h.k), static_cast<Eigen::Index>(h.k)) /= s;
    }
  }
  return v;
}

FeatureVector compl_concat(const FeatureVector& low, const BowHistogram& mid,
                           bool l1_normalize) {
  if (!(low.source == mid.source)) {
    throw Error(kModule, "compl_concat: low-level feature from " +
                             low.source.subject_id + "@" +
                             std::to_string(low.source.offset) +
                             " but histogram from " + mid.source.subject_id + "@" +
                             std::to_string(mid.source.offset));
  }
  if (std::all_of(mid.counts.begin(), mid.counts.end(),
                  [](std::int64_t c) { return c == 0; })) {
    throw Error(kModule, "compl_concat: empty histogram");
  }
  const Vector hist = histogram_values(mid, l1_normalize);
  FeatureVector out;
  out.level = FeatureLevel::kCompl;
  out.source = low.source;
  out.values.resize(low.values.size() + hist.size());
  out.values << low.values, hist;
  out.provenance = make_provenance(
      "compl", low.provenance + ";bow k=" + std::to_string(mid.k) +
                   " blocks=" + std::to_string(mid.blocks));
  return out;
}

}  // namespace mlcfl::midlevel
