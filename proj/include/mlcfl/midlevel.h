#ifndef MLCFL_MIDLEVEL_H_
#define MLCFL_MIDLEVEL_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mlcfl/common.h"
#include "mlcfl/dataio.h"
#include "mlcfl/lowlevel.h"

namespace mlcfl::midlevel {

enum class Scope { kPerChannel, kJoint };

std::string_view to_string(Scope scope);
Scope parse_scope(std::string_view name);

// K motion primitives in sub-frame feature space.
struct Codebook {
  DataMatrix centroids;  // K x d
  std::uint64_t seed = 0;
  std::size_t iterations = 0;

  std::size_t size() const { return static_cast<std::size_t>(centroids.rows()); }
  std::size_t dimension() const {
    return static_cast<std::size_t>(centroids.cols());
  }
};

struct KMeansOptions {
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
  // Independent seedings; the run with the lowest final inertia is kept,
  // the earliest on ties. The first run uses `seed` itself.
  std::size_t restarts = 1;
};

struct KMeansResult {
  Codebook codebook;
  std::vector<std::size_t> assignment;
  // Inertia after each assignment step, starting from the seeded centroids.
  std::vector<double> inertia_trace;
  bool converged = false;
};

// Lloyd's algorithm from k-means++ seeding. An empty cluster is re-seeded at
// the sample farthest from its own centroid. Throws if K exceeds the number
// of samples or of distinct samples.
KMeansResult kmeans_fit(const DataMatrix& samples, std::size_t k,
                        const KMeansOptions& options = {});

// argmin_j ||v - m_j||^2, lowest index on ties.
std::size_t assign(const Codebook& codebook, const Eigen::Ref<const Vector>& v);

// ---------------------------------------------------------------------------
// Bag-of-words encoding.

struct SubframeParams {
  std::size_t window = 20;
  double overlap = 0.5;
};

// Sub-frame descriptor: the pipeline's low-level family evaluated on a
// sub-frame. ecdf-pca uses the raw quantile vector (no projection).
struct SubframeFeature {
  lowlevel::Family family = lowlevel::Family::kFft;
  std::size_t fft_coeffs = 10;
  std::size_t ecdf_points = 60;
};

Vector subframe_descriptor(const Matrix& samples, const SubframeFeature& feature);

struct BowEncoder {
  SubframeParams sub;
  SubframeFeature feature;
  Scope scope = Scope::kPerChannel;
  // One entry per channel (per-channel scope) or a single entry (joint).
  std::vector<lowlevel::NormalizerParams> normalizers;
  std::vector<Codebook> codebooks;

  std::size_t histogram_dimension() const;
};

struct BowFitOptions {
  SubframeParams sub;
  SubframeFeature feature;
  Scope scope = Scope::kPerChannel;
  std::size_t dict_k = 300;
  KMeansOptions kmeans;
};

// Normalizes sub-frame descriptors and learns the codebook(s) from frames.
BowEncoder fit_bow_encoder(std::span<const dataio::Frame> frames,
                           const BowFitOptions& options);

struct BowHistogram {
  std::vector<std::int64_t> counts;  // blocks of K per channel, concatenated
  std::size_t k = 0;
  std::size_t blocks = 0;
  FrameSource source;

  std::int64_t block_sum(std::size_t b) const;
};

BowHistogram bow_encode(const BowEncoder& encoder, const dataio::Frame& frame);

// Histogram as reals, optionally L1-normalized per block.
Vector histogram_values(const BowHistogram& h, bool l1_normalize = false);

// Low-level values followed by the histogram. Throws if the two come from
// different frames or the histogram is all zero.
FeatureVector compl_concat(const FeatureVector& low, const BowHistogram& mid,
                           bool l1_normalize = false);

}  // namespace mlcfl::midlevel

#endif  // MLCFL_MIDLEVEL_H_
