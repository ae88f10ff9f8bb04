#ifndef MLCFL_LOWLEVEL_H_
#define MLCFL_LOWLEVEL_H_

#include <span>
#include <string_view>
#include <vector>

#include "mlcfl/common.h"
#include "mlcfl/dataio.h"

namespace mlcfl::lowlevel {

enum class Family { kStat, kFft, kEcdfPca };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

// ---------------------------------------------------------------------------
// Extractors. Each takes a channels x samples matrix; the Frame overloads
// attach level/provenance/source.

// Per channel: mean, population std, energy (mean square), spectral entropy
// (base 2, over the non-DC half spectrum). Then the Pearson correlation of
// every channel pair (i < j) in lexicographic order. 4c + c(c-1)/2 values.
Vector stat_features(const Matrix& samples);
FeatureVector stat_features(const dataio::Frame& frame);
std::size_t stat_dimension(std::size_t channels);

// Shannon entropy (bits) of |X_k| / sum |X_k| over bins 1..floor(n/2).
// Zero when the signal has no non-DC content.
double spectral_entropy(std::span<const double> signal);

// Per channel |X_k| / n for k = 1..n_coeffs.
Vector fft_features(const Matrix& samples, std::size_t n_coeffs);
FeatureVector fft_features(const dataio::Frame& frame, std::size_t n_coeffs);

// Per channel, the empirical quantile function at p_i = (i + 0.5) / n_points,
// interpolating linearly between order statistics at position p * (n - 1).
Vector ecdf_features(const Matrix& samples, std::size_t n_points);
FeatureVector ecdf_feature(const dataio::Frame& frame, std::size_t n_points);

namespace detail {
// Unnormalized DFT magnitudes |X_k| for k = 0..n-1; exposed for the
// Parseval property test.
std::vector<double> dft_magnitudes(std::span<const double> signal);
}  // namespace detail

// ---------------------------------------------------------------------------
// PCA for the ECDF feature.

struct PcaParams {
  std::size_t n_points = 60;
  std::size_t n_components = 30;
  Matrix basis;        // d x n_components, orthonormal columns
  Vector center;       // d
  Vector eigenvalues;  // n_components, descending

  std::size_t input_dimension() const {
    return static_cast<std::size_t>(center.size());
  }
};

// Top eigenvectors of the sample covariance (n - 1 denominator). Each
// component is signed so that its largest-magnitude entry is positive.
// Throws if there are <= n_components rows or the data rank is too low.
PcaParams pca_fit(const DataMatrix& vectors, std::size_t n_components);
Vector pca_transform(const PcaParams& params, const Vector& v);
DataMatrix pca_transform(const PcaParams& params, const DataMatrix& rows);
FeatureVector pca_transform(const PcaParams& params, const FeatureVector& v);

// ---------------------------------------------------------------------------
// Z-score normalization.

inline constexpr double kStdFloor = 1e-8;

struct NormalizerParams {
  Vector mean;
  Vector stddev;  // population std, floored at kStdFloor

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
};

NormalizerParams zscore_fit(const DataMatrix& vectors);
Vector zscore_apply(const NormalizerParams& params, const Vector& v);
DataMatrix zscore_apply(const NormalizerParams& params, const DataMatrix& rows);
FeatureVector zscore_apply(const NormalizerParams& params, const FeatureVector& v);

// Stack equal-length vectors into rows.
DataMatrix stack_rows(std::span<const Vector> rows);

}  // namespace mlcfl::lowlevel

#endif  // MLCFL_LOWLEVEL_H_
