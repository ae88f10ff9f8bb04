#include "mlcfl/lowlevel.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <unsupported/Eigen/FFT>

namespace mlcfl::lowlevel {
namespace {

constexpr const char* kModule = "lowlevel";

std::span<const double> row_span(const Matrix& m, Eigen::Index r,
                                 std::vector<double>& scratch) {
  scratch.resize(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i)
    scratch[static_cast<std::size_t>(i)] = m(r, i);
  return scratch;
}

FeatureVector wrap(Vector values, const dataio::Frame& frame,
                   std::string_view extractor, const std::string& params) {
  FeatureVector fv;
  fv.values = std::move(values);
  fv.level = FeatureLevel::kLow;
  fv.provenance = make_provenance(extractor, params);
  fv.source = frame.source;
  return fv;
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::kStat:
      return "stat";
    case Family::kFft:
      return "fft";
    case Family::kEcdfPca:
      return "ecdf-pca";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "stat") return Family::kStat;
  if (name == "fft") return Family::kFft;
  if (name == "ecdf-pca") return Family::kEcdfPca;
  throw Error("config", "unknown low-level family '" + std::string(name) +
                            "' (expected stat|fft|ecdf-pca)");
}

namespace detail {

std::vector<double> dft_magnitudes(std::span<const double> signal) {
  std::vector<double> in(signal.begin(), signal.end());
  std::vector<std::complex<double>> out;
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  fft.fwd(out, in);
  // Rebuild the full spectrum from the half spectrum by conjugate symmetry.
  const std::size_t n = signal.size();
  std::vector<double> mags(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = k < out.size() ? k : n - k;
    mags[k] = std::abs(out[src]);
  }
  return mags;
}

}  // namespace detail

double spectral_entropy(std::span<const double> signal) {
  const auto mags = detail::dft_magnitudes(signal);
  const std::size_t half = signal.size() / 2;
  double total = 0.0;
  for (std::size_t k = 1; k <= half; ++k) total += mags[k];
  // Relative floor: the magnitudes of a constant signal are rounding noise.
  double scale = 0.0;
  for (double v : signal) scale = std::max(scale, std::abs(v));
  if (total <= 1e-12 * std::max(1.0, scale) * static_cast<double>(signal.size()))
    return 0.0;
  double h = 0.0;
  for (std::size_t k = 1; k <= half; ++k) {
    const double p = mags[k] / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

std::size_t stat_dimension(std::size_t channels) {
  return 4 * channels + channels * (channels - 1) / 2;
}

Vector stat_features(const Matrix& samples) {
  const Eigen::Index c = samples.rows();
  const Eigen::Index n = samples.cols();
  if (c < 1 || n < 2) {
    throw Error(kModule, "statistical features need at least 2 samples per channel");
  }
  Vector out(static_cast<Eigen::Index>(stat_dimension(static_cast<std::size_t>(c))));
  Vector means(c), stds(c);
  std::vector<double> scratch;
  const double dn = static_cast<double>(n);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    const auto row = samples.row(ch);
    const double mean = row.sum() / dn;
    const double var = (row.array() - mean).square().sum() / dn;
    const double energy = row.array().square().sum() / dn;
    means[ch] = mean;
    stds[ch] = std::sqrt(var);
    out[4 * ch + 0] = mean;
    out[4 * ch + 1] = stds[ch];
    out[4 * ch + 2] = energy;
    out[4 * ch + 3] = spectral_entropy(row_span(samples, ch, scratch));
  }
  Eigen::Index pos = 4 * c;
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      // Pearson correlation; defined as 0 when either channel is constant.
      double r = 0.0;
      const double denom = stds[i] * stds[j];
      const auto varies = [&](Eigen::Index ch) {
        return stds[ch] > 1e-12 * std::max(1.0, std::abs(means[ch]));
      };
      if (varies(i) && varies(j)) {
        const double cov = ((samples.row(i).array() - means[i]) *
                            (samples.row(j).array() - means[j]))
                               .sum() /
                           dn;
        r = std::clamp(cov / denom, -1.0, 1.0);
      }
      out[pos++] = r;
    }
  }
  return out;
}

FeatureVector stat_features(const dataio::Frame& frame) {
  return wrap(stat_features(frame.samples), frame, "stat", "");
}

Vector fft_features(const Matrix& samples, std::size_t n_coeffs) {
  const auto n = static_cast<std::size_t>(samples.cols());
  if (n_coeffs < 1 || n_coeffs > n / 2) {
    throw Error(kModule, "fft coefficient count " + std::to_string(n_coeffs) +
                             " must lie in [1, " + std::to_string(n / 2) + "]");
  }
  Vector out(samples.rows() * static_cast<Eigen::Index>(n_coeffs));
  std::vector<double> scratch;
  for (Eigen::Index ch = 0; ch < samples.rows(); ++ch) {
    const auto mags = detail::dft_magnitudes(row_span(samples, ch, scratch));
    for (std::size_t k = 1; k <= n_coeffs; ++k)
      out[ch * static_cast<Eigen::Index>(n_coeffs) + static_cast<Eigen::Index>(k - 1)] =
          mags[k] / static_cast<double>(n);
  }
  return out;
}

FeatureVector fft_features(const dataio::Frame& frame, std::size_t n_coeffs) {
  return wrap(fft_features(frame.samples, n_coeffs), frame, "fft",
              "n=" + std::to_string(n_coeffs));
}

Vector ecdf_features(const Matrix& samples, std::size_t n_points) {
  if (n_points < 2) throw Error(kModule, "ecdf needs at least 2 points");
  const auto n = static_cast<std::size_t>(samples.cols());
  if (n < 1) throw Error(kModule, "ecdf of an empty frame");
  Vector out(samples.rows() * static_cast<Eigen::Index>(n_points));
  std::vector<double> sorted(n);
  for (Eigen::Index ch = 0; ch < samples.rows(); ++ch) {
    for (std::size_t i = 0; i < n; ++i)
      sorted[i] = samples(ch, static_cast<Eigen::Index>(i));
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n_points; ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n_points);
      const double h = p * static_cast<double>(n - 1);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, n - 1);
      const double frac = h - static_cast<double>(lo);
      out[ch * static_cast<Eigen::Index>(n_points) + static_cast<Eigen::Index>(i)] =
          sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    }
  }
  return out;
}

FeatureVector ecdf_feature(const dataio::Frame& frame, std::size_t n_points) {
  return wrap(ecdf_features(frame.samples, n_points), frame, "ecdf",
              "points=" + std::to_string(n_points));
}

// ---------------------------------------------------------------------------

PcaParams pca_fit(const DataMatrix& vectors, std::size_t n_components) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  const auto d = static_cast<std::size_t>(vectors.cols());
  if (n_components < 1 || n_components > d) {
    throw Error(kModule, "pca component count " + std::to_string(n_components) +
                             " must lie in [1, " + std::to_string(d) + "]");
  }
  if (n < n_components + 1) {
    throw Error(kModule, "pca needs at least " + std::to_string(n_components + 1) +
                             " training vectors, got " + std::to_string(n));
  }
  if (!vectors.allFinite()) throw Error(kModule, "pca input is not finite");

  PcaParams params;
  params.n_components = n_components;
  params.center = vectors.colwise().mean().transpose();
  const Matrix centered = vectors.rowwise() - params.center.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(kModule, "eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  const Vector& values = eig.eigenvalues();
  const double largest = std::max(values[values.size() - 1], 0.0);
  const double tol = std::max(1e-12, 1e-10 * largest);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] > tol) ++rank;
  if (rank < n_components) {
    throw Error(kModule, "rank deficient training data: requested " +
                             std::to_string(n_components) +
                             " components but achievable rank is " +
                             std::to_string(rank));
  }

  params.basis.resize(static_cast<Eigen::Index>(d),
                      static_cast<Eigen::Index>(n_components));
  params.eigenvalues.resize(static_cast<Eigen::Index>(n_components));
  for (std::size_t j = 0; j < n_components; ++j) {
    const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - j);
    Vector col = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0.0) col = -col;
    params.basis.col(static_cast<Eigen::Index>(j)) = col;
    params.eigenvalues[static_cast<Eigen::Index>(j)] = values[src];
  }
  return params;
}

Vector pca_transform(const PcaParams& params, const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != params.input_dimension()) {
    throw Error(kModule, "pca input dimension " + std::to_string(v.size()) +
                             " does not match fitted dimension " +
                             std::to_string(params.input_dimension()));
  }
  return params.basis.transpose() * (v - params.center);
}

DataMatrix pca_transform(const PcaParams& params, const DataMatrix& rows) {
  if (static_cast<std::size_t>(rows.cols()) != params.input_dimension()) {
    throw Error(kModule, "pca input dimension " + std::to_string(rows.cols()) +
                             " does not match fitted dimension " +
                             std::to_string(params.input_dimension()));
  }
  return (rows.rowwise() - params.center.transpose()) * params.basis;
}

FeatureVector pca_transform(const PcaParams& params, const FeatureVector& v) {
  FeatureVector out = v;
  out.values = pca_transform(params, v.values);
  out.provenance = make_provenance(
      "ecdf-pca", v.provenance + ";components=" + std::to_string(params.n_components));
  return out;
}

// ---------------------------------------------------------------------------

NormalizerParams zscore_fit(const DataMatrix& vectors) {
  if (vectors.rows() < 1) throw Error(kModule, "z-score fit on an empty set");
  NormalizerParams params;
  const double n = static_cast<double>(vectors.rows());
  params.mean = vectors.colwise().mean().transpose();
  params.stddev = ((vectors.rowwise() - params.mean.transpose()).array().square().colwise().sum() / n)
                      .sqrt()
                      .transpose()
                      .matrix();
  params.stddev = params.stddev.cwiseMax(kStdFloor);
  return params;
}

Vector zscore_apply(const NormalizerParams& params, const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != params.dimension()) {
    throw Error(kModule, "z-score input dimension mismatch");
  }
  return ((v - params.mean).array() / params.stddev.array()).matrix();
}

DataMatrix zscore_apply(const NormalizerParams& params, const DataMatrix& rows) {
  if (static_cast<std::size_t>(rows.cols()) != params.dimension()) {
    throw Error(kModule, "z-score input dimension mismatch");
  }
  DataMatrix out = rows.rowwise() - params.mean.transpose();
  out.array().rowwise() /= params.stddev.transpose().array();
  return out;
}

FeatureVector zscore_apply(const NormalizerParams& params, const FeatureVector& v) {
  FeatureVector out = v;
  out.values = zscore_apply(params, v.values);
  return out;
}

DataMatrix stack_rows(std::span<const Vector> rows) {
  if (rows.empty()) return DataMatrix(0, 0);
  const Eigen::Index d = rows.front().size();
  DataMatrix m(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw Error(kModule, "ragged feature rows");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

}  // namespace mlcfl::lowlevel
