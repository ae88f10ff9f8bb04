#ifndef MLCFL_DATAIO_H_
#define MLCFL_DATAIO_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mlcfl/common.h"

namespace mlcfl::dataio {

// A labeled multi-channel recording of one subject.
struct SensorStream {
  std::vector<std::vector<double>> channels;
  double sample_rate = 1.0;
  std::vector<Label> labels;
  std::string subject_id;
  // Parallel to samples. Empty for streams built in memory.
  std::vector<double> timestamps;
  // Ground-truth motif index per sample; only set by synth_streams.
  std::vector<int> pattern_ids;

  std::size_t length() const {
    return channels.empty() ? 0 : channels.front().size();
  }
  std::size_t channel_count() const { return channels.size(); }

  // Throws if the equal-length / non-empty invariants are broken.
  void validate() const;
};

// ---------------------------------------------------------------------------
// CSV ingestion

// A column is addressed by header name, or by zero-based position when the
// file has no header.
struct ColumnRef {
  std::string name;
  int index = -1;

  static ColumnRef named(std::string n) { return {std::move(n), -1}; }
  static ColumnRef at(int i) { return {"", i}; }
};

struct CsvSchema {
  char delimiter = ',';
  bool has_header = true;
  ColumnRef subject = ColumnRef::named("subject");
  ColumnRef timestamp = ColumnRef::named("timestamp");
  std::vector<ColumnRef> channels = {ColumnRef::named("x"),
                                     ColumnRef::named("y"),
                                     ColumnRef::named("z")};
  ColumnRef label = ColumnRef::named("label");
  // Label string mapped to class 0. Empty: no reserved null label.
  std::string null_label = "null";
  double sample_rate = 1.0;
  // Characters trimmed from both ends of every field (WISDM rows end in ';').
  std::string trim_chars = " \t\r;";
};

struct LoadResult {
  std::vector<SensorStream> streams;
  // label_names[i] is the string for class index i.
  std::vector<std::string> label_names;
};

// One stream per subject, in order of first appearance. Class indices are
// dense: null_label (if set) is 0, the remaining labels follow in
// lexicographic order.
LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema);
LoadResult parse_csv(std::istream& in, const CsvSchema& schema,
                     const std::string& source_name = "<stream>");

// Writes subject,timestamp,<channel>...,label with a header row. Values use
// 17 significant digits so load_csv reproduces them exactly.
void write_csv(std::ostream& out, std::span<const SensorStream> streams,
               std::span<const std::string> label_names,
               std::span<const std::string> channel_names = {});

// ---------------------------------------------------------------------------
// Framing

enum class LabelPolicy {
  kSingle,    // drop frames containing more than one label
  kDominant,  // majority label wins; ties drop the frame
};

struct Frame {
  Matrix samples;  // channels x window
  Label label = 0;
  FrameSource source;
  // Majority ground-truth pattern when every sample shares one; -1 if the
  // stream carries no pattern ids or the frame mixes patterns.
  int pattern_id = -1;

  std::size_t channel_count() const {
    return static_cast<std::size_t>(samples.rows());
  }
  std::size_t window() const { return static_cast<std::size_t>(samples.cols()); }
};

struct SubFrame {
  Matrix samples;  // channels x sub_window
  std::size_t offset = 0;
};

struct FramingParams {
  std::size_t window = 64;
  double overlap = 0.5;
  LabelPolicy policy = LabelPolicy::kSingle;
};

// round(window * (1 - overlap)); throws unless window >= 2,
// 0 <= overlap < 1 and the stride is at least 1.
std::size_t window_stride(std::size_t window, double overlap);

std::vector<Frame> frame_stream(const SensorStream& stream,
                                const FramingParams& params);
std::vector<Frame> frame_streams(std::span<const SensorStream> streams,
                                 const FramingParams& params);

std::vector<SubFrame> subframes(const Frame& frame, std::size_t sub_window,
                                double sub_overlap);

// ---------------------------------------------------------------------------
// Cross-validation splits

enum class SplitMode { kRandomKFold, kTemporalBlocks, kSubjectGroups };

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);
std::string_view to_string(LabelPolicy policy);
LabelPolicy parse_label_policy(std::string_view name);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct SplitPlan {
  std::vector<Fold> folds;
  SplitMode mode = SplitMode::kRandomKFold;
};

struct SplitParams {
  SplitMode mode = SplitMode::kRandomKFold;
  std::size_t k = 4;
  std::uint64_t seed = 0;
  // Random k-fold only: deal each class's frames round-robin across folds.
  bool stratified = false;
};

// Temporal blocks: frames are taken in list order, which frame_streams
// produces as (stream, offset) order.
SplitPlan make_splits(std::span<const Frame> frames, const SplitParams& params);

// ---------------------------------------------------------------------------
// Synthetic generator

// One sinusoidal component: frequency in cycles per sample.
struct Tone {
  double frequency = 0.0;
  double amplitude = 1.0;
};

// A motif assigns tones to each channel. It is one latent pattern of a class.
struct Motif {
  std::vector<std::vector<Tone>> channels;
};

struct SynthSpec {
  std::size_t n_classes = 3;
  // Patterns for class c: patterns_per_class[c], or the last entry if the
  // list is shorter than n_classes.
  std::vector<std::size_t> patterns_per_class = {1};
  std::size_t segments_per_pattern = 4;
  std::size_t samples_per_segment = 256;
  double noise = 0.0;
  std::size_t channels = 3;
  std::size_t n_subjects = 1;
  double sample_rate = 50.0;
  // Optional explicit motifs indexed [class][pattern]; generated when empty.
  std::vector<std::vector<Motif>> motifs;
};

struct SynthResult {
  std::vector<SensorStream> streams;
  std::vector<std::vector<Motif>> motifs;
  std::vector<std::string> label_names;
};

// Each stream concatenates segments; a segment plays one (class, pattern)
// motif with a random phase per tone, plus Gaussian noise. Segment order is
// shuffled per subject. Deterministic given the seed.
SynthResult synth_streams(const SynthSpec& spec, std::uint64_t seed);

// Motif family used when SynthSpec::motifs is empty.
std::vector<std::vector<Motif>> default_motifs(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Frame export: versioned little-endian binary container.

inline constexpr std::uint32_t kFrameFormatVersion = 1;

std::string encode_frames(std::span<const Frame> frames);
std::vector<Frame> decode_frames(std::string_view bytes);

}  // namespace mlcfl::dataio

#endif  // MLCFL_DATAIO_H_
