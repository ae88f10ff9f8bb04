#include "mlcfl/dataio.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mlcfl/binary_io.h"
#include "mlcfl/rng.h"

namespace mlcfl::dataio {
namespace {

constexpr const char* kModule = "dataio";

std::string_view trim(std::string_view s, std::string_view chars) {
  const auto first = s.find_first_not_of(chars);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(chars);
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delimiter,
                                    std::string_view trim_chars) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start), trim_chars));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start), trim_chars));
    start = pos + 1;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto result = std::from_chars(s.data(), end, out);
  return result.ec == std::errc() && result.ptr == end && std::isfinite(out);
}

int resolve_column(const ColumnRef& ref, const std::vector<std::string>& header,
                   const std::string& role) {
  if (ref.index >= 0) return ref.index;
  if (header.empty()) {
    throw Error(kModule, "schema error: column '" + ref.name + "' (" + role +
                             ") given by name but the file has no header");
  }
  const auto it = std::find(header.begin(), header.end(), ref.name);
  if (it == header.end()) {
    throw Error(kModule,
                "schema error: missing column '" + ref.name + "' (" + role + ")");
  }
  return static_cast<int>(it - header.begin());
}

struct PendingStream {
  std::string subject;
  std::vector<std::vector<double>> channels;
  std::vector<double> timestamps;
  std::vector<std::string> label_strings;
};

}  // namespace

void SensorStream::validate() const {
  if (channels.empty()) throw Error(kModule, "stream has no channels");
  const std::size_t n = channels.front().size();
  if (n == 0) throw Error(kModule, "stream '" + subject_id + "' is empty");
  for (const auto& c : channels) {
    if (c.size() != n) {
      throw Error(kModule, "stream '" + subject_id +
                               "' has channels of different lengths");
    }
  }
  if (labels.size() != n) {
    throw Error(kModule, "stream '" + subject_id +
                             "' label count does not match sample count");
  }
  if (!timestamps.empty() && timestamps.size() != n) {
    throw Error(kModule, "stream '" + subject_id +
                             "' timestamp count does not match sample count");
  }
  if (!pattern_ids.empty() && pattern_ids.size() != n) {
    throw Error(kModule, "stream '" + subject_id +
                             "' pattern id count does not match sample count");
  }
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(kModule, "cannot open data file '" + path.string() + "'");
  return parse_csv(in, schema, path.string());
}

LoadResult parse_csv(std::istream& in, const CsvSchema& schema,
                     const std::string& source_name) {
  if (schema.channels.empty()) {
    throw Error(kModule, "schema error: at least one channel column required");
  }
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  if (schema.has_header) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line, schema.trim_chars).empty()) break;
    }
    for (auto f : split(line, schema.delimiter, schema.trim_chars))
      header.emplace_back(f);
    if (header.empty() || (header.size() == 1 && header[0].empty())) {
      throw Error(kModule, "schema error: '" + source_name + "' has no header");
    }
  }

  const int subject_col = resolve_column(schema.subject, header, "subject");
  const int time_col = resolve_column(schema.timestamp, header, "timestamp");
  const int label_col = resolve_column(schema.label, header, "label");
  std::vector<int> channel_cols;
  for (std::size_t c = 0; c < schema.channels.size(); ++c) {
    channel_cols.push_back(resolve_column(schema.channels[c], header,
                                          "channel " + std::to_string(c)));
  }
  int max_col = std::max({subject_col, time_col, label_col});
  for (int c : channel_cols) max_col = std::max(max_col, c);

  std::vector<PendingStream> pending;
  std::unordered_map<std::string, std::size_t> by_subject;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line, schema.trim_chars).empty()) continue;
    const auto fields = split(line, schema.delimiter, schema.trim_chars);
    const auto where = source_name + ":" + std::to_string(line_no);
    if (static_cast<int>(fields.size()) <= max_col) {
      throw Error(kModule, "malformed row at line " + std::to_string(line_no) +
                               " (" + where + "): expected at least " +
                               std::to_string(max_col + 1) + " fields, got " +
                               std::to_string(fields.size()));
    }
    const std::string subject(fields[static_cast<std::size_t>(subject_col)]);
    double ts = 0.0;
    if (!parse_double(fields[static_cast<std::size_t>(time_col)], ts)) {
      throw Error(kModule, "malformed row at line " + std::to_string(line_no) +
                               ": bad timestamp '" +
                               std::string(fields[static_cast<std::size_t>(time_col)]) +
                               "'");
    }
    auto [it, inserted] = by_subject.try_emplace(subject, pending.size());
    if (inserted) {
      pending.push_back({subject, std::vector<std::vector<double>>(channel_cols.size()), {}, {}});
    }
    PendingStream& ps = pending[it->second];
    for (std::size_t c = 0; c < channel_cols.size(); ++c) {
      double v = 0.0;
      const auto field = fields[static_cast<std::size_t>(channel_cols[c])];
      if (!parse_double(field, v)) {
        throw Error(kModule, "malformed row at line " + std::to_string(line_no) +
                                 ": bad value '" + std::string(field) +
                                 "' for channel " + std::to_string(c));
      }
      ps.channels[c].push_back(v);
    }
    if (!ps.timestamps.empty() && ts < ps.timestamps.back()) {
      throw Error(kModule, "non-monotonic timestamps for subject '" + subject +
                               "' at line " + std::to_string(line_no));
    }
    ps.timestamps.push_back(ts);
    ps.label_strings.emplace_back(fields[static_cast<std::size_t>(label_col)]);
  }

  std::set<std::string> others;
  for (const auto& ps : pending)
    for (const auto& l : ps.label_strings)
      if (schema.null_label.empty() || l != schema.null_label) others.insert(l);

  LoadResult result;
  if (!schema.null_label.empty()) result.label_names.push_back(schema.null_label);
  result.label_names.insert(result.label_names.end(), others.begin(), others.end());
  std::unordered_map<std::string, Label> index;
  for (std::size_t i = 0; i < result.label_names.size(); ++i)
    index.emplace(result.label_names[i], static_cast<Label>(i));

  for (auto& ps : pending) {
    SensorStream s;
    s.subject_id = ps.subject;
    s.sample_rate = schema.sample_rate;
    s.channels = std::move(ps.channels);
    s.timestamps = std::move(ps.timestamps);
    s.labels.reserve(ps.label_strings.size());
    for (const auto& l : ps.label_strings) s.labels.push_back(index.at(l));
    s.validate();
    result.streams.push_back(std::move(s));
  }
  return result;
}

void write_csv(std::ostream& out, std::span<const SensorStream> streams,
               std::span<const std::string> label_names,
               std::span<const std::string> channel_names) {
  const std::size_t n_channels = streams.empty() ? 3 : streams.front().channel_count();
  std::vector<std::string> names(channel_names.begin(), channel_names.end());
  if (names.empty()) {
    static const char* kDefault[] = {"x", "y", "z"};
    for (std::size_t c = 0; c < n_channels; ++c)
      names.push_back(c < 3 ? kDefault[c] : "ch" + std::to_string(c));
  }
  out << "subject,timestamp";
  for (const auto& n : names) out << ',' << n;
  out << ",label\n";
  char buf[64];
  for (const auto& s : streams) {
    s.validate();
    for (std::size_t i = 0; i < s.length(); ++i) {
      const double ts = s.timestamps.empty()
                            ? static_cast<double>(i) / s.sample_rate
                            : s.timestamps[i];
      out << s.subject_id;
      std::snprintf(buf, sizeof(buf), ",%.17g", ts);
      out << buf;
      for (std::size_t c = 0; c < s.channel_count(); ++c) {
        std::snprintf(buf, sizeof(buf), ",%.17g", s.channels[c][i]);
        out << buf;
      }
      const auto l = static_cast<std::size_t>(s.labels[i]);
      out << ',' << (l < label_names.size() ? label_names[l] : std::to_string(l))
          << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

std::size_t window_stride(std::size_t window, double overlap) {
  if (window < 2) throw Error(kModule, "window must be at least 2 samples");
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(kModule, "overlap must lie in [0, 1)");
  }
  const double s = std::round(static_cast<double>(window) * (1.0 - overlap));
  if (s < 1.0) throw Error(kModule, "window stride rounds to zero");
  return static_cast<std::size_t>(s);
}

std::vector<Frame> frame_stream(const SensorStream& stream,
                                const FramingParams& params) {
  stream.validate();
  const std::size_t stride = window_stride(params.window, params.overlap);
  const std::size_t length = stream.length();
  std::vector<Frame> frames;
  if (length < params.window) return frames;
  const std::size_t n_channels = stream.channel_count();
  std::map<Label, std::size_t> votes;
  for (std::size_t start = 0; start + params.window <= length; start += stride) {
    votes.clear();
    for (std::size_t i = start; i < start + params.window; ++i)
      ++votes[stream.labels[i]];
    Label label = votes.begin()->first;
    if (params.policy == LabelPolicy::kSingle) {
      if (votes.size() != 1) continue;
    } else {
      std::size_t best = 0;
      bool tie = false;
      for (const auto& [l, n] : votes) {
        if (n > best) {
          best = n;
          label = l;
          tie = false;
        } else if (n == best) {
          tie = true;
        }
      }
      if (tie) continue;
    }

    Frame f;
    f.samples.resize(static_cast<Eigen::Index>(n_channels),
                     static_cast<Eigen::Index>(params.window));
    for (std::size_t c = 0; c < n_channels; ++c)
      for (std::size_t i = 0; i < params.window; ++i)
        f.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) =
            stream.channels[c][start + i];
    f.label = label;
    f.source = {stream.subject_id, start};
    if (!stream.pattern_ids.empty()) {
      const int p = stream.pattern_ids[start];
      const bool pure = std::all_of(
          stream.pattern_ids.begin() + static_cast<std::ptrdiff_t>(start),
          stream.pattern_ids.begin() + static_cast<std::ptrdiff_t>(start + params.window),
          [p](int q) { return q == p; });
      f.pattern_id = pure ? p : -1;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<Frame> frame_streams(std::span<const SensorStream> streams,
                                 const FramingParams& params) {
  std::vector<Frame> all;
  for (const auto& s : streams) {
    auto frames = frame_stream(s, params);
    std::move(frames.begin(), frames.end(), std::back_inserter(all));
  }
  return all;
}

std::vector<SubFrame> subframes(const Frame& frame, std::size_t sub_window,
                                double sub_overlap) {
  const std::size_t stride = window_stride(sub_window, sub_overlap);
  const std::size_t window = frame.window();
  if (sub_window > window) {
    throw Error(kModule, "sub-frame window " + std::to_string(sub_window) +
                             " exceeds frame window " + std::to_string(window));
  }
  std::vector<SubFrame> out;
  for (std::size_t start = 0; start + sub_window <= window; start += stride) {
    out.push_back({frame.samples.middleCols(static_cast<Eigen::Index>(start),
                                            static_cast<Eigen::Index>(sub_window)),
                   start});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::kRandomKFold:
      return "random-kfold";
    case SplitMode::kTemporalBlocks:
      return "temporal-blocks";
    case SplitMode::kSubjectGroups:
      return "subject-groups";
  }
  return "unknown";
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "random-kfold") return SplitMode::kRandomKFold;
  if (name == "temporal-blocks") return SplitMode::kTemporalBlocks;
  if (name == "subject-groups") return SplitMode::kSubjectGroups;
  throw Error("config", "unknown split mode '" + std::string(name) + "'");
}

std::string_view to_string(LabelPolicy policy) {
  return policy == LabelPolicy::kSingle ? "single" : "dominant";
}

LabelPolicy parse_label_policy(std::string_view name) {
  if (name == "single") return LabelPolicy::kSingle;
  if (name == "dominant") return LabelPolicy::kDominant;
  throw Error("config", "unknown label policy '" + std::string(name) + "'");
}

namespace {

// Contiguous block b of [0, n) under a k-way even partition.
std::pair<std::size_t, std::size_t> block(std::size_t n, std::size_t k,
                                          std::size_t b) {
  return {b * n / k, (b + 1) * n / k};
}

SplitPlan plan_from_assignment(const std::vector<std::size_t>& fold_of,
                               std::size_t k, SplitMode mode) {
  SplitPlan plan;
  plan.mode = mode;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? plan.folds[f].test : plan.folds[f].train).push_back(i);
    }
  }
  return plan;
}

}  // namespace

SplitPlan make_splits(std::span<const Frame> frames, const SplitParams& params) {
  const std::size_t k = params.k;
  if (k < 2) throw Error(kModule, "fold count must be at least 2");
  if (frames.size() < k) {
    throw Error(kModule, "fewer frames (" + std::to_string(frames.size()) +
                             ") than folds (" + std::to_string(k) + ")");
  }
  const std::size_t n = frames.size();
  std::vector<std::size_t> fold_of(n, 0);
  Rng rng(params.seed);

  switch (params.mode) {
    case SplitMode::kRandomKFold: {
      if (params.stratified) {
        std::map<Label, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < n; ++i) by_class[frames[i].label].push_back(i);
        std::size_t next = 0;
        for (auto& [label, idx] : by_class) {
          rng.shuffle(std::span(idx));
          for (std::size_t i : idx) fold_of[i] = next++ % k;
        }
      } else {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(std::span(order));
        for (std::size_t f = 0; f < k; ++f) {
          const auto [lo, hi] = block(n, k, f);
          for (std::size_t p = lo; p < hi; ++p) fold_of[order[p]] = f;
        }
      }
      break;
    }
    case SplitMode::kTemporalBlocks: {
      std::map<Label, std::vector<std::size_t>> by_class;
      for (std::size_t i = 0; i < n; ++i) by_class[frames[i].label].push_back(i);
      for (const auto& [label, idx] : by_class) {
        for (std::size_t f = 0; f < k; ++f) {
          const auto [lo, hi] = block(idx.size(), k, f);
          for (std::size_t p = lo; p < hi; ++p) fold_of[idx[p]] = f;
        }
      }
      break;
    }
    case SplitMode::kSubjectGroups: {
      std::set<std::string> subject_set;
      for (const auto& f : frames) subject_set.insert(f.source.subject_id);
      std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
      if (subjects.size() < k) {
        throw Error(kModule, "subject-groups split needs at least " +
                                 std::to_string(k) + " distinct subjects, found " +
                                 std::to_string(subjects.size()));
      }
      rng.shuffle(std::span(subjects));
      std::unordered_map<std::string, std::size_t> group;
      for (std::size_t f = 0; f < k; ++f) {
        const auto [lo, hi] = block(subjects.size(), k, f);
        for (std::size_t p = lo; p < hi; ++p) group[subjects[p]] = f;
      }
      for (std::size_t i = 0; i < n; ++i)
        fold_of[i] = group.at(frames[i].source.subject_id);
      break;
    }
  }
  return plan_from_assignment(fold_of, k, params.mode);
}

// ---------------------------------------------------------------------------

std::vector<std::vector<Motif>> default_motifs(const SynthSpec& spec) {
  // Each (class, pattern) gets a distinct global index g. Channel 0 carries a
  // g-specific frequency, the other channels g-specific amplitude and
  // frequency offsets, so every motif family is distinguishable.
  std::vector<std::vector<Motif>> motifs(spec.n_classes);
  std::size_t g = 0;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const std::size_t n_patterns =
        spec.patterns_per_class.empty()
            ? 1
            : spec.patterns_per_class[std::min(c, spec.patterns_per_class.size() - 1)];
    for (std::size_t p = 0; p < n_patterns; ++p, ++g) {
      Motif m;
      m.channels.resize(spec.channels);
      for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        const double gd = static_cast<double>(g);
        const double cd = static_cast<double>(ch);
        if (ch == 0) {
          m.channels[ch].push_back({0.025 + 0.03 * std::fmod(gd, 14.0), 1.0});
        } else {
          const double freq =
              0.02 + 0.035 * std::fmod(gd * 3.0 + cd * 2.0, 12.0);
          const double amp = 0.4 + 0.35 * std::fmod(gd + cd, 4.0);
          m.channels[ch].push_back({freq, amp});
        }
      }
      motifs[c].push_back(std::move(m));
    }
  }
  return motifs;
}

SynthResult synth_streams(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_classes == 0 || spec.channels == 0 || spec.n_subjects == 0 ||
      spec.samples_per_segment == 0) {
    throw Error(kModule, "synth spec needs classes, channels, subjects and segment length");
  }
  SynthResult result;
  result.motifs = spec.motifs.empty() ? default_motifs(spec) : spec.motifs;
  if (result.motifs.size() != spec.n_classes) {
    throw Error(kModule, "explicit motif table does not match class count");
  }
  for (const auto& cls : result.motifs) {
    if (cls.empty()) throw Error(kModule, "every class needs at least one motif");
    for (const auto& m : cls)
      if (m.channels.size() != spec.channels)
        throw Error(kModule, "motif channel count does not match spec");
  }
  for (std::size_t c = 0; c < spec.n_classes; ++c)
    result.label_names.push_back("class" + std::to_string(c));

  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    Rng rng(derive_seed(seed, s));
    std::vector<std::pair<std::size_t, std::size_t>> segments;
    for (std::size_t c = 0; c < spec.n_classes; ++c)
      for (std::size_t p = 0; p < result.motifs[c].size(); ++p)
        for (std::size_t r = 0; r < spec.segments_per_pattern; ++r)
          segments.emplace_back(c, p);
    rng.shuffle(std::span(segments));

    SensorStream stream;
    stream.subject_id = "s" + std::to_string(s);
    stream.sample_rate = spec.sample_rate;
    stream.channels.resize(spec.channels);
    for (const auto& [c, p] : segments) {
      const Motif& motif = result.motifs[c][p];
      std::vector<std::vector<double>> phases(spec.channels);
      for (std::size_t ch = 0; ch < spec.channels; ++ch)
        for (std::size_t t = 0; t < motif.channels[ch].size(); ++t)
          phases[ch].push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
      for (std::size_t i = 0; i < spec.samples_per_segment; ++i) {
        const double t = static_cast<double>(i);
        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
          double v = 0.0;
          for (std::size_t k = 0; k < motif.channels[ch].size(); ++k) {
            const Tone& tone = motif.channels[ch][k];
            v += tone.amplitude *
                 std::sin(2.0 * std::numbers::pi * tone.frequency * t + phases[ch][k]);
          }
          if (spec.noise > 0.0) v += spec.noise * rng.normal();
          stream.channels[ch].push_back(v);
        }
        stream.labels.push_back(static_cast<Label>(c));
        stream.pattern_ids.push_back(static_cast<int>(p));
      }
    }
    const std::size_t n = stream.labels.size();
    stream.timestamps.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      stream.timestamps[i] = static_cast<double>(i) / spec.sample_rate;
    result.streams.push_back(std::move(stream));
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kFrameMagic = "MLCFLFRM";
}

std::string encode_frames(std::span<const Frame> frames) {
  ByteWriter w;
  w.raw(kFrameMagic);
  w.u32(kFrameFormatVersion);
  w.u64(frames.size());
  for (const auto& f : frames) {
    w.i64(f.label);
    w.i64(f.pattern_id);
    w.str(f.source.subject_id);
    w.u64(f.source.offset);
    w.matrix(f.samples);
  }
  return w.bytes();
}

std::vector<Frame> decode_frames(std::string_view bytes) {
  ByteReader r(bytes, kModule);
  if (r.raw(kFrameMagic.size()) != kFrameMagic) {
    throw Error(kModule, "not a frame container (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kFrameFormatVersion) {
    throw Error(kModule, "unsupported frame container version " +
                             std::to_string(version));
  }
  const std::size_t n = r.count();
  std::vector<Frame> frames(n);
  for (auto& f : frames) {
    f.label = static_cast<Label>(r.i64());
    f.pattern_id = static_cast<int>(r.i64());
    f.source.subject_id = r.str();
    f.source.offset = r.u64();
    f.samples = r.matrix<Matrix>();
  }
  if (!r.at_end()) throw Error(kModule, "trailing bytes in frame container");
  return frames;
}

}  // namespace mlcfl::dataio
