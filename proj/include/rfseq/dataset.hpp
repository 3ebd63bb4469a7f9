#pragma once

// Slicing of long IQ recordings into N x C x L example tensors, hard block
// partitioning into train/test, and the on-disk recording set (raw cf32 IQ
// files plus a JSON manifest).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rfseq/error.hpp"
#include "rfseq/json.hpp"
#include "rfseq/modem.hpp"

namespace rfseq {

inline constexpr std::size_t kDefaultBlockLen = 250'000;
inline constexpr int kDatasetSchemaVersion = 1;

enum class Representation { CartesianIq, PolarRTheta, ROnly, ThetaOnly };

inline std::size_t channel_count(Representation r) {
  return r == Representation::CartesianIq || r == Representation::PolarRTheta ? 2 : 1;
}

inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::CartesianIq: return "cartesian_iq";
    case Representation::PolarRTheta: return "polar_r_theta";
    case Representation::ROnly: return "r_only";
    case Representation::ThetaOnly: return "theta_only";
  }
  return "?";
}

inline Representation representation_from_string(const std::string& s) {
  for (auto r : {Representation::CartesianIq, Representation::PolarRTheta, Representation::ROnly, Representation::ThetaOnly})
    if (to_string(r) == s) return r;
  fail(Errc::InvalidArgument, "unknown representation '" + s + "'");
}

struct SliceSpec {
  std::size_t n_steps = 32;
  std::size_t window_len = 128;
  std::size_t stride = 32;
  std::size_t offset_modulo = 1;
  Representation representation = Representation::CartesianIq;

  void validate() const {
    require(n_steps >= 1 && window_len >= 1 && stride >= 1, Errc::InvalidArgument, "N, L and M must all be >= 1");
    require(offset_modulo >= 1, Errc::InvalidArgument, "offset_modulo must be >= 1");
  }
  std::size_t channels() const { return channel_count(representation); }
  /// Real values per time step (C * L).
  std::size_t step_dim() const { return channels() * window_len; }
  /// Complex samples consumed by one example: L + (N - 1) * M.
  std::size_t span() const { return window_len + (n_steps - 1) * stride; }
  /// Span of the N inputs plus the (N+1)-th target window.
  std::size_t generative_span() const { return window_len + n_steps * stride; }
};

/// Real-valued N x C x L tensor stored row-major as [step][channel][sample].
struct ExampleTensor {
  std::vector<float> values;
  std::size_t n_steps = 0;
  std::size_t channels = 0;
  std::size_t window_len = 0;
  std::size_t source_offset = 0;
  int label = -1;              // class index for classification examples
  std::vector<float> target;   // C * L next-window target for generative examples

  float at(std::size_t n, std::size_t c, std::size_t l) const { return values[(n * channels + c) * window_len + l]; }
  std::span<const float> step(std::size_t n) const {
    return std::span(values).subspan(n * channels * window_len, channels * window_len);
  }
  bool operator==(const ExampleTensor&) const = default;
};

inline std::vector<float> one_hot(int k, int num_classes) {
  require(k >= 0 && k < num_classes, Errc::InvalidArgument, "class index outside [0, K)");
  std::vector<float> v(static_cast<std::size_t>(num_classes), 0.0f);
  v[static_cast<std::size_t>(k)] = 1.0f;
  return v;
}

/// Writes the C channels of `window` into `out` ([channel][sample] layout).
/// Polar angle is atan2(Q, I) mapped into (-pi, pi], with 0 at the origin.
inline void to_representation(std::span<const Complex> window, Representation rep, std::span<float> out) {
  const std::size_t len = window.size();
  require(out.size() == channel_count(rep) * len, Errc::ShapeMismatch, "representation output has wrong size");
  auto angle = [](const Complex& z) {
    if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
    const double a = std::atan2(z.imag(), z.real());
    return a <= -std::numbers::pi ? std::numbers::pi : a;
  };
  for (std::size_t i = 0; i < len; ++i) {
    const Complex& z = window[i];
    switch (rep) {
      case Representation::CartesianIq:
        out[i] = static_cast<float>(z.real());
        out[len + i] = static_cast<float>(z.imag());
        break;
      case Representation::PolarRTheta:
        out[i] = static_cast<float>(std::abs(z));
        out[len + i] = static_cast<float>(angle(z));
        break;
      case Representation::ROnly: out[i] = static_cast<float>(std::abs(z)); break;
      case Representation::ThetaOnly: out[i] = static_cast<float>(angle(z)); break;
    }
  }
}

inline std::vector<float> to_representation(std::span<const Complex> window, Representation rep) {
  std::vector<float> out(channel_count(rep) * window.size());
  to_representation(window, rep, out);
  return out;
}

/// Inverse transform back to complex samples (r_only/theta_only lose information
/// and are mapped to r + 0j and exp(j*theta)).
inline std::vector<Complex> from_representation(std::span<const float> channels, std::size_t len, Representation rep) {
  require(channels.size() == channel_count(rep) * len, Errc::ShapeMismatch, "representation input has wrong size");
  std::vector<Complex> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    switch (rep) {
      case Representation::CartesianIq: out[i] = {channels[i], channels[len + i]}; break;
      case Representation::PolarRTheta: out[i] = std::polar<double>(channels[i], channels[len + i]); break;
      case Representation::ROnly: out[i] = {channels[i], 0.0}; break;
      case Representation::ThetaOnly: out[i] = std::polar<double>(1.0, channels[i]); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partitioning

enum class Split : std::uint8_t { Train, Test };

struct PartitionConfig {
  std::size_t block_len = kDefaultBlockLen;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  /// Disables block partitioning: train and test windows are distinct but may
  /// overlap in samples (the "leaky" protocol).
  bool leaky = false;
};

struct PartitionMap {
  std::size_t block_len = kDefaultBlockLen;
  std::vector<Split> blocks;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;

  std::size_t block_of(std::size_t sample) const { return sample / block_len; }
  std::size_t count(Split s) const { return static_cast<std::size_t>(std::count(blocks.begin(), blocks.end(), s)); }
};

/// Splits full blocks with a seeded shuffle of a floor(fraction * blocks) train
/// quota; the trailing partial block is discarded.
inline PartitionMap partition_blocks(std::size_t total_samples, double train_fraction, std::uint64_t seed,
                                     std::size_t block_len = kDefaultBlockLen) {
  require(block_len >= 1, Errc::InvalidArgument, "block_len must be >= 1");
  require(train_fraction >= 0.0 && train_fraction <= 1.0, Errc::InvalidArgument, "train_fraction outside [0,1]");
  require(total_samples >= 2 * block_len, Errc::TooShort,
          std::to_string(total_samples) + " samples is fewer than two blocks of " + std::to_string(block_len));
  const std::size_t n = total_samples / block_len;
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  PartitionMap map{block_len, std::vector<Split>(n, Split::Test), train_fraction, seed};
  std::fill_n(map.blocks.begin(), n_train, Split::Train);
  std::mt19937_64 rng(seed);
  std::shuffle(map.blocks.begin(), map.blocks.end(), rng);
  return map;
}

// ---------------------------------------------------------------------------
// Slicing

/// Window i covers samples [start + i*M, start + i*M + L).
inline ExampleTensor slice_example(std::span<const Complex> signal, std::size_t start, const SliceSpec& spec) {
  spec.validate();
  require(start % spec.offset_modulo == 0, Errc::MisalignedStart,
          "start " + std::to_string(start) + " not a multiple of offset_modulo " + std::to_string(spec.offset_modulo));
  require(start + spec.span() <= signal.size(), Errc::OutOfBounds,
          "example [" + std::to_string(start) + ", " + std::to_string(start + spec.span()) + ") exceeds signal of " +
              std::to_string(signal.size()));
  ExampleTensor t;
  t.n_steps = spec.n_steps;
  t.channels = spec.channels();
  t.window_len = spec.window_len;
  t.source_offset = start;
  t.values.resize(spec.n_steps * spec.step_dim());
  for (std::size_t i = 0; i < spec.n_steps; ++i) {
    to_representation(signal.subspan(start + i * spec.stride, spec.window_len), spec.representation,
                      std::span(t.values).subspan(i * spec.step_dim(), spec.step_dim()));
  }
  return t;
}

/// As above, additionally requiring the example to lie inside one block.
inline ExampleTensor slice_example(std::span<const Complex> signal, std::size_t start, const SliceSpec& spec,
                                   const PartitionMap& partition) {
  const std::size_t first = partition.block_of(start);
  const std::size_t last = partition.block_of(start + spec.span() - 1);
  require(first == last && first < partition.blocks.size(), Errc::OutOfBounds,
          "example at " + std::to_string(start) + " crosses a partition block boundary");
  return slice_example(signal, start, spec);
}

namespace detail {

struct StartRange {
  std::size_t first = 0;
  std::size_t count = 0;
};

// Aligned starts s in [lo, hi - span] with s % modulo == 0.
inline StartRange aligned_starts(std::size_t lo, std::size_t hi, std::size_t span, std::size_t modulo) {
  if (hi < lo + span) return {};
  const std::size_t first = (lo + modulo - 1) / modulo * modulo;
  const std::size_t last = hi - span;
  if (first > last) return {};
  return {first, (last - first) / modulo + 1};
}

// `k` distinct values from [0, n), sorted, via Floyd's algorithm.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::set<std::size_t> chosen;
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

// Draws `count` distinct aligned starts from the given ranges.
inline std::vector<std::size_t> draw_starts(const std::vector<StartRange>& ranges, std::size_t modulo, std::size_t count,
                                            std::mt19937_64& rng, const std::string& what) {
  std::size_t total = 0;
  for (const auto& r : ranges) total += r.count;
  require(count <= total, Errc::InsufficientData,
          what + ": requested " + std::to_string(count) + " examples but only " + std::to_string(total) + " are achievable");
  std::vector<std::size_t> starts;
  starts.reserve(count);
  std::size_t range = 0, base = 0;
  for (std::size_t idx : sample_without_replacement(total, count, rng)) {
    while (idx >= base + ranges[range].count) base += ranges[range++].count;
    starts.push_back(ranges[range].first + (idx - base) * modulo);
  }
  return starts;
}

struct SplitStarts {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline SplitStarts split_starts(std::size_t signal_len, std::size_t span, std::size_t modulo, const PartitionConfig& pc,
                                std::uint64_t partition_seed, std::size_t n_train, std::size_t n_test,
                                std::mt19937_64& rng, const std::string& what) {
  SplitStarts out;
  if (pc.leaky) {
    std::vector<StartRange> all{aligned_starts(0, signal_len, span, modulo)};
    auto starts = draw_starts(all, modulo, n_train + n_test, rng, what);
    std::shuffle(starts.begin(), starts.end(), rng);
    out.train.assign(starts.begin(), starts.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(starts.begin() + static_cast<std::ptrdiff_t>(n_train), starts.end());
  } else {
    const PartitionMap map = partition_blocks(signal_len, pc.train_fraction, partition_seed, pc.block_len);
    std::vector<StartRange> train_r, test_r;
    for (std::size_t b = 0; b < map.blocks.size(); ++b) {
      const auto r = aligned_starts(b * map.block_len, (b + 1) * map.block_len, span, modulo);
      (map.blocks[b] == Split::Train ? train_r : test_r).push_back(r);
    }
    out.train = draw_starts(train_r, modulo, n_train, rng, what + " (train)");
    out.test = draw_starts(test_r, modulo, n_test, rng, what + " (test)");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

struct LabeledSets {
  std::vector<ExampleTensor> train;
  std::vector<ExampleTensor> test;
};

inline std::size_t train_quota(std::size_t examples, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(examples) + 1e-9));
}

/// Balanced labeled train/test sets. Each class signal gets its own block
/// partition (seeded from partition.seed and the class index); `examples_per_class`
/// is split floor(fraction * n) train / remainder test.
inline LabeledSets build_classification_dataset(const std::vector<std::span<const Complex>>& class_signals,
                                                const SliceSpec& spec, const PartitionConfig& partition,
                                                std::size_t examples_per_class, std::uint64_t seed) {
  spec.validate();
  require(!class_signals.empty(), Errc::InvalidArgument, "no class signals");
  const std::size_t n_train = train_quota(examples_per_class, partition.train_fraction);
  const std::size_t n_test = examples_per_class - n_train;
  LabeledSets out;
  for (std::size_t c = 0; c < class_signals.size(); ++c) {
    std::mt19937_64 rng(detail::mix_seed(seed, c));
    const auto starts = detail::split_starts(class_signals[c].size(), spec.span(), spec.offset_modulo, partition,
                                             detail::mix_seed(partition.seed, c), n_train, n_test, rng,
                                             "class " + std::to_string(c));
    for (std::size_t s : starts.train) {
      out.train.push_back(slice_example(class_signals[c], s, spec));
      out.train.back().label = static_cast<int>(c);
    }
    for (std::size_t s : starts.test) {
      out.test.push_back(slice_example(class_signals[c], s, spec));
      out.test.back().label = static_cast<int>(c);
    }
  }
  return out;
}

/// Input tensor of N windows plus the (N+1)-th window (starting at start + N*M)
/// as a flattened C*L target.
inline ExampleTensor slice_generative_example(std::span<const Complex> signal, std::size_t start, const SliceSpec& spec) {
  require(start + spec.generative_span() <= signal.size(), Errc::OutOfBounds,
          "no room for the target window at start " + std::to_string(start));
  ExampleTensor t = slice_example(signal, start, spec);
  t.target = to_representation(signal.subspan(start + spec.n_steps * spec.stride, spec.window_len), spec.representation);
  return t;
}

inline LabeledSets build_generative_dataset(std::span<const Complex> signal, const SliceSpec& spec,
                                            const PartitionConfig& partition, std::size_t count, std::uint64_t seed) {
  spec.validate();
  const std::size_t n_train = train_quota(count, partition.train_fraction);
  std::mt19937_64 rng(seed);
  const auto starts = detail::split_starts(signal.size(), spec.generative_span(), spec.offset_modulo, partition,
                                           partition.seed, n_train, count - n_train, rng, "generative");
  LabeledSets out;
  for (std::size_t s : starts.train) out.train.push_back(slice_generative_example(signal, s, spec));
  for (std::size_t s : starts.test) out.test.push_back(slice_generative_example(signal, s, spec));
  return out;
}

// ---------------------------------------------------------------------------
// JSON for slicing configs

inline void to_json(Json& j, const SliceSpec& s) {
  j = {{"n_steps", s.n_steps},
       {"window_len", s.window_len},
       {"stride", s.stride},
       {"offset_modulo", s.offset_modulo},
       {"representation", to_string(s.representation)}};
}

inline void from_json(const Json& j, SliceSpec& s) {
  read_opt(j, "n_steps", s.n_steps);
  read_opt(j, "window_len", s.window_len);
  read_opt(j, "stride", s.stride);
  read_opt(j, "offset_modulo", s.offset_modulo);
  if (auto it = j.find("representation"); it != j.end()) s.representation = representation_from_string(it->get<std::string>());
}

inline void to_json(Json& j, const PartitionConfig& p) {
  j = {{"block_len", p.block_len}, {"train_fraction", p.train_fraction}, {"seed", p.seed}, {"leaky", p.leaky}};
}

inline void from_json(const Json& j, PartitionConfig& p) {
  read_opt(j, "block_len", p.block_len);
  read_opt(j, "train_fraction", p.train_fraction);
  read_opt(j, "seed", p.seed);
  read_opt(j, "leaky", p.leaky);
}

// ---------------------------------------------------------------------------
// Recording sets on disk

struct Recording {
  std::string class_name;
  IqSignal signal;
  ChannelDraw draw;
};

/// One regime ("clean" or "channel") of a generated dataset. `config` holds
/// the resolved generation config (framer, modem, channel, slice, partition,
/// seed, ...) and is written verbatim into the manifest.
struct RecordingSet {
  std::string variant;
  Json config = Json::object();
  std::vector<Recording> recordings;

  std::vector<std::string> class_names() const {
    std::vector<std::string> names;
    for (const auto& r : recordings) names.push_back(r.class_name);
    return names;
  }
  std::vector<std::span<const Complex>> signals() const {
    std::vector<std::span<const Complex>> s;
    for (const auto& r : recordings) s.emplace_back(r.signal.samples);
    return s;
  }
  const Recording& find(const std::string& name) const {
    for (const auto& r : recordings)
      if (r.class_name == name) return r;
    fail(Errc::InvalidArgument, "class '" + name + "' not in dataset");
  }
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kChannelLogName = "channel_draws.jsonl";

inline Json make_manifest(const RecordingSet& set) {
  Json classes = Json::array();
  for (std::size_t i = 0; i < set.recordings.size(); ++i) {
    const auto& r = set.recordings[i];
    classes.push_back({{"name", r.class_name},
                       {"label", i},
                       {"iq_file", r.class_name + ".cf32"},
                       {"num_samples", r.signal.size()},
                       {"sample_rate", r.signal.sample_rate},
                       {"channel_draw", r.draw}});
  }
  Json m = set.config;
  m["schema_version"] = kDatasetSchemaVersion;
  m["variant"] = set.variant;
  m["iq_format"] = "interleaved float32 little-endian (I, Q), no header";
  m["classes"] = classes;
  return m;
}

inline void write_dataset(const std::filesystem::path& dir, const RecordingSet& set) {
  std::filesystem::create_directories(dir);
  const Json manifest = make_manifest(set);
  std::string log;
  for (const auto& r : set.recordings) {
    write_iq(dir / (r.class_name + ".cf32"), r.signal.samples);
    log += Json(r.draw).dump() + "\n";
  }
  io::write_text(dir / kChannelLogName, log);
  io::write_text(dir / kManifestName, manifest.dump(2) + "\n");
}

/// Required top-level manifest fields; reading fails with SchemaMismatch if
/// any is absent or the schema version differs.
inline const std::vector<std::string>& manifest_required_fields() {
  static const std::vector<std::string> f{"schema_version", "variant", "seed",  "framer",   "modem",
                                          "channel",        "slice",   "partition", "classes"};
  return f;
}

inline void validate_manifest(const Json& m) {
  require(m.is_object(), Errc::SchemaMismatch, "manifest is not a JSON object");
  for (const auto& f : manifest_required_fields())
    require(m.contains(f), Errc::SchemaMismatch, "manifest missing field '" + f + "'");
  require(m.at("schema_version").get<int>() == kDatasetSchemaVersion, Errc::SchemaMismatch,
          "manifest schema_version " + m.at("schema_version").dump() + " != " + std::to_string(kDatasetSchemaVersion));
  for (const auto& c : m.at("classes"))
    for (const char* f : {"name", "iq_file", "num_samples", "channel_draw"})
      require(c.contains(f), Errc::SchemaMismatch, std::string("class entry missing field '") + f + "'");
}

inline RecordingSet read_dataset(const std::filesystem::path& dir) {
  Json m;
  try {
    m = Json::parse(io::read_text(dir / kManifestName));
  } catch (const Json::parse_error& e) {
    fail(Errc::SchemaMismatch, std::string("manifest is not valid JSON: ") + e.what());
  }
  validate_manifest(m);
  RecordingSet set;
  set.variant = m.at("variant").get<std::string>();
  for (const auto& c : m.at("classes")) {
    Recording r;
    r.class_name = c.at("name").get<std::string>();
    r.signal.samples = read_iq(dir / c.at("iq_file").get<std::string>());
    r.signal.sample_rate = c.value("sample_rate", 0.0);
    r.draw = c.at("channel_draw").get<ChannelDraw>();
    require(r.signal.size() == c.at("num_samples").get<std::size_t>(), Errc::CorruptLength,
            r.class_name + ": IQ file holds " + std::to_string(r.signal.size()) + " samples, manifest says " +
                c.at("num_samples").dump());
    set.recordings.push_back(std::move(r));
  }
  Json config = m;
  for (const char* k : {"schema_version", "variant", "iq_format", "classes"}) config.erase(k);
  set.config = std::move(config);
  return set;
}

}  // namespace rfseq
