#pragma once

// Traffic traces: timestamped packet records that drive the HDLC framer.
// Traces come either from classic pcap captures (see pcap.hpp) or from
// seeded statistical class profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "rfseq/error.hpp"
#include "rfseq/io.hpp"

namespace rfseq {

inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;
inline constexpr std::size_t kDefaultMtu = 1500;

inline std::int64_t seconds_to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }
inline double ns_to_seconds(std::int64_t ns) { return static_cast<double>(ns) / 1e9; }

struct PacketRecord {
  std::int64_t timestamp_ns = 0;  // since trace start
  io::Bytes payload;

  double seconds() const { return ns_to_seconds(timestamp_ns); }
  bool operator==(const PacketRecord&) const = default;
};

struct TrafficTrace {
  std::vector<PacketRecord> records;
  std::string class_label;
  std::int64_t duration_ns = 0;

  double duration() const { return ns_to_seconds(duration_ns); }

  /// Checks ordering, the [0, duration] window, non-empty payloads and the MTU.
  void validate(std::size_t mtu = kDefaultMtu) const {
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      require(r.timestamp_ns >= prev, Errc::InvalidArgument, "timestamps decrease at record " + std::to_string(i));
      require(r.timestamp_ns >= 0 && r.timestamp_ns <= duration_ns, Errc::InvalidArgument,
              "record " + std::to_string(i) + " outside [0, duration]");
      require(!r.payload.empty(), Errc::InvalidArgument, "empty payload at record " + std::to_string(i));
      require(r.payload.size() <= mtu, Errc::InvalidArgument,
              "payload of " + std::to_string(r.payload.size()) + " bytes exceeds MTU");
      prev = r.timestamp_ns;
    }
  }
};

// ---------------------------------------------------------------------------
// Class profiles

struct FixedSize {
  std::size_t bytes = 64;
};
struct UniformSize {
  std::size_t min_bytes = 64;
  std::size_t max_bytes = 1500;
};
struct BimodalSize {
  std::size_t small_bytes = 64;
  std::size_t large_bytes = 1500;
  double p_large = 0.5;
};
using PacketSizeDistribution = std::variant<FixedSize, UniformSize, BimodalSize>;

struct PeriodicArrivals {
  double interval_s = 1.0;
};
struct ExponentialArrivals {
  double mean_s = 1.0;
};
/// Alternating bursts and silences with exponentially distributed lengths;
/// inside a burst packets arrive as a Poisson process.
struct OnOffArrivals {
  double burst_s = 0.1;
  double idle_s = 0.9;
  double interval_s = 0.01;
};
using InterArrivalDistribution = std::variant<PeriodicArrivals, ExponentialArrivals, OnOffArrivals>;

struct ClassProfile {
  std::string name;
  PacketSizeDistribution sizes = FixedSize{};
  InterArrivalDistribution arrivals = PeriodicArrivals{};
  double duty_cycle = 1.0;           // probability each scheduled arrival is emitted
  double background_fraction = 0.0;  // share of packets drawn from a DNS-like background source
  std::size_t mtu = kDefaultMtu;

  void validate() const {
    require(duty_cycle >= 0.0 && duty_cycle <= 1.0, Errc::InvalidArgument, name + ": duty_cycle outside [0,1]");
    require(background_fraction >= 0.0 && background_fraction < 1.0, Errc::InvalidArgument,
            name + ": background_fraction outside [0,1)");
    auto positive = [&](double v, const char* what) {
      require(v > 0.0 && std::isfinite(v), Errc::InvalidArgument, name + ": " + what + " must be > 0");
    };
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, PeriodicArrivals>) {
            positive(d.interval_s, "interval_s");
            if (duty_cycle == 0.0) fail(Errc::DegenerateProfile, name + ": periodic profile with duty_cycle 0");
          } else if constexpr (std::is_same_v<T, ExponentialArrivals>) {
            positive(d.mean_s, "mean_s");
          } else {
            positive(d.burst_s, "burst_s");
            positive(d.idle_s, "idle_s");
            positive(d.interval_s, "interval_s");
          }
        },
        arrivals);
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          auto check = [&](std::size_t b) {
            require(b >= 1 && b <= mtu, Errc::InvalidArgument, name + ": packet size outside [1, mtu]");
          };
          if constexpr (std::is_same_v<T, FixedSize>) {
            check(d.bytes);
          } else if constexpr (std::is_same_v<T, UniformSize>) {
            check(d.min_bytes);
            check(d.max_bytes);
            require(d.min_bytes <= d.max_bytes, Errc::InvalidArgument, name + ": min_bytes > max_bytes");
          } else {
            check(d.small_bytes);
            check(d.large_bytes);
            require(d.p_large > 0.0 && d.p_large < 1.0, Errc::InvalidArgument, name + ": p_large outside (0,1)");
          }
        },
        sizes);
  }

  /// Long-run packets per second of the foreground source (after thinning).
  double foreground_rate() const {
    const double base = std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, PeriodicArrivals>) return 1.0 / d.interval_s;
          else if constexpr (std::is_same_v<T, ExponentialArrivals>) return 1.0 / d.mean_s;
          else return d.burst_s / (d.burst_s + d.idle_s) / d.interval_s;
        },
        arrivals);
    return base * duty_cycle;
  }

  /// Analytic mean packet rate including the background mix.
  double mean_rate() const { return foreground_rate() / (1.0 - background_fraction); }
};

namespace detail {

inline std::size_t draw_size(const PacketSizeDistribution& dist, std::mt19937_64& rng) {
  return std::visit(
      [&](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedSize>) {
          return d.bytes;
        } else if constexpr (std::is_same_v<T, UniformSize>) {
          return std::uniform_int_distribution<std::size_t>(d.min_bytes, d.max_bytes)(rng);
        } else {
          return std::bernoulli_distribution(d.p_large)(rng) ? d.large_bytes : d.small_bytes;
        }
      },
      dist);
}

inline io::Bytes random_payload(std::size_t n, std::mt19937_64& rng) {
  io::Bytes out(n);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& b : out) b = static_cast<std::uint8_t>(byte(rng));
  return out;
}

// Arrival instants in [0, end_s), before thinning.
inline std::vector<double> arrival_times(const InterArrivalDistribution& dist, double end_s, std::mt19937_64& rng) {
  std::vector<double> t;
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, PeriodicArrivals>) {
          for (std::int64_t k = 0;; ++k) {
            const double at = static_cast<double>(k) * d.interval_s;
            if (at >= end_s) break;
            t.push_back(at);
          }
        } else if constexpr (std::is_same_v<T, ExponentialArrivals>) {
          std::exponential_distribution<double> gap(1.0 / d.mean_s);
          for (double at = gap(rng); at < end_s; at += gap(rng)) t.push_back(at);
        } else {
          std::exponential_distribution<double> burst(1.0 / d.burst_s), idle(1.0 / d.idle_s),
              gap(1.0 / d.interval_s);
          double cycle = 0.0;
          while (cycle < end_s) {
            const double burst_end = cycle + burst(rng);
            for (double at = cycle + gap(rng); at < burst_end && at < end_s; at += gap(rng)) t.push_back(at);
            cycle = burst_end + idle(rng);
          }
        }
      },
      dist);
  return t;
}

inline std::int64_t quantize_us(double seconds) {
  return static_cast<std::int64_t>(std::floor(seconds * 1e6)) * 1000;
}

}  // namespace detail

/// Synthesizes a trace of `duration_s` seconds. Packets only arrive before
/// `duration_s - quiet_tail_s`, which leaves the framer room to drain its
/// queue. Timestamps have microsecond resolution.
inline TrafficTrace synth_trace(const ClassProfile& profile, double duration_s, std::uint64_t seed,
                                double quiet_tail_s = 0.0) {
  profile.validate();
  require(duration_s > 0.0 && std::isfinite(duration_s), Errc::InvalidArgument, "duration must be > 0");
  require(quiet_tail_s >= 0.0 && quiet_tail_s < duration_s, Errc::InvalidArgument, "quiet tail must be in [0, duration)");
  const double end_s = duration_s - quiet_tail_s;

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(profile.duty_cycle);

  TrafficTrace trace;
  trace.class_label = profile.name;
  trace.duration_ns = seconds_to_ns(duration_s);

  for (double at : detail::arrival_times(profile.arrivals, end_s, rng)) {
    if (profile.duty_cycle < 1.0 && !keep(rng)) continue;
    const std::size_t n = detail::draw_size(profile.sizes, rng);
    trace.records.push_back({detail::quantize_us(at), detail::random_payload(n, rng)});
  }

  if (profile.background_fraction > 0.0 && profile.foreground_rate() > 0.0) {
    // DNS-sized lookups with their own stream so the foreground is unchanged.
    std::mt19937_64 bg_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const double bg_rate = profile.foreground_rate() * profile.background_fraction / (1.0 - profile.background_fraction);
    const UniformSize bg_sizes{60, std::min<std::size_t>(160, profile.mtu)};
    std::vector<PacketRecord> bg;
    for (double at : detail::arrival_times(ExponentialArrivals{1.0 / bg_rate}, end_s, bg_rng)) {
      const std::size_t n = detail::draw_size(PacketSizeDistribution{bg_sizes}, bg_rng);
      bg.push_back({detail::quantize_us(at), detail::random_payload(n, bg_rng)});
    }
    std::vector<PacketRecord> merged;
    merged.reserve(trace.records.size() + bg.size());
    std::merge(std::make_move_iterator(trace.records.begin()), std::make_move_iterator(trace.records.end()),
               std::make_move_iterator(bg.begin()), std::make_move_iterator(bg.end()), std::back_inserter(merged),
               [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp_ns < b.timestamp_ns; });
    trace.records = std::move(merged);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Built-in catalog

/// Four archetypes sized for a 1 Mb/s link and ~1 ms analysis windows. They
/// differ only in timing and size statistics (idle share of roughly 100%,
/// 60%, 35% and 3%); payload bytes are random for every class.
inline std::vector<ClassProfile> desk_profiles(double background_fraction = 0.05) {
  std::vector<ClassProfile> p;
  // Sparse small echo requests: the link is almost always idle.
  p.push_back({"ping_like", FixedSize{64}, PeriodicArrivals{0.020}, 1.0, background_fraction});
  // Steady stream of short media frames with idle gaps between them.
  p.push_back({"streaming_like", UniformSize{48, 72}, PeriodicArrivals{0.0010}, 1.0, background_fraction});
  // Back-to-back MTU-sized segments saturating the link.
  p.push_back({"download_like", FixedSize{1500}, PeriodicArrivals{0.0126}, 1.0, background_fraction});
  // Tiny keystroke/chat messages every half millisecond, mostly idle.
  p.push_back({"chat_like", UniformSize{8, 24}, PeriodicArrivals{0.0005}, 1.0, background_fraction});
  return p;
}

/// Profiles named after the eleven applications of the original capture set.
/// Parameters are plausible stand-ins, not measurements.
inline std::vector<ClassProfile> application_profiles(double background_fraction = 0.05) {
  std::vector<ClassProfile> p;
  p.push_back({"video_abc", BimodalSize{200, 1500, 0.8}, OnOffArrivals{0.4, 0.6, 0.016}, 1.0, background_fraction});
  p.push_back({"video_youtube", FixedSize{1500}, OnOffArrivals{1.0, 1.5, 0.0135}, 1.0, background_fraction});
  p.push_back({"music_spotify", UniformSize{400, 1500}, OnOffArrivals{0.25, 2.0, 0.012}, 1.0, background_fraction});
  p.push_back({"apt_get", FixedSize{1500}, ExponentialArrivals{0.016}, 1.0, background_fraction});
  p.push_back({"ping", FixedSize{98}, PeriodicArrivals{1.0}, 1.0, background_fraction});
  p.push_back({"git", BimodalSize{90, 1500, 0.6}, OnOffArrivals{0.3, 1.2, 0.02}, 1.0, background_fraction});
  p.push_back({"irc", UniformSize{60, 300}, ExponentialArrivals{0.5}, 1.0, background_fraction});
  p.push_back({"bittorrent", BimodalSize{80, 1500, 0.5}, ExponentialArrivals{0.012}, 1.0, background_fraction});
  p.push_back({"web", BimodalSize{120, 1500, 0.4}, OnOffArrivals{0.2, 0.8, 0.015}, 1.0, background_fraction});
  p.push_back({"ftp", FixedSize{1500}, PeriodicArrivals{0.015}, 0.9, background_fraction});
  p.push_back({"http_download", FixedSize{1500}, ExponentialArrivals{0.0145}, 1.0, background_fraction});
  return p;
}

inline std::vector<ClassProfile> profile_catalog(double background_fraction = 0.05) {
  auto all = desk_profiles(background_fraction);
  auto apps = application_profiles(background_fraction);
  all.insert(all.end(), apps.begin(), apps.end());
  return all;
}

inline ClassProfile find_profile(const std::string& name, double background_fraction = 0.05) {
  for (auto& p : profile_catalog(background_fraction))
    if (p.name == name) return p;
  fail(Errc::InvalidArgument, "unknown class profile '" + name + "'");
}

}  // namespace rfseq
