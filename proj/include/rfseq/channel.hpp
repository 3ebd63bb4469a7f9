#pragma once

// Channel impairments: clock-rate error plus fractional delay, carrier
// frequency offset, and additive white Gaussian noise, applied in that order.

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "rfseq/error.hpp"
#include "rfseq/modem.hpp"

namespace rfseq {

inline constexpr double kCleanSnr = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kInterpTaps = 8;
inline constexpr std::size_t kInterpLead = 3;  // taps left of the interpolation point

struct ChannelConfig {
  double snr_db = 20.0;
  double max_freq_offset = 1e-4;    // cycles/sample, drawn from [-max, max]
  double max_timing_offset = 1e-4;  // resample ratio drawn from 1 + [-max, max]
  double max_frac_delay = 1.0;      // initial delay drawn from [0, max)
  double max_phase = 2.0 * std::numbers::pi;
  std::uint64_t seed = 0;

  /// The "clean" regime: no noise, no offsets.
  static ChannelConfig clean(std::uint64_t seed = 0) {
    return {kCleanSnr, 0.0, 0.0, 0.0, 0.0, seed};
  }

  bool is_clean() const { return std::isinf(snr_db) && snr_db > 0; }

  void validate() const {
    require(!std::isnan(snr_db) && snr_db > -std::numeric_limits<double>::infinity(), Errc::InvalidArgument,
            "snr_db must be finite or +inf");
    require(max_freq_offset >= 0.0 && max_freq_offset < 0.5, Errc::InvalidArgument, "max_freq_offset outside [0, 0.5)");
    require(max_timing_offset >= 0.0 && max_timing_offset <= 1e-2, Errc::InvalidArgument,
            "max_timing_offset outside [0, 1e-2]");
    require(max_frac_delay >= 0.0 && max_frac_delay <= 1.0, Errc::InvalidArgument, "max_frac_delay outside [0, 1]");
    require(max_phase >= 0.0, Errc::InvalidArgument, "max_phase must be >= 0");
  }
};

/// The random parameters actually applied, one per apply_channel call.
struct ChannelDraw {
  std::uint64_t seed = 0;
  double freq_offset = 0.0;
  double phase = 0.0;
  double resample_ratio = 1.0;
  double frac_delay = 0.0;
  double snr_db = kCleanSnr;
};

inline nlohmann::json snr_to_json(double snr_db) {
  if (std::isinf(snr_db)) return "inf";
  return snr_db;
}

inline double snr_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    require(j.get<std::string>() == "inf", Errc::SchemaMismatch, "snr_db string must be \"inf\"");
    return kCleanSnr;
  }
  return j.get<double>();
}

inline void to_json(nlohmann::json& j, const ChannelDraw& d) {
  j = {{"seed", d.seed},       {"freq_offset", d.freq_offset}, {"phase", d.phase},
       {"ratio", d.resample_ratio}, {"delay", d.frac_delay},   {"snr_db", snr_to_json(d.snr_db)}};
}

inline void from_json(const nlohmann::json& j, ChannelDraw& d) {
  d.seed = j.at("seed").get<std::uint64_t>();
  d.freq_offset = j.at("freq_offset").get<double>();
  d.phase = j.at("phase").get<double>();
  d.resample_ratio = j.at("ratio").get<double>();
  d.frac_delay = j.at("delay").get<double>();
  d.snr_db = snr_from_json(j.at("snr_db"));
}

/// Adds complex Gaussian noise with total variance P / 10^(snr/10), where P is
/// the measured signal power; +inf SNR is the identity.
inline IqSignal awgn(const IqSignal& signal, double snr_db, std::uint64_t seed) {
  require(!signal.empty(), Errc::InvalidArgument, "awgn needs a non-empty signal");
  if (std::isinf(snr_db) && snr_db > 0) return signal;
  const double p = mean_power(signal.samples);
  require(p > 0.0, Errc::InvalidArgument, "awgn needs a signal with non-zero power");
  const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0) / 2.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  IqSignal out = signal;
  for (auto& z : out.samples) {
    const double i = n(rng);
    const double q = n(rng);
    z += Complex{i, q};
  }
  return out;
}

/// Multiplies sample k by exp(j(2*pi*offset*k + phase)).
inline IqSignal freq_offset(const IqSignal& signal, double normalized_offset, double initial_phase) {
  require(std::abs(normalized_offset) < 0.5, Errc::InvalidArgument, "|offset| must be < 0.5 cycles/sample");
  IqSignal out = signal;
  if (normalized_offset == 0.0 && initial_phase == 0.0) return out;
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    const double cycles = normalized_offset * static_cast<double>(k);
    const double frac = cycles - std::round(cycles);
    out.samples[k] *= std::polar(1.0, 2.0 * std::numbers::pi * frac + initial_phase);
  }
  return out;
}

/// Windowed-sinc (8-tap, Hann) resampler. Output sample n interpolates the
/// input at position 3 + n*ratio + frac_delay; the leading 3 samples and the
/// tail are trimmed so every output uses a full tap set. Output length is
/// floor((len - 8) / ratio). Weights are normalized to unit DC gain.
inline IqSignal timing_offset(const IqSignal& signal, double resample_ratio, double initial_frac_delay) {
  require(resample_ratio >= 1.0 - 1e-2 && resample_ratio <= 1.0 + 1e-2, Errc::InvalidArgument,
          "resample ratio outside [0.99, 1.01]");
  require(initial_frac_delay >= 0.0 && initial_frac_delay < 1.0, Errc::InvalidArgument, "frac delay outside [0, 1)");
  require(signal.size() >= kInterpTaps + 1, Errc::SignalTooShort,
          "need more than " + std::to_string(kInterpTaps) + " samples to resample");
  const auto out_len = static_cast<std::size_t>(std::floor(static_cast<double>(signal.size() - kInterpTaps) / resample_ratio));
  IqSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(out_len);
  constexpr double pi = std::numbers::pi;
  const double half = static_cast<double>(kInterpTaps) / 2.0;
  for (std::size_t n = 0; n < out_len; ++n) {
    const double pos = static_cast<double>(kInterpLead) + static_cast<double>(n) * resample_ratio + initial_frac_delay;
    const auto base = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(base);
    Complex acc{};
    double wsum = 0.0;
    for (std::size_t k = 0; k < kInterpTaps; ++k) {
      const std::size_t j = base + k - kInterpLead;
      const double x = frac + static_cast<double>(kInterpLead) - static_cast<double>(k);  // pos - j
      const double sinc = std::abs(x) < 1e-15 ? 1.0 : std::sin(pi * x) / (pi * x);
      const double w = sinc * 0.5 * (1.0 + std::cos(pi * x / half));
      acc += signal.samples[j] * w;
      wsum += w;
    }
    out.samples[n] = acc / wsum;
  }
  return out;
}

/// Draws offsets from the config ranges with the config seed.
inline ChannelDraw draw_channel(const ChannelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ChannelDraw d;
  d.seed = config.seed;
  d.freq_offset = (2.0 * unit(rng) - 1.0) * config.max_freq_offset;
  d.phase = unit(rng) * config.max_phase;
  d.resample_ratio = 1.0 + (2.0 * unit(rng) - 1.0) * config.max_timing_offset;
  d.frac_delay = std::min(unit(rng) * config.max_frac_delay, std::nextafter(1.0, 0.0));
  d.snr_db = config.snr_db;
  return d;
}

/// Applies a recorded draw: timing, then frequency, then noise.
inline IqSignal apply_draw(const IqSignal& signal, const ChannelDraw& draw) {
  IqSignal out = timing_offset(signal, draw.resample_ratio, draw.frac_delay);
  out = freq_offset(out, draw.freq_offset, draw.phase);
  // Noise stream is decorrelated from the parameter stream.
  return awgn(out, draw.snr_db, draw.seed ^ 0xa5a5a5a5deadbeefULL);
}

struct ChannelOutput {
  IqSignal signal;
  ChannelDraw draw;
};

inline ChannelOutput apply_channel(const IqSignal& signal, const ChannelConfig& config) {
  ChannelDraw draw = draw_channel(config);
  return {apply_draw(signal, draw), draw};
}

}  // namespace rfseq
