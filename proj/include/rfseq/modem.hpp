#pragma once

// QPSK mapping, root-raised-cosine pulse shaping and a loopback receiver.
// IQ files are headerless interleaved float32 little-endian (I, Q) pairs.

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "rfseq/error.hpp"
#include "rfseq/framing.hpp"
#include "rfseq/io.hpp"

namespace rfseq {

using Complex = std::complex<double>;

struct IqSignal {
  std::vector<Complex> samples;
  double sample_rate = 0.0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  bool all_finite() const {
    for (const auto& z : samples)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }
};

inline double mean_power(std::span<const Complex> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& z : x) acc += std::norm(z);
  return acc / static_cast<double>(x.size());
}

struct ModemConfig {
  int samples_per_symbol = 2;
  double rrc_rolloff = 0.35;
  int rrc_span_symbols = 23;

  void validate() const {
    require(samples_per_symbol >= 2, Errc::InvalidArgument, "samples_per_symbol must be >= 2");
    require(rrc_rolloff > 0.0 && rrc_rolloff <= 1.0, Errc::InvalidArgument, "rrc_rolloff must be in (0, 1]");
    require(rrc_span_symbols > 0 && rrc_span_symbols % 2 == 1, Errc::InvalidArgument, "rrc_span_symbols must be odd");
  }

  std::size_t num_taps() const { return static_cast<std::size_t>(rrc_span_symbols * samples_per_symbol + 1); }
  /// Delay of one RRC filter in samples.
  std::size_t filter_delay() const { return static_cast<std::size_t>(rrc_span_symbols * samples_per_symbol / 2); }
};

struct SymbolSequence {
  std::vector<Complex> symbols;
  bool padded = false;  // a trailing 0 bit was appended to make the count even
};

/// Gray map on (b0, b1): b1 selects the sign of I, b0 the sign of Q.
/// 00 -> (+,+), 01 -> (-,+), 11 -> (-,-), 10 -> (+,-), scaled by 1/sqrt(2).
inline Complex qpsk_point(std::uint8_t b0, std::uint8_t b1) {
  constexpr double a = std::numbers::sqrt2 / 2.0;
  return {b1 ? -a : a, b0 ? -a : a};
}

inline SymbolSequence map_qpsk(std::span<const std::uint8_t> bits) {
  SymbolSequence out;
  out.padded = bits.size() % 2 != 0;
  out.symbols.reserve((bits.size() + 1) / 2);
  for (std::size_t i = 0; i + 1 < bits.size(); i += 2) out.symbols.push_back(qpsk_point(bits[i], bits[i + 1]));
  if (out.padded) out.symbols.push_back(qpsk_point(bits.back(), 0));
  return out;
}

/// Root-raised-cosine taps, span*sps + 1 long, normalized to unit energy.
inline std::vector<double> rrc_taps(const ModemConfig& config) {
  config.validate();
  const double beta = config.rrc_rolloff;
  const double sps = config.samples_per_symbol;
  const std::size_t n = config.num_taps();
  const double mid = static_cast<double>(n - 1) / 2.0;
  constexpr double pi = std::numbers::pi;

  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (static_cast<double>(k) - mid) / sps;  // in symbol periods
    const double x = 4.0 * beta * t;
    if (std::abs(t) < 1e-12) {
      h[k] = 1.0 + beta * (4.0 / pi - 1.0);
    } else if (std::abs(1.0 - x * x) < 1e-12) {
      h[k] = beta / std::numbers::sqrt2 *
             ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
    } else {
      h[k] = (std::sin(pi * t * (1.0 - beta)) + x * std::cos(pi * t * (1.0 + beta))) / (pi * t * (1.0 - x * x));
    }
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double scale = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= scale;
  // Enforce exact symmetry against rounding in the mirrored evaluation.
  for (std::size_t k = 0; k < n / 2; ++k) h[n - 1 - k] = h[k];
  return h;
}

/// Zero-insertion upsampling followed by full convolution with the RRC taps,
/// rescaled to unit mean power. Output length is len*sps + span*sps.
inline IqSignal pulse_shape(std::span<const Complex> symbols, const ModemConfig& config, double symbol_rate = 1.0) {
  require(!symbols.empty(), Errc::InvalidArgument, "pulse_shape needs at least one symbol");
  const auto taps = rrc_taps(config);
  const auto sps = static_cast<std::size_t>(config.samples_per_symbol);
  IqSignal out;
  out.sample_rate = symbol_rate * static_cast<double>(sps);
  out.samples.assign(symbols.size() * sps + taps.size() - 1, Complex{});
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    Complex* dst = out.samples.data() + s * sps;
    for (std::size_t k = 0; k < taps.size(); ++k) dst[k] += symbols[s] * taps[k];
  }
  const double scale = 1.0 / std::sqrt(mean_power(out.samples));
  for (auto& z : out.samples) z *= scale;
  return out;
}

/// Matched filter sampled at symbol centers (two filter delays in), quadrant
/// slicer and inverse Gray map. Returns two bits per recovered symbol; the
/// caller drops any padding bit.
inline Bits loopback_demod(std::span<const Complex> signal, const ModemConfig& config) {
  const auto taps = rrc_taps(config);
  const auto sps = static_cast<std::size_t>(config.samples_per_symbol);
  const std::size_t ntaps = taps.size();
  const std::size_t delay = 2 * config.filter_delay();
  if (signal.size() + 1 < ntaps + sps) return {};
  const std::size_t n_symbols = (signal.size() + 1 - ntaps) / sps;
  Bits bits;
  bits.reserve(2 * n_symbols);
  for (std::size_t s = 0; s < n_symbols; ++s) {
    // y[m] = sum_k x[m - k] h[k], evaluated at m = s*sps + delay.
    const std::size_t m = s * sps + delay;
    Complex acc{};
    for (std::size_t k = 0; k < ntaps; ++k) {
      if (k > m) break;
      const std::size_t idx = m - k;
      if (idx < signal.size()) acc += signal[idx] * taps[k];
    }
    bits.push_back(acc.imag() < 0.0 ? 1 : 0);
    bits.push_back(acc.real() < 0.0 ? 1 : 0);
  }
  return bits;
}

/// Modulates a bit stream end-to-end (map + shape).
inline IqSignal modulate(std::span<const std::uint8_t> bits, const ModemConfig& config, std::uint64_t bit_rate) {
  const auto symbols = map_qpsk(bits);
  return pulse_shape(symbols.symbols, config, static_cast<double>(bit_rate) / 2.0);
}

// ---------------------------------------------------------------------------
// IQ files

inline constexpr std::size_t kIqRecordBytes = 8;

inline io::Bytes encode_iq(std::span<const Complex> samples) {
  io::Bytes out;
  out.reserve(samples.size() * kIqRecordBytes);
  for (const auto& z : samples) {
    io::append<float>(out, static_cast<float>(z.real()));
    io::append<float>(out, static_cast<float>(z.imag()));
  }
  return out;
}

inline std::vector<Complex> decode_iq(std::span<const std::uint8_t> bytes) {
  require(bytes.size() % kIqRecordBytes == 0, Errc::CorruptLength,
          "IQ payload of " + std::to_string(bytes.size()) + " bytes is not a multiple of 8");
  std::vector<Complex> out(bytes.size() / kIqRecordBytes);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {io::load<float>(bytes, i * 8), io::load<float>(bytes, i * 8 + 4)};
  return out;
}

inline void write_iq(const std::filesystem::path& path, std::span<const Complex> samples) {
  io::write_file(path, encode_iq(samples));
}

inline std::vector<Complex> read_iq(const std::filesystem::path& path) { return decode_iq(io::read_file(path)); }

/// Rounds every component to float32 so in-memory signals match their file form.
inline void quantize_f32(std::vector<Complex>& samples) {
  // Flat loop: g++ 11 -O3 skips the last element of odd-length vectors when
  // this is written per complex value.
  double* d = reinterpret_cast<double*>(samples.data());
  for (std::size_t i = 0; i < 2 * samples.size(); ++i) d[i] = static_cast<float>(d[i]);
}

}  // namespace rfseq
