#pragma once

// HDLC-style constant-rate framer: bit-stuffed frames between 0x7E flags,
// idle flags whenever nothing is queued, and a fixed preamble inserted every
// `preamble_period_bits` stream bits. Bits are stored one per byte (0/1).

#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "rfseq/error.hpp"
#include "rfseq/io.hpp"
#include "rfseq/trace.hpp"

namespace rfseq {

using Bits = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kFlagByte = 0x7E;
inline constexpr std::array<std::uint8_t, 8> kFlagBits{0, 1, 1, 1, 1, 1, 1, 0};
inline constexpr std::uint16_t kFcsGoodResidue = 0x0F47;

/// 32 alternating bits followed by the 13-chip Barker sequence.
inline Bits default_preamble() {
  Bits p;
  for (int i = 0; i < 32; ++i) p.push_back(static_cast<std::uint8_t>((i + 1) % 2));
  for (std::uint8_t b : {1, 1, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1}) p.push_back(b);
  return p;
}

struct FramerConfig {
  std::uint64_t bit_rate = 1'000'000;
  std::size_t preamble_period_bits = 1744;
  Bits preamble_pattern = default_preamble();
  bool fcs_enabled = true;

  void validate() const {
    require(bit_rate > 0, Errc::InvalidArgument, "bit_rate must be > 0");
    require(preamble_period_bits > preamble_pattern.size(), Errc::InvalidArgument,
            "preamble_period_bits must exceed the preamble length");
  }
};

struct BitStream {
  Bits bits;
  std::uint64_t bit_rate = 0;
  std::size_t body_bits = 0;      // ceil(duration * bit_rate)
  std::size_t preamble_bits = 0;  // total inserted preamble bits
};

/// CRC-16/X.25: reflected polynomial 0x1021, init 0xFFFF, final XOR 0xFFFF.
inline std::uint16_t crc16_ccitt(std::span<const std::uint8_t> data) {
  static const auto table = [] {
    std::array<std::uint16_t, 256> t{};
    for (unsigned i = 0; i < 256; ++i) {
      std::uint16_t c = static_cast<std::uint16_t>(i);
      for (int k = 0; k < 8; ++k) c = (c & 1) ? static_cast<std::uint16_t>((c >> 1) ^ 0x8408) : static_cast<std::uint16_t>(c >> 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : data) crc = static_cast<std::uint16_t>((crc >> 8) ^ table[(crc ^ b) & 0xFF]);
  return static_cast<std::uint16_t>(crc ^ 0xFFFF);
}

/// LSB-first serialization of bytes.
inline Bits bytes_to_bits_lsb(std::span<const std::uint8_t> bytes) {
  Bits out;
  out.reserve(bytes.size() * 8);
  for (std::uint8_t b : bytes)
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>((b >> k) & 1));
  return out;
}

/// Inverse of bytes_to_bits_lsb; bits.size() must be a multiple of 8.
inline io::Bytes bits_to_bytes_lsb(std::span<const std::uint8_t> bits) {
  require(bits.size() % 8 == 0, Errc::InvalidArgument, "bit count not a multiple of 8");
  io::Bytes out(bits.size() / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) out[i / 8] |= static_cast<std::uint8_t>(bits[i] << (i % 8));
  return out;
}

/// Packs bits MSB-first into bytes; the final byte is zero-padded.
inline io::Bytes pack_bits_msb(std::span<const std::uint8_t> bits) {
  io::Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    out[i / 8] |= static_cast<std::uint8_t>(bits[i] << (7 - i % 8));
  return out;
}

inline Bits unpack_bits_msb(std::span<const std::uint8_t> bytes, std::size_t bit_count) {
  require(bit_count <= bytes.size() * 8, Errc::CorruptLength, "bit count exceeds packed data");
  Bits out(bit_count);
  for (std::size_t i = 0; i < bit_count; ++i) out[i] = static_cast<std::uint8_t>((bytes[i / 8] >> (7 - i % 8)) & 1);
  return out;
}

/// Inserts a 0 after every run of five consecutive 1s.
inline Bits bit_stuff(std::span<const std::uint8_t> bits) {
  Bits out;
  out.reserve(bits.size() + bits.size() / 5 + 1);
  int run = 0;
  for (std::uint8_t b : bits) {
    out.push_back(b);
    if (b) {
      if (++run == 5) {
        out.push_back(0);
        run = 0;
      }
    } else {
      run = 0;
    }
  }
  return out;
}

/// Removes the 0 that follows every run of five 1s.
inline Bits bit_unstuff(std::span<const std::uint8_t> bits) {
  Bits out;
  out.reserve(bits.size());
  int run = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const std::uint8_t b = bits[i];
    if (run == 5) {
      if (b) fail(Errc::StuffingViolation, "six consecutive ones at bit " + std::to_string(i));
      run = 0;
      continue;
    }
    out.push_back(b);
    run = b ? run + 1 : 0;
  }
  return out;
}

/// flag | stuff(payload bits | FCS bits) | flag, payload LSB-first, FCS little-endian.
inline Bits frame_packet(std::span<const std::uint8_t> payload, const FramerConfig& config) {
  require(!payload.empty(), Errc::InvalidArgument, "frame_packet needs a non-empty payload");
  Bits body = bytes_to_bits_lsb(payload);
  if (config.fcs_enabled) {
    const std::uint16_t fcs = crc16_ccitt(payload);
    const std::array<std::uint8_t, 2> fcs_bytes{static_cast<std::uint8_t>(fcs & 0xFF), static_cast<std::uint8_t>(fcs >> 8)};
    const Bits fb = bytes_to_bits_lsb(fcs_bytes);
    body.insert(body.end(), fb.begin(), fb.end());
  }
  const Bits stuffed = bit_stuff(body);
  Bits out;
  out.reserve(stuffed.size() + 16);
  out.insert(out.end(), kFlagBits.begin(), kFlagBits.end());
  out.insert(out.end(), stuffed.begin(), stuffed.end());
  out.insert(out.end(), kFlagBits.begin(), kFlagBits.end());
  return out;
}

namespace detail {

// Body bit index of the first bit at/after time t: ceil(t_ns * rate / 1e9).
inline std::uint64_t bit_index_at(std::int64_t t_ns, std::uint64_t bit_rate) {
  const auto num = static_cast<unsigned __int128>(t_ns) * bit_rate;
  return static_cast<std::uint64_t>((num + kNanosPerSecond - 1) / kNanosPerSecond);
}

}  // namespace detail

/// Builds the constant-rate stream for a trace.
///
/// The body (stream without preambles) is a sequence of 8-bit idle flags and
/// whole frames. A packet's frame starts at the first unit boundary at or
/// after its arrival; frames queue FIFO behind one another. A copy of the
/// preamble is inserted before body bits 0, P, 2P, ... (P = period), so the
/// emitted length is body + ceil(body / P) * preamble length. Throws Overrun
/// when a frame cannot finish inside the body.
inline BitStream schedule_bitstream(const TrafficTrace& trace, const FramerConfig& config) {
  config.validate();
  require(trace.duration_ns >= 0, Errc::InvalidArgument, "negative trace duration");
  const std::size_t body_len = detail::bit_index_at(trace.duration_ns, config.bit_rate);

  Bits body;
  body.reserve(body_len + 16);
  std::size_t next = 0;
  for (const auto& rec : trace.records) {
    const std::uint64_t arrival = detail::bit_index_at(rec.timestamp_ns, config.bit_rate);
    while (body.size() < arrival && body.size() < body_len)
      body.insert(body.end(), kFlagBits.begin(), kFlagBits.end());
    const Bits frame = frame_packet(rec.payload, config);
    if (body.size() + frame.size() > body_len) {
      fail(Errc::Overrun, "frame for packet at t=" + std::to_string(rec.seconds()) + " s (record " +
                              std::to_string(next) + ") does not fit before the end of the stream");
    }
    body.insert(body.end(), frame.begin(), frame.end());
    ++next;
  }
  while (body.size() < body_len) body.insert(body.end(), kFlagBits.begin(), kFlagBits.end());
  body.resize(body_len);

  const std::size_t period = config.preamble_period_bits;
  const std::size_t n_pre = (body_len + period - 1) / period;
  BitStream out;
  out.bit_rate = config.bit_rate;
  out.body_bits = body_len;
  out.preamble_bits = n_pre * config.preamble_pattern.size();
  out.bits.reserve(body_len + out.preamble_bits);
  for (std::size_t k = 0; k < n_pre; ++k) {
    out.bits.insert(out.bits.end(), config.preamble_pattern.begin(), config.preamble_pattern.end());
    const std::size_t lo = k * period;
    const std::size_t hi = std::min(body_len, lo + period);
    out.bits.insert(out.bits.end(), body.begin() + static_cast<std::ptrdiff_t>(lo),
                    body.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

/// Removes the periodically inserted preambles, returning the body bits.
inline Bits strip_preambles(std::span<const std::uint8_t> bits, const FramerConfig& config) {
  const std::size_t plen = config.preamble_pattern.size();
  const std::size_t chunk = plen + config.preamble_period_bits;
  Bits body;
  body.reserve(bits.size());
  for (std::size_t pos = 0; pos < bits.size(); pos += chunk) {
    const std::size_t lo = std::min(bits.size(), pos + plen);
    const std::size_t hi = std::min(bits.size(), pos + chunk);
    body.insert(body.end(), bits.begin() + static_cast<std::ptrdiff_t>(lo), bits.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return body;
}

struct DeframeResult {
  std::vector<io::Bytes> payloads;
  std::size_t fcs_errors = 0;     // frames dropped for a bad FCS
  std::size_t malformed = 0;      // stuffing violations or non-octet frames
};

/// Test-side receiver: strips preambles, splits on flags, unstuffs and checks
/// the FCS. Bad frames are dropped and counted.
inline DeframeResult deframe(std::span<const std::uint8_t> bits, const FramerConfig& config) {
  const Bits body = strip_preambles(bits, config);
  DeframeResult out;
  auto is_flag = [&](std::size_t i) {
    if (i + 8 > body.size()) return false;
    for (std::size_t k = 0; k < 8; ++k)
      if (body[i + k] != kFlagBits[k]) return false;
    return true;
  };

  std::size_t i = 0;
  while (i < body.size() && !is_flag(i)) ++i;
  while (i < body.size()) {
    const std::size_t start = i + 8;
    std::size_t j = start;
    while (j < body.size() && !is_flag(j)) ++j;
    if (j >= body.size()) break;  // unterminated tail
    if (j > start) {
      try {
        const Bits content = bit_unstuff(std::span(body).subspan(start, j - start));
        if (content.size() % 8 != 0 || content.empty()) {
          ++out.malformed;
        } else {
          io::Bytes bytes = bits_to_bytes_lsb(content);
          if (config.fcs_enabled) {
            if (bytes.size() < 3 || crc16_ccitt(bytes) != kFcsGoodResidue) {
              ++out.fcs_errors;
            } else {
              bytes.resize(bytes.size() - 2);
              out.payloads.push_back(std::move(bytes));
            }
          } else {
            out.payloads.push_back(std::move(bytes));
          }
        }
      } catch (const Error& e) {
        if (e.code() != Errc::StuffingViolation) throw;
        ++out.malformed;
      }
    }
    i = j;
  }
  return out;
}

}  // namespace rfseq
