#pragma once

// Classic libpcap capture files: 24-byte global header followed by 16-byte
// record headers, byte order given by the magic number. Microsecond
// (0xa1b2c3d4) and nanosecond (0xa1b23c4d) variants are both accepted;
// pcapng is rejected.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>

#include "rfseq/io.hpp"
#include "rfseq/trace.hpp"

namespace rfseq::pcap {

inline constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
inline constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
inline constexpr std::uint32_t kPcapngMagic = 0x0a0d0d0a;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::size_t kGlobalHeaderLen = 24;
inline constexpr std::size_t kRecordHeaderLen = 16;

enum class Resolution { Micro, Nano };

struct Header {
  std::endian order = std::endian::little;
  Resolution resolution = Resolution::Micro;
  std::uint16_t version_major = 2;
  std::uint16_t version_minor = 4;
  std::int32_t thiszone = 0;
  std::uint32_t sigfigs = 0;
  std::uint32_t snaplen = 65535;
  std::uint32_t network = kLinkTypeEthernet;
};

inline Header parse_header(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kGlobalHeaderLen, Errc::Truncated, "global header needs 24 bytes");
  Header h;
  const auto le = io::load<std::uint32_t>(bytes, 0, std::endian::little);
  const auto be = io::load<std::uint32_t>(bytes, 0, std::endian::big);
  if (le == kMagicMicros || le == kMagicNanos) {
    h.order = std::endian::little;
    h.resolution = le == kMagicNanos ? Resolution::Nano : Resolution::Micro;
  } else if (be == kMagicMicros || be == kMagicNanos) {
    h.order = std::endian::big;
    h.resolution = be == kMagicNanos ? Resolution::Nano : Resolution::Micro;
  } else if (le == kPcapngMagic) {
    fail(Errc::BadMagic, "pcapng files are not supported; convert to classic pcap");
  } else {
    fail(Errc::BadMagic, "unrecognized pcap magic 0x" + io::hex64(le).substr(8));
  }
  h.version_major = io::load<std::uint16_t>(bytes, 4, h.order);
  h.version_minor = io::load<std::uint16_t>(bytes, 6, h.order);
  h.thiszone = io::load<std::int32_t>(bytes, 8, h.order);
  h.sigfigs = io::load<std::uint32_t>(bytes, 12, h.order);
  h.snaplen = io::load<std::uint32_t>(bytes, 16, h.order);
  h.network = io::load<std::uint32_t>(bytes, 20, h.order);
  return h;
}

/// One PacketRecord per capture record with link-layer bytes kept verbatim.
/// Timestamps are rebased so the earliest record sits at t = 0 and the trace
/// duration equals the last timestamp. Zero-length records carry nothing to
/// frame and are skipped.
inline TrafficTrace parse(std::span<const std::uint8_t> bytes, std::string class_label = {}) {
  const Header h = parse_header(bytes);
  const std::int64_t frac_scale = h.resolution == Resolution::Nano ? 1 : 1000;

  std::vector<PacketRecord> records;
  std::size_t pos = kGlobalHeaderLen;
  std::size_t index = 0;
  while (pos < bytes.size()) {
    require(bytes.size() - pos >= kRecordHeaderLen, Errc::Truncated,
            "record " + std::to_string(index) + " header extends past end of input");
    const auto ts_sec = io::load<std::uint32_t>(bytes, pos, h.order);
    const auto ts_frac = io::load<std::uint32_t>(bytes, pos + 4, h.order);
    const auto incl_len = io::load<std::uint32_t>(bytes, pos + 8, h.order);
    pos += kRecordHeaderLen;
    require(bytes.size() - pos >= incl_len, Errc::Truncated,
            "record " + std::to_string(index) + " body extends past end of input");
    if (incl_len > 0) {
      PacketRecord r;
      r.timestamp_ns = static_cast<std::int64_t>(ts_sec) * kNanosPerSecond + static_cast<std::int64_t>(ts_frac) * frac_scale;
      r.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + incl_len));
      records.push_back(std::move(r));
    }
    pos += incl_len;
    ++index;
  }

  std::stable_sort(records.begin(), records.end(),
                   [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp_ns < b.timestamp_ns; });
  TrafficTrace trace;
  trace.class_label = std::move(class_label);
  if (!records.empty()) {
    const std::int64_t t0 = records.front().timestamp_ns;
    for (auto& r : records) r.timestamp_ns -= t0;
    trace.duration_ns = records.back().timestamp_ns;
  }
  trace.records = std::move(records);
  return trace;
}

inline TrafficTrace read(const std::filesystem::path& path, std::string class_label = {}) {
  const io::Bytes bytes = io::read_file(path);
  return parse(bytes, std::move(class_label));
}

/// Serializes a trace as a little-endian classic pcap. Nanosecond resolution
/// is selected automatically when any timestamp is not a whole microsecond.
inline io::Bytes write(const TrafficTrace& trace, std::uint32_t network = kLinkTypeEthernet) {
  const bool nanos = std::any_of(trace.records.begin(), trace.records.end(),
                                 [](const PacketRecord& r) { return r.timestamp_ns % 1000 != 0; });
  io::Bytes out;
  io::append<std::uint32_t>(out, nanos ? kMagicNanos : kMagicMicros);
  io::append<std::uint16_t>(out, 2);
  io::append<std::uint16_t>(out, 4);
  io::append<std::int32_t>(out, 0);
  io::append<std::uint32_t>(out, 0);
  io::append<std::uint32_t>(out, 65535);
  io::append<std::uint32_t>(out, network);
  for (const auto& r : trace.records) {
    const auto sec = static_cast<std::uint32_t>(r.timestamp_ns / kNanosPerSecond);
    const auto sub = r.timestamp_ns % kNanosPerSecond;
    io::append<std::uint32_t>(out, sec);
    io::append<std::uint32_t>(out, static_cast<std::uint32_t>(nanos ? sub : sub / 1000));
    io::append<std::uint32_t>(out, static_cast<std::uint32_t>(r.payload.size()));
    io::append<std::uint32_t>(out, static_cast<std::uint32_t>(r.payload.size()));
    out.insert(out.end(), r.payload.begin(), r.payload.end());
  }
  return out;
}

}  // namespace rfseq::pcap
