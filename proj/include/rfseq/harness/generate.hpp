#pragma once

// Dataset generation: per class, synth trace -> HDLC bitstream -> QPSK
// baseband, then one channel pass per variant. Every variant of a class is
// built from the same symbols.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rfseq/channel.hpp"
#include "rfseq/dataset.hpp"
#include "rfseq/framing.hpp"
#include "rfseq/harness/common.hpp"
#include "rfseq/json.hpp"
#include "rfseq/modem.hpp"
#include "rfseq/pcap.hpp"
#include "rfseq/trace.hpp"

namespace rfseq::harness {

struct VariantSpec {
  std::string name;
  ChannelConfig channel;
};

struct GenerateConfig {
  std::uint64_t seed = 1;
  double duration_s = 2.0;
  double quiet_tail_s = 0.05;
  double background_fraction = 0.05;
  std::vector<ClassProfile> profiles = desk_profiles();
  FramerConfig framer;
  ModemConfig modem;
  std::vector<VariantSpec> variants{{"clean", ChannelConfig::clean()}, {"channel", ChannelConfig{}}};
  SliceSpec slice;
  PartitionConfig partition;
  bool write_traces = true;  // pcap and packed bitstream per class
};

inline void to_json(Json& j, const GenerateConfig& c) {
  Json variants = Json::object();
  for (const auto& v : c.variants) variants[v.name] = v.channel.is_clean() ? Json("clean") : Json(v.channel);
  j = {{"seed", c.seed},
       {"duration_s", c.duration_s},
       {"quiet_tail_s", c.quiet_tail_s},
       {"background_fraction", c.background_fraction},
       {"profiles", c.profiles},
       {"framer", c.framer},
       {"modem", c.modem},
       {"variants", variants},
       {"slice", c.slice},
       {"partition", c.partition},
       {"write_traces", c.write_traces}};
}

inline std::vector<ClassProfile> profiles_from_json(const Json& j, double background_fraction) {
  if (j.is_string()) {
    const auto set = j.get<std::string>();
    if (set == "desk") return desk_profiles(background_fraction);
    if (set == "applications") return application_profiles(background_fraction);
    if (set == "catalog") return profile_catalog(background_fraction);
    fail(Errc::SchemaMismatch, "profiles must be desk, applications, catalog or a list");
  }
  require(j.is_array() && !j.empty(), Errc::SchemaMismatch, "profiles list is empty");
  std::vector<ClassProfile> out;
  for (const auto& p : j) {
    if (p.is_string()) {
      out.push_back(find_profile(p.get<std::string>(), background_fraction));
    } else {
      ClassProfile c;
      c.background_fraction = background_fraction;
      from_json(p, c);
      out.push_back(c);
    }
  }
  return out;
}

inline void from_json(const Json& j, GenerateConfig& c) {
  read_opt(j, "seed", c.seed);
  read_opt(j, "duration_s", c.duration_s);
  read_opt(j, "quiet_tail_s", c.quiet_tail_s);
  read_opt(j, "background_fraction", c.background_fraction);
  if (auto it = j.find("profiles"); it != j.end()) c.profiles = profiles_from_json(*it, c.background_fraction);
  else c.profiles = desk_profiles(c.background_fraction);
  read_opt(j, "framer", c.framer);
  read_opt(j, "modem", c.modem);
  if (auto it = j.find("variants"); it != j.end()) {
    require(it->is_object() && !it->empty(), Errc::SchemaMismatch, "variants must be a non-empty object");
    c.variants.clear();
    for (const auto& [name, ch] : it->items()) c.variants.push_back({name, ch.get<ChannelConfig>()});
  }
  read_opt(j, "slice", c.slice);
  read_opt(j, "partition", c.partition);
  read_opt(j, "write_traces", c.write_traces);
}

inline void validate(const GenerateConfig& c) {
  require(c.duration_s > 0.0, Errc::InvalidArgument, "duration_s must be > 0");
  require(!c.profiles.empty(), Errc::InvalidArgument, "no class profiles");
  std::map<std::string, int> seen;
  for (const auto& p : c.profiles) require(seen[p.name]++ == 0, Errc::InvalidArgument, "duplicate class '" + p.name + "'");
  for (const auto& v : c.variants) {
    require(!v.name.empty() && v.name.find('/') == std::string::npos, Errc::InvalidArgument, "bad variant name");
    v.channel.validate();
  }
  c.framer.validate();
  c.modem.validate();
  c.slice.validate();
}

struct ClassBaseband {
  TrafficTrace trace;
  BitStream bits;
  IqSignal baseband;
};

inline ClassBaseband synthesize_class(const GenerateConfig& cfg, std::size_t c) {
  ClassBaseband out;
  const auto& profile = cfg.profiles[c];
  out.trace = run_stage("trace", [&] {
    return synth_trace(profile, cfg.duration_s, detail::mix_seed(cfg.seed, c), cfg.quiet_tail_s);
  });
  out.bits = run_stage("framing", [&] { return schedule_bitstream(out.trace, cfg.framer); });
  out.baseband = run_stage("modem", [&] { return modulate(out.bits.bits, cfg.modem, cfg.framer.bit_rate); });
  return out;
}

inline Json manifest_config(const GenerateConfig& cfg, const VariantSpec& v) {
  Json j = cfg;
  j.erase("variants");
  j["channel"] = v.channel.is_clean() ? Json("clean") : Json(v.channel);
  return j;
}

/// Applies every variant's channel to one class baseband. Channel seeds are
/// derived from (seed, variant index, class index).
inline std::vector<Recording> apply_variants(const GenerateConfig& cfg, std::size_t c, const IqSignal& baseband) {
  std::vector<Recording> out;
  for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
    ChannelConfig ch = cfg.variants[vi].channel;
    ch.seed = detail::mix_seed(detail::mix_seed(cfg.seed, 1000 + vi), c);
    auto res = run_stage("channel", [&] { return apply_channel(baseband, ch); });
    quantize_f32(res.signal.samples);
    out.push_back({cfg.profiles[c].name, std::move(res.signal), res.draw});
  }
  return out;
}

/// All variants in memory, keyed by variant name.
inline std::map<std::string, RecordingSet> generate_recordings(const GenerateConfig& cfg) {
  run_stage("config", [&] { validate(cfg); });
  std::map<std::string, RecordingSet> sets;
  for (const auto& v : cfg.variants) sets[v.name] = {v.name, manifest_config(cfg, v), {}};
  for (std::size_t c = 0; c < cfg.profiles.size(); ++c) {
    const auto base = synthesize_class(cfg, c);
    auto recs = apply_variants(cfg, c, base.baseband);
    for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) sets[cfg.variants[vi].name].recordings.push_back(std::move(recs[vi]));
  }
  return sets;
}

struct GenerateReport {
  std::vector<std::string> variants;
  std::vector<std::string> classes;
  std::vector<std::size_t> samples;  // per class, first variant
};

/// Writes <out>/<variant>/ datasets, <out>/traces/<class>.pcap, packed bits
/// in <out>/bits/<class>.bits and the resolved config.
inline GenerateReport cmd_generate(const GenerateConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr) {
  run_stage("config", [&] { validate(cfg); });
  GenerateReport rep;
  run_stage("io", [&] {
    std::filesystem::create_directories(out);
    write_json_file(out / "resolved_config.json", Json(cfg));
  });
  std::map<std::string, RecordingSet> sets;
  for (const auto& v : cfg.variants) sets[v.name] = {v.name, manifest_config(cfg, v), {}};
  Json bit_index = Json::array();
  for (std::size_t c = 0; c < cfg.profiles.size(); ++c) {
    const auto& name = cfg.profiles[c].name;
    const auto base = synthesize_class(cfg, c);
    note(log, name + ": " + std::to_string(base.trace.records.size()) + " packets, " + std::to_string(base.bits.bits.size()) +
                  " bits, " + std::to_string(base.baseband.size()) + " samples");
    if (cfg.write_traces) {
      run_stage("io", [&] {
        io::write_file(out / "traces" / (name + ".pcap"), pcap::write(base.trace));
        io::write_file(out / "bits" / (name + ".bits"), pack_bits_msb(base.bits.bits));
      });
      bit_index.push_back({{"class", name},
                           {"packets", base.trace.records.size()},
                           {"bits", base.bits.bits.size()},
                           {"body_bits", base.bits.body_bits},
                           {"preamble_bits", base.bits.preamble_bits},
                           {"bit_order", "msb-first packing of the on-air bit sequence"}});
    }
    auto recs = apply_variants(cfg, c, base.baseband);
    rep.classes.push_back(name);
    rep.samples.push_back(recs.front().signal.size());
    for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) sets[cfg.variants[vi].name].recordings.push_back(std::move(recs[vi]));
  }
  run_stage("io", [&] {
    if (cfg.write_traces) write_json_file(out / "bits" / "index.json", bit_index);
    for (const auto& v : cfg.variants) {
      write_dataset(out / v.name, sets[v.name]);
      rep.variants.push_back(v.name);
    }
  });
  return rep;
}

}  // namespace rfseq::harness
