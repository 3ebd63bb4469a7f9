#pragma once

// nlohmann::json adapters for the configuration structs. Missing keys keep
// their defaults so config files only need to state what they change.

#include <nlohmann/json.hpp>

#include "rfseq/channel.hpp"
#include "rfseq/framing.hpp"
#include "rfseq/modem.hpp"
#include "rfseq/trace.hpp"

namespace rfseq {

using Json = nlohmann::json;

template <typename T>
void read_opt(const Json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) field = it->template get<T>();
}

// framing -------------------------------------------------------------------

inline void to_json(Json& j, const FramerConfig& c) {
  std::string pattern;
  for (auto b : c.preamble_pattern) pattern.push_back(b ? '1' : '0');
  j = {{"bit_rate", c.bit_rate},
       {"preamble_period_bits", c.preamble_period_bits},
       {"preamble_pattern", pattern},
       {"fcs_enabled", c.fcs_enabled}};
}

inline void from_json(const Json& j, FramerConfig& c) {
  read_opt(j, "bit_rate", c.bit_rate);
  read_opt(j, "preamble_period_bits", c.preamble_period_bits);
  read_opt(j, "fcs_enabled", c.fcs_enabled);
  if (auto it = j.find("preamble_pattern"); it != j.end()) {
    c.preamble_pattern.clear();
    for (char ch : it->get<std::string>()) {
      require(ch == '0' || ch == '1', Errc::SchemaMismatch, "preamble_pattern must be a 0/1 string");
      c.preamble_pattern.push_back(ch == '1');
    }
  }
}

// modem ---------------------------------------------------------------------

inline void to_json(Json& j, const ModemConfig& c) {
  j = {{"samples_per_symbol", c.samples_per_symbol}, {"rrc_rolloff", c.rrc_rolloff}, {"rrc_span_symbols", c.rrc_span_symbols},
       {"gray_map", "00:(+,+) 01:(-,+) 11:(-,-) 10:(+,-)"}};
}

inline void from_json(const Json& j, ModemConfig& c) {
  read_opt(j, "samples_per_symbol", c.samples_per_symbol);
  read_opt(j, "rrc_rolloff", c.rrc_rolloff);
  read_opt(j, "rrc_span_symbols", c.rrc_span_symbols);
}

// channel -------------------------------------------------------------------

inline void to_json(Json& j, const ChannelConfig& c) {
  j = {{"snr_db", snr_to_json(c.snr_db)},         {"max_freq_offset", c.max_freq_offset},
       {"max_timing_offset", c.max_timing_offset}, {"max_frac_delay", c.max_frac_delay},
       {"max_phase", c.max_phase},                 {"seed", c.seed}};
}

inline void from_json(const Json& j, ChannelConfig& c) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "clean") {
      c = ChannelConfig::clean(c.seed);
      return;
    }
    require(name == "channel", Errc::SchemaMismatch, "channel must be \"clean\", \"channel\" or an object");
    c = ChannelConfig{};
    return;
  }
  if (auto it = j.find("snr_db"); it != j.end()) c.snr_db = snr_from_json(*it);
  read_opt(j, "max_freq_offset", c.max_freq_offset);
  read_opt(j, "max_timing_offset", c.max_timing_offset);
  read_opt(j, "max_frac_delay", c.max_frac_delay);
  read_opt(j, "max_phase", c.max_phase);
  read_opt(j, "seed", c.seed);
}

// trace profiles ------------------------------------------------------------

inline void to_json(Json& j, const ClassProfile& p) {
  Json sizes = std::visit(
      [](const auto& d) -> Json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FixedSize>) return {{"kind", "fixed"}, {"bytes", d.bytes}};
        else if constexpr (std::is_same_v<T, UniformSize>)
          return {{"kind", "uniform"}, {"min_bytes", d.min_bytes}, {"max_bytes", d.max_bytes}};
        else return {{"kind", "bimodal"}, {"small_bytes", d.small_bytes}, {"large_bytes", d.large_bytes}, {"p_large", d.p_large}};
      },
      p.sizes);
  Json arrivals = std::visit(
      [](const auto& d) -> Json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, PeriodicArrivals>) return {{"kind", "periodic"}, {"interval_s", d.interval_s}};
        else if constexpr (std::is_same_v<T, ExponentialArrivals>) return {{"kind", "exponential"}, {"mean_s", d.mean_s}};
        else return {{"kind", "on_off"}, {"burst_s", d.burst_s}, {"idle_s", d.idle_s}, {"interval_s", d.interval_s}};
      },
      p.arrivals);
  j = {{"name", p.name},
       {"sizes", sizes},
       {"arrivals", arrivals},
       {"duty_cycle", p.duty_cycle},
       {"background_fraction", p.background_fraction},
       {"mtu", p.mtu}};
}

inline void from_json(const Json& j, ClassProfile& p) {
  p.name = j.at("name").get<std::string>();
  read_opt(j, "duty_cycle", p.duty_cycle);
  read_opt(j, "background_fraction", p.background_fraction);
  read_opt(j, "mtu", p.mtu);
  if (auto it = j.find("sizes"); it != j.end()) {
    const auto kind = it->at("kind").get<std::string>();
    if (kind == "fixed") p.sizes = FixedSize{it->at("bytes").get<std::size_t>()};
    else if (kind == "uniform") p.sizes = UniformSize{it->at("min_bytes").get<std::size_t>(), it->at("max_bytes").get<std::size_t>()};
    else if (kind == "bimodal")
      p.sizes = BimodalSize{it->at("small_bytes").get<std::size_t>(), it->at("large_bytes").get<std::size_t>(),
                            it->at("p_large").get<double>()};
    else fail(Errc::SchemaMismatch, "unknown size distribution '" + kind + "'");
  }
  if (auto it = j.find("arrivals"); it != j.end()) {
    const auto kind = it->at("kind").get<std::string>();
    if (kind == "periodic") p.arrivals = PeriodicArrivals{it->at("interval_s").get<double>()};
    else if (kind == "exponential") p.arrivals = ExponentialArrivals{it->at("mean_s").get<double>()};
    else if (kind == "on_off")
      p.arrivals = OnOffArrivals{it->at("burst_s").get<double>(), it->at("idle_s").get<double>(), it->at("interval_s").get<double>()};
    else fail(Errc::SchemaMismatch, "unknown arrival distribution '" + kind + "'");
  }
}

}  // namespace rfseq
