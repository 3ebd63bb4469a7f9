#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "RFSQCKPT"
//          8   u32       format version (1)
//         12   u64       header length H
//         20   H bytes   UTF-8 JSON header: architecture, hyper-parameters,
//                        metadata, parameter groups, blob table, optimizer
//                        step, RNG state, config hash
//       20+H   blobs     float32 LE arrays in blob-table order
//                        (params, adam_m, adam_v)
//
// The JSON header is dumped with sorted keys, so save -> load -> save is
// byte-identical.

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "rfseq/io.hpp"
#include "rfseq/json.hpp"
#include "rfseq/neural/train.hpp"

namespace rfseq::nn {

inline constexpr char kCheckpointMagic[8] = {'R', 'F', 'S', 'Q', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void to_json(Json& j, const ModelConfig& c) {
  j = {{"input_dim", c.input_dim},
       {"hidden", c.hidden},
       {"lstm_layers", c.lstm_layers},
       {"dense_hidden", c.dense_hidden},
       {"output_dim", c.output_dim},
       {"head", c.head == Head::Softmax ? "softmax" : "linear"},
       {"pooling", c.pooling == Pooling::Last ? "last" : "mean"},
       {"dropout", c.dropout},
       {"forget_bias", c.forget_bias}};
}

inline void from_json(const Json& j, ModelConfig& c) {
  read_opt(j, "input_dim", c.input_dim);
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "lstm_layers", c.lstm_layers);
  read_opt(j, "dense_hidden", c.dense_hidden);
  read_opt(j, "output_dim", c.output_dim);
  read_opt(j, "dropout", c.dropout);
  read_opt(j, "forget_bias", c.forget_bias);
  if (auto it = j.find("head"); it != j.end()) {
    const auto h = it->get<std::string>();
    require(h == "softmax" || h == "linear", Errc::SchemaMismatch, "head must be softmax or linear");
    c.head = h == "softmax" ? Head::Softmax : Head::Linear;
  }
  if (auto it = j.find("pooling"); it != j.end()) {
    const auto p = it->get<std::string>();
    require(p == "last" || p == "mean", Errc::SchemaMismatch, "pooling must be last or mean");
    c.pooling = p == "last" ? Pooling::Last : Pooling::Mean;
  }
}

inline void to_json(Json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"lr", c.adam.lr},
       {"beta1", c.adam.beta1},      {"beta2", c.adam.beta2},      {"eps", c.adam.eps},
       {"clip_norm", c.clip_norm},   {"patience", c.patience},     {"restore_best", c.restore_best},
       {"eval_train", c.eval_train}, {"seed", c.seed}};
}

inline void from_json(const Json& j, TrainConfig& c) {
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "lr", c.adam.lr);
  read_opt(j, "beta1", c.adam.beta1);
  read_opt(j, "beta2", c.adam.beta2);
  read_opt(j, "eps", c.adam.eps);
  read_opt(j, "clip_norm", c.clip_norm);
  read_opt(j, "patience", c.patience);
  read_opt(j, "restore_best", c.restore_best);
  read_opt(j, "eval_train", c.eval_train);
  read_opt(j, "seed", c.seed);
}

struct ModelCheckpoint {
  ModelConfig arch;
  Json hyper = Json::object();
  Json meta = Json::object();  // slice spec, class names, task ...
  std::vector<float> params;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::int64_t step = 0;
  std::string rng_state;

  std::string config_hash() const {
    return io::hex64(io::fnv1a(Json(arch).dump() + "|" + hyper.dump()));
  }

  SequenceModel<float> model() const {
    SequenceModel<float> m(arch);
    require(params.size() == static_cast<std::size_t>(m.params().size()), Errc::SchemaMismatch,
            "checkpoint parameter count does not match its architecture");
    m.params() = Eigen::Map<const Vec<float>>(params.data(), static_cast<Eigen::Index>(params.size()));
    return m;
  }

  static ModelCheckpoint from(const TrainResult<float>& r, const TrainConfig& hyper, Json meta = Json::object()) {
    ModelCheckpoint c;
    c.arch = r.model.config();
    c.hyper = hyper;
    c.meta = std::move(meta);
    c.params.assign(r.model.params().data(), r.model.params().data() + r.model.params().size());
    c.adam_m.assign(r.optimizer.m.data(), r.optimizer.m.data() + r.optimizer.m.size());
    c.adam_v.assign(r.optimizer.v.data(), r.optimizer.v.data() + r.optimizer.v.size());
    c.step = r.optimizer.step;
    c.rng_state = r.rng_state;
    return c;
  }
};

inline io::Bytes encode_checkpoint(const ModelCheckpoint& c) {
  Json groups = Json::array();
  for (const auto& g : param_layout(c.arch))
    groups.push_back({{"name", g.name}, {"rows", g.rows}, {"cols", g.cols}, {"offset", g.offset}});
  const Json header = {
      {"arch", c.arch},
      {"hyper", c.hyper},
      {"meta", c.meta},
      {"groups", groups},
      {"blobs",
       {{{"name", "params"}, {"dtype", "f32le"}, {"count", c.params.size()}},
        {{"name", "adam_m"}, {"dtype", "f32le"}, {"count", c.adam_m.size()}},
        {{"name", "adam_v"}, {"dtype", "f32le"}, {"count", c.adam_v.size()}}}},
      {"step", c.step},
      {"rng_state", c.rng_state},
      {"config_hash", c.config_hash()},
  };
  const std::string h = header.dump();
  io::Bytes out(kCheckpointMagic, kCheckpointMagic + 8);
  io::append<std::uint32_t>(out, kCheckpointVersion);
  io::append<std::uint64_t>(out, h.size());
  out.insert(out.end(), h.begin(), h.end());
  for (const auto* blob : {&c.params, &c.adam_m, &c.adam_v})
    for (float v : *blob) io::append<float>(out, v);
  return out;
}

inline ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 20 && std::memcmp(bytes.data(), kCheckpointMagic, 8) == 0, Errc::SchemaMismatch,
          "not a checkpoint file");
  require(io::load<std::uint32_t>(bytes, 8) == kCheckpointVersion, Errc::SchemaMismatch, "unsupported checkpoint version");
  const auto hlen = io::load<std::uint64_t>(bytes, 12);
  require(bytes.size() >= 20 + hlen, Errc::CorruptLength, "checkpoint header truncated");
  Json h;
  try {
    h = Json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const Json::parse_error& e) {
    fail(Errc::SchemaMismatch, std::string("checkpoint header: ") + e.what());
  }
  ModelCheckpoint c;
  c.arch = h.at("arch").get<ModelConfig>();
  c.hyper = h.at("hyper");
  c.meta = h.at("meta");
  c.step = h.at("step").get<std::int64_t>();
  c.rng_state = h.at("rng_state").get<std::string>();
  std::size_t pos = 20 + hlen;
  std::vector<float>* targets[] = {&c.params, &c.adam_m, &c.adam_v};
  const auto& blobs = h.at("blobs");
  require(blobs.size() == 3, Errc::SchemaMismatch, "checkpoint must hold three blobs");
  for (std::size_t b = 0; b < 3; ++b) {
    const auto n = blobs[b].at("count").get<std::size_t>();
    require(bytes.size() - pos >= n * 4, Errc::CorruptLength, "checkpoint blob truncated");
    targets[b]->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*targets[b])[i] = io::load<float>(bytes, pos + 4 * i);
    pos += 4 * n;
  }
  require(pos == bytes.size(), Errc::CorruptLength, "trailing bytes after checkpoint blobs");
  require(h.at("config_hash").get<std::string>() == c.config_hash(), Errc::SchemaMismatch, "checkpoint config hash mismatch");
  require(c.params.size() == param_count(c.arch), Errc::SchemaMismatch, "parameter count does not match architecture");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& c) {
  io::write_file(path, encode_checkpoint(c));
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace rfseq::nn
