#pragma once

// Classifier and generator experiments on generated datasets: single runs,
// the sequence-length trade, the resumable grid, and free-run continuation.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rfseq/dataset.hpp"
#include "rfseq/harness/common.hpp"
#include "rfseq/harness/generate.hpp"
#include "rfseq/neural/checkpoint.hpp"
#include "rfseq/neural/generate.hpp"
#include "rfseq/neural/train.hpp"

namespace rfseq::harness {

namespace fs = std::filesystem;

struct GridAxis {
  std::string name;
  std::vector<Json> values;
};

/// One config shape for every experiment command; each command reads the
/// keys it needs. `raw` keeps the file as given (after --seed) for the
/// resolved-config record and for grid cell patching.
struct ExperimentConfig {
  Json raw = Json::object();
  std::uint64_t seed = 1;
  std::string dataset;                     // generate output root or one variant directory
  std::optional<GenerateConfig> generate;  // in-memory data when no dataset path is given
  std::string variant = "clean";
  Json slice = Json::object();      // overrides on top of the dataset manifest
  Json partition = Json::object();  // same
  std::vector<std::string> classes;  // subset by name; empty = all
  std::size_t num_classes = 0;       // K; 0 = number of selected classes
  std::size_t examples_per_class = 200;
  Json model = Json::object();
  nn::TrainConfig train;
  bool shuffle_labels = false;
  std::vector<std::size_t> seqlens{32, 64, 128, 256, 512, 768};
  std::vector<std::uint64_t> seeds;  // trade-seqlen repeats; empty = {seed}
  std::vector<GridAxis> axes;
  // generator / continuation
  std::string target_class;
  std::size_t examples = 256;
  std::string checkpoint;
  std::size_t start = 0;
  std::size_t steps = 64;
};

inline ExperimentConfig parse_experiment(const Json& j) {
  return run_stage("config", [&] {
    require(j.is_object(), Errc::SchemaMismatch, "config must be a JSON object");
    ExperimentConfig c;
    c.raw = j;
    read_opt(j, "seed", c.seed);
    read_opt(j, "dataset", c.dataset);
    if (auto it = j.find("generate"); it != j.end()) c.generate = it->get<GenerateConfig>();
    require(!c.dataset.empty() || c.generate || j.contains("checkpoint"), Errc::SchemaMismatch,
            "config needs \"dataset\" or \"generate\"");
    read_opt(j, "variant", c.variant);
    if (j.contains("slice")) c.slice = j.at("slice");
    if (j.contains("partition")) c.partition = j.at("partition");
    read_opt(j, "classes", c.classes);
    read_opt(j, "num_classes", c.num_classes);
    read_opt(j, "examples_per_class", c.examples_per_class);
    if (j.contains("model")) c.model = j.at("model");
    read_opt(j, "train", c.train);
    read_opt(j, "shuffle_labels", c.shuffle_labels);
    read_opt(j, "seqlens", c.seqlens);
    read_opt(j, "seeds", c.seeds);
    if (auto it = j.find("grid"); it != j.end()) {
      for (const auto& a : it->at("axes")) {
        GridAxis ax{a.at("name").get<std::string>(), a.at("values").get<std::vector<Json>>()};
        require(!ax.values.empty(), Errc::InvalidArgument, "grid axis '" + ax.name + "' has no values");
        c.axes.push_back(std::move(ax));
      }
    }
    read_opt(j, "class", c.target_class);
    read_opt(j, "examples", c.examples);
    read_opt(j, "checkpoint", c.checkpoint);
    read_opt(j, "start", c.start);
    read_opt(j, "steps", c.steps);
    return c;
  });
}

// ---------------------------------------------------------------------------
// Data sources

/// Loads recording sets once per (source, variant).
class RecordingCache {
 public:
  std::shared_ptr<const RecordingSet> get(const ExperimentConfig& cfg, const std::string& variant) {
    if (!cfg.dataset.empty()) {
      fs::path dir = cfg.dataset;
      if (!fs::exists(dir / kManifestName)) dir /= variant;
      const std::string key = "dir:" + fs::absolute(dir).lexically_normal().string();
      if (auto it = sets_.find(key); it != sets_.end()) return it->second;
      auto set = std::make_shared<const RecordingSet>(run_stage("dataset", [&] { return read_dataset(dir); }));
      return sets_[key] = set;
    }
    require(cfg.generate.has_value(), Errc::SchemaMismatch, "no data source configured");
    const std::string base = "gen:" + Json(*cfg.generate).dump();
    if (!sets_.count(base + "|" + variant)) {
      auto all = generate_recordings(*cfg.generate);
      for (auto& [name, set] : all) sets_[base + "|" + name] = std::make_shared<const RecordingSet>(std::move(set));
    }
    auto it = sets_.find(base + "|" + variant);
    if (it == sets_.end()) throw StageError("dataset", Errc::InvalidArgument, "unknown variant '" + variant + "'");
    return it->second;
  }

 private:
  std::map<std::string, std::shared_ptr<const RecordingSet>> sets_;
};

inline SliceSpec resolve_slice(const RecordingSet& set, const Json& overrides) {
  SliceSpec s;
  if (set.config.contains("slice")) s = set.config.at("slice").get<SliceSpec>();
  from_json(overrides, s);
  return s;
}

inline PartitionConfig resolve_partition(const RecordingSet& set, const Json& overrides) {
  PartitionConfig p;
  if (set.config.contains("partition")) p = set.config.at("partition").get<PartitionConfig>();
  from_json(overrides, p);
  return p;
}

inline int samples_per_symbol(const RecordingSet& set) {
  if (set.config.contains("modem")) return set.config.at("modem").get<ModemConfig>().samples_per_symbol;
  return ModemConfig{}.samples_per_symbol;
}

inline std::vector<std::size_t> select_classes(const RecordingSet& set, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  if (names.empty()) {
    idx.resize(set.recordings.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (const auto& n : names) {
    std::size_t k = 0;
    while (k < set.recordings.size() && set.recordings[k].class_name != n) ++k;
    require(k < set.recordings.size(), Errc::InvalidArgument, "class '" + n + "' not in dataset");
    idx.push_back(k);
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Classifier

inline nn::ModelConfig classifier_arch(const Json& overrides, std::size_t input_dim, std::size_t classes) {
  auto m = nn::ModelConfig::classifier(input_dim, classes);
  from_json(overrides, m);
  m.input_dim = input_dim;
  m.output_dim = classes;
  m.head = nn::Head::Softmax;
  m.validate();
  return m;
}

struct ClassifierRun {
  std::vector<std::string> classes;
  SliceSpec slice;
  PartitionConfig partition;
  nn::ModelConfig arch;
  nn::TrainConfig hyper;
  std::optional<nn::TrainResult<float>> result;
  nn::EvalResult test;
  ConfusionMatrix confusion;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double sec_per_epoch = 0.0;

  double val_loss() const { return test.loss; }
  double val_acc() const { return test.accuracy; }
};

inline ConfusionMatrix confusion_of(const std::vector<std::string>& classes, const std::vector<ExampleTensor>& examples,
                                    const std::vector<int>& predictions) {
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < examples.size(); ++i) m.add(examples[i].label, predictions[i]);
  return m;
}

struct ClassifierData {
  std::vector<std::string> classes;
  SliceSpec slice;
  PartitionConfig partition;
  LabeledSets sets;
};

inline ClassifierData classifier_data(const RecordingSet& set, const ExperimentConfig& cfg) {
  ClassifierData d;
  const auto idx = run_stage("config", [&] { return select_classes(set, cfg.classes); });
  for (auto k : idx) d.classes.push_back(set.recordings[k].class_name);
  const std::size_t k_req = cfg.num_classes ? cfg.num_classes : idx.size();
  if (k_req > idx.size())
    throw StageError("dataset", Errc::InsufficientClasses,
                     "InsufficientClasses: " + std::to_string(k_req) + " labels requested but only " +
                         std::to_string(idx.size()) + " classes are populated");
  if (k_req < idx.size())
    throw StageError("config", Errc::InvalidArgument,
                     "InvalidArgument: num_classes " + std::to_string(k_req) + " < " + std::to_string(idx.size()) + " selected classes");
  d.slice = run_stage("config", [&] { return resolve_slice(set, cfg.slice); });
  d.partition = run_stage("config", [&] { return resolve_partition(set, cfg.partition); });
  std::vector<std::span<const Complex>> signals;
  for (auto k : idx) signals.emplace_back(set.recordings[k].signal.samples);
  d.sets = run_stage("dataset", [&] {
    return build_classification_dataset(signals, d.slice, d.partition, cfg.examples_per_class, detail::mix_seed(cfg.seed, 11));
  });
  if (cfg.shuffle_labels) {
    // Null-hypothesis control: permute training labels only.
    std::vector<int> labels;
    for (const auto& e : d.sets.train) labels.push_back(e.label);
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, 13));
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < labels.size(); ++i) d.sets.train[i].label = labels[i];
  }
  return d;
}

inline ClassifierRun run_classifier(const RecordingSet& set, const ExperimentConfig& cfg, std::ostream* log = nullptr,
                                    const std::string& tag = {}) {
  ClassifierRun r;
  auto data = classifier_data(set, cfg);
  r.classes = data.classes;
  r.slice = data.slice;
  r.partition = data.partition;
  r.n_train = data.sets.train.size();
  r.n_test = data.sets.test.size();
  r.arch = run_stage("config", [&] { return classifier_arch(cfg.model, r.slice.step_dim(), r.classes.size()); });
  r.hyper = cfg.train;
  r.hyper.seed = detail::mix_seed(cfg.seed, 12);
  r.hyper.on_epoch = [&](const nn::EpochMetrics& m) {
    note(log, tag + "epoch " + std::to_string(m.epoch) + " train_loss " + num(m.train_loss) + " val_loss " +
                  num(m.val_loss) + " val_acc " + num(m.val_acc));
  };
  r.result = run_stage("neural", [&] { return nn::train<float>(data.sets.train, data.sets.test, r.arch, r.hyper); });
  r.hyper.on_epoch = nullptr;
  r.test = run_stage("neural", [&] { return nn::evaluate(r.result->model, data.sets.test); });
  r.confusion = confusion_of(r.classes, data.sets.test, r.test.predictions);
  double secs = 0.0;
  for (const auto& m : r.result->history) secs += m.seconds;
  r.sec_per_epoch = r.result->history.empty() ? 0.0 : secs / double(r.result->history.size());
  return r;
}

inline Json classifier_meta(const ClassifierRun& r, const ExperimentConfig& cfg) {
  Json meta = {{"task", "classifier"}, {"classes", r.classes}, {"slice", r.slice}, {"partition", r.partition},
               {"variant", cfg.variant}, {"seed", cfg.seed}};
  if (!cfg.dataset.empty()) meta["dataset"] = cfg.dataset;
  if (cfg.generate) meta["generate"] = *cfg.generate;
  return meta;
}

inline Json run_summary(const ClassifierRun& r) {
  return {{"val_loss", r.val_loss()},
          {"val_acc", r.val_acc()},
          {"confusion_accuracy", r.confusion.accuracy()},
          {"best_epoch", r.result->best_epoch},
          {"epochs_run", r.result->history.size()},
          {"stopped_early", r.result->stopped_early},
          {"sec_per_epoch", r.sec_per_epoch},
          {"n_train", r.n_train},
          {"n_test", r.n_test},
          {"params", nn::param_count(r.arch)}};
}

/// Resolved record of what a classifier run actually used.
inline Json resolved_classifier(const ClassifierRun& r, const ExperimentConfig& cfg) {
  Json j = cfg.raw;
  j["seed"] = cfg.seed;
  j["resolved"] = {{"classes", r.classes}, {"slice", r.slice}, {"partition", r.partition}, {"arch", r.arch}, {"train", r.hyper}};
  return j;
}

inline void write_classifier_outputs(const ClassifierRun& r, const ExperimentConfig& cfg, const fs::path& dir) {
  run_stage("io", [&] {
    fs::create_directories(dir);
    write_json_file(dir / "resolved_config.json", resolved_classifier(r, cfg));
    io::write_text(dir / "metrics.csv", metrics_csv(r.result->history));
    write_json_file(dir / "confusion.json", Json(r.confusion));
    write_json_file(dir / "summary.json", run_summary(r));
    nn::save_checkpoint(dir / "model.ckpt", nn::ModelCheckpoint::from(*r.result, r.hyper, classifier_meta(r, cfg)));
  });
}

inline ClassifierRun cmd_train_classifier(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
  RecordingCache cache;
  const auto set = cache.get(cfg, cfg.variant);
  auto r = run_classifier(*set, cfg, log);
  write_classifier_outputs(r, cfg, out);
  note(log, "val_acc " + num(r.val_acc()) + " val_loss " + num(r.val_loss()));
  return r;
}

/// Rebuilds the test split a checkpoint was trained against and re-scores it.
inline ConfusionMatrix reevaluate_checkpoint(const nn::ModelCheckpoint& ckpt, const RecordingSet& set, const ExperimentConfig& cfg) {
  const auto data = classifier_data(set, cfg);
  const auto model = ckpt.model();
  const auto e = run_stage("neural", [&] { return nn::evaluate(model, data.sets.test); });
  return confusion_of(data.classes, data.sets.test, e.predictions);
}

// ---------------------------------------------------------------------------
// Sequence-length trade

struct SeqlenRow {
  std::size_t n_steps = 0;
  std::size_t window_len = 0;
  std::size_t stride = 0;
  std::size_t consumed_samples = 0;
  std::size_t n_symbols = 0;
  std::size_t n_bits = 0;
  double val_loss = 0.0;  // median over seeds
  double val_acc = 0.0;   // median over seeds
  double sec_per_epoch = 0.0;
  std::vector<double> seed_acc;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<SeqlenRow> cmd_trade_seqlen(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
  auto lens = cfg.seqlens;
  run_stage("config", [&] { require(!lens.empty(), Errc::InvalidArgument, "seqlens is empty"); });
  std::sort(lens.begin(), lens.end());
  lens.erase(std::unique(lens.begin(), lens.end()), lens.end());
  const auto seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.seeds;
  RecordingCache cache;
  const auto set = cache.get(cfg, cfg.variant);
  const int sps = samples_per_symbol(*set);
  run_stage("io", [&] {
    fs::create_directories(out);
    write_json_file(out / "resolved_config.json", cfg.raw);
  });

  std::vector<SeqlenRow> rows;
  std::string runs = csv_line({"n_steps", "seed", "val_loss", "val_acc", "sec_per_epoch"});
  for (auto n : lens) {
    SeqlenRow row;
    std::vector<double> losses, secs;
    for (auto s : seeds) {
      ExperimentConfig c = cfg;
      c.seed = s;
      c.slice["n_steps"] = n;
      const auto r = run_classifier(*set, c, log, "N=" + std::to_string(n) + " seed=" + std::to_string(s) + " ");
      write_classifier_outputs(r, c, out / ("N" + std::to_string(n) + "_seed" + std::to_string(s)));
      row.n_steps = n;
      row.window_len = r.slice.window_len;
      row.stride = r.slice.stride;
      row.consumed_samples = r.slice.span();
      row.seed_acc.push_back(r.val_acc());
      losses.push_back(r.val_loss());
      secs.push_back(r.sec_per_epoch);
      runs += csv_line({std::to_string(n), std::to_string(s), num(r.val_loss()), num(r.val_acc()), num(r.sec_per_epoch)});
    }
    row.n_symbols = row.consumed_samples / std::size_t(sps);
    row.n_bits = 2 * row.n_symbols;
    row.val_loss = median(losses);
    row.val_acc = median(row.seed_acc);
    row.sec_per_epoch = median(secs);
    rows.push_back(row);
  }

  std::string summary = csv_line({"n_steps", "L", "M", "consumed_samples", "n_symbols", "n_bits", "n_symbols_sps8",
                                  "n_bits_sps8", "val_loss", "val_acc", "sec_per_epoch", "seeds"});
  for (const auto& r : rows)
    summary += csv_line({std::to_string(r.n_steps), std::to_string(r.window_len), std::to_string(r.stride),
                         std::to_string(r.consumed_samples), std::to_string(r.n_symbols), std::to_string(r.n_bits),
                         std::to_string(r.consumed_samples / 8), std::to_string(r.consumed_samples / 4), num(r.val_loss),
                         num(r.val_acc), num(r.sec_per_epoch), std::to_string(r.seed_acc.size())});
  run_stage("io", [&] {
    io::write_text(out / "summary.csv", summary);
    io::write_text(out / "runs.csv", runs);
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Grid trade

/// Config key an axis name patches; names starting with '/' are used as JSON
/// pointers directly.
inline Json::json_pointer axis_pointer(const std::string& name) {
  static const std::map<std::string, std::string> known{
      {"representation", "/slice/representation"}, {"window_len", "/slice/window_len"},
      {"stride", "/slice/stride"},                 {"n_steps", "/slice/n_steps"},
      {"offset_modulo", "/slice/offset_modulo"},   {"variant", "/variant"},
      {"channel", "/variant"},                     {"hidden", "/model/hidden"},
      {"dropout", "/model/dropout"},               {"lr", "/train/lr"},
      {"epochs", "/train/epochs"},                 {"seed", "/seed"},
      {"examples_per_class", "/examples_per_class"}};
  if (!name.empty() && name.front() == '/') return Json::json_pointer(name);
  auto it = known.find(name);
  require(it != known.end(), Errc::InvalidArgument, "unknown grid axis '" + name + "'");
  return Json::json_pointer(it->second);
}

inline std::string cell_value(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

struct GridCell {
  std::vector<Json> values;
  Json config;
  std::string hash;
  bool reused = false;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double sec_per_epoch = 0.0;
};

inline std::vector<GridCell> grid_cells(const ExperimentConfig& cfg) {
  return run_stage("config", [&] {
    require(!cfg.axes.empty(), Errc::InvalidArgument, "grid has no axes");
    Json base = cfg.raw;
    base.erase("grid");
    base["seed"] = cfg.seed;
    std::vector<GridCell> cells(1);
    for (const auto& ax : cfg.axes) {
      axis_pointer(ax.name);
      std::vector<GridCell> next;
      for (const auto& c : cells)
        for (const auto& v : ax.values) {
          GridCell g = c;
          g.values.push_back(v);
          next.push_back(std::move(g));
        }
      cells = std::move(next);
    }
    for (auto& c : cells) {
      c.config = base;
      for (std::size_t a = 0; a < cfg.axes.size(); ++a) c.config[axis_pointer(cfg.axes[a].name)] = c.values[a];
      c.hash = io::hex64(io::fnv1a(c.config.dump()));
    }
    return cells;
  });
}

/// Runs every cell not already present under <out>/cells/<hash>. A cell is
/// built in a private temp directory and renamed into place when complete.
inline std::vector<GridCell> cmd_trade_grid(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
  auto cells = grid_cells(cfg);
  std::string shape;
  for (const auto& ax : cfg.axes) shape += (shape.empty() ? "" : " x ") + ax.name + "[" + std::to_string(ax.values.size()) + "]";
  note(log, "grid: " + std::to_string(cells.size()) + " cells (" + shape + ")");
  run_stage("io", [&] {
    fs::create_directories(out / "cells");
    write_json_file(out / "resolved_config.json", cfg.raw);
  });

  RecordingCache cache;
  std::vector<std::string> header;
  for (const auto& ax : cfg.axes) header.push_back(ax.name);
  for (const char* h : {"cell", "val_loss", "val_acc", "sec_per_epoch", "curve"}) header.emplace_back(h);

  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& cell = cells[i];
    const fs::path final_dir = out / "cells" / cell.hash;
    if (fs::exists(final_dir / "result.json")) {
      const Json res = read_json_file(final_dir / "result.json");
      cell.val_loss = res.at("val_loss").get<double>();
      cell.val_acc = res.at("val_acc").get<double>();
      cell.sec_per_epoch = res.at("sec_per_epoch").get<double>();
      cell.reused = true;
      note(log, "cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()) + " " + cell.hash + " already done");
      continue;
    }
    note(log, "cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()) + " " + cell.hash);
    const auto cc = parse_experiment(cell.config);
    const auto set = cache.get(cc, cc.variant);
    const auto r = run_classifier(*set, cc, log, "  ");
    const fs::path tmp = out / "cells" / ("." + cell.hash + ".tmp");
    run_stage("io", [&] {
      fs::remove_all(tmp);
      fs::create_directories(tmp);
      write_json_file(tmp / "config.json", cell.config);
      io::write_text(tmp / "metrics.csv", metrics_csv(r.result->history));
      write_json_file(tmp / "confusion.json", Json(r.confusion));
      Json res = run_summary(r);
      Json axes = Json::object();
      for (std::size_t a = 0; a < cfg.axes.size(); ++a) axes[cfg.axes[a].name] = cell.values[a];
      res["axes"] = axes;
      write_json_file(tmp / "result.json", res);
      fs::remove_all(final_dir);
      fs::rename(tmp, final_dir);
    });
    cell.val_loss = r.val_loss();
    cell.val_acc = r.val_acc();
    cell.sec_per_epoch = r.sec_per_epoch;
  }

  std::string table = csv_line(header);
  for (const auto& c : cells) {
    std::vector<std::string> row;
    for (const auto& v : c.values) row.push_back(cell_value(v));
    for (auto s : {c.hash, num(c.val_loss), num(c.val_acc), num(c.sec_per_epoch), "cells/" + c.hash + "/metrics.csv"})
      row.push_back(s);
    table += csv_line(row);
  }
  run_stage("io", [&] { io::write_text(out / "results.csv", table); });
  return cells;
}

// ---------------------------------------------------------------------------
// Generator

inline nn::ModelConfig generator_arch(const Json& overrides, std::size_t input_dim) {
  auto m = nn::ModelConfig::generator(input_dim);
  from_json(overrides, m);
  m.input_dim = input_dim;
  m.output_dim = input_dim;
  m.head = nn::Head::Linear;
  m.validate();
  return m;
}

inline const Recording& find_recording(const RecordingSet& set, const std::string& name) {
  require(!set.recordings.empty(), Errc::InvalidArgument, "dataset has no recordings");
  if (name.empty()) return set.recordings.front();
  for (const auto& r : set.recordings)
    if (r.class_name == name) return r;
  fail(Errc::InvalidArgument, "class '" + name + "' not in dataset");
}

struct GeneratorRun {
  std::string class_name;
  SliceSpec slice;
  nn::ModelConfig arch;
  nn::TrainConfig hyper;
  std::optional<nn::TrainResult<float>> result;
  double val_loss = 0.0;
};

inline Json generator_meta(const GeneratorRun& g, const ExperimentConfig& cfg) {
  Json meta = {{"task", "generator"}, {"class", g.class_name}, {"slice", g.slice}, {"variant", cfg.variant}, {"seed", cfg.seed}};
  if (!cfg.dataset.empty()) meta["dataset"] = cfg.dataset;
  if (cfg.generate) meta["generate"] = *cfg.generate;
  return meta;
}

inline GeneratorRun cmd_train_generator(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
  RecordingCache cache;
  const auto set = cache.get(cfg, cfg.variant);
  GeneratorRun g;
  const auto& rec = run_stage("config", [&]() -> const Recording& { return find_recording(*set, cfg.target_class); });
  g.class_name = rec.class_name;
  g.slice = run_stage("config", [&] { return resolve_slice(*set, cfg.slice); });
  const auto part = run_stage("config", [&] { return resolve_partition(*set, cfg.partition); });
  const auto sets = run_stage("dataset", [&] {
    return build_generative_dataset(rec.signal.samples, g.slice, part, cfg.examples, detail::mix_seed(cfg.seed, 21));
  });
  g.arch = run_stage("config", [&] { return generator_arch(cfg.model, g.slice.step_dim()); });
  g.hyper = cfg.train;
  g.hyper.seed = detail::mix_seed(cfg.seed, 22);
  g.hyper.on_epoch = [&](const nn::EpochMetrics& m) {
    note(log, "epoch " + std::to_string(m.epoch) + " train_loss " + num(m.train_loss) + " val_loss " + num(m.val_loss));
  };
  g.result = run_stage("neural", [&] { return nn::train<float>(sets.train, sets.test, g.arch, g.hyper); });
  g.hyper.on_epoch = nullptr;
  g.val_loss = run_stage("neural", [&] { return nn::evaluate(g.result->model, sets.test).loss; });

  // MSE runs carry no accuracy; the column is written as 0.
  auto history = g.result->history;
  for (auto& m : history) m.val_acc = 0.0;
  run_stage("io", [&] {
    fs::create_directories(out);
    Json resolved = cfg.raw;
    resolved["seed"] = cfg.seed;
    resolved["resolved"] = {{"class", g.class_name}, {"slice", g.slice}, {"partition", part}, {"arch", g.arch}, {"train", g.hyper}};
    write_json_file(out / "resolved_config.json", resolved);
    io::write_text(out / "metrics.csv", metrics_csv(history));
    write_json_file(out / "summary.json", {{"val_loss", g.val_loss},
                                           {"best_epoch", g.result->best_epoch},
                                           {"epochs_run", g.result->history.size()},
                                           {"n_train", sets.train.size()},
                                           {"n_test", sets.test.size()},
                                           {"params", nn::param_count(g.arch)}});
    nn::save_checkpoint(out / "model.ckpt", nn::ModelCheckpoint::from(*g.result, g.hyper, generator_meta(g, cfg)));
  });
  note(log, "val_loss " + num(g.val_loss));
  return g;
}

// ---------------------------------------------------------------------------
// Continuation

struct ContinueReport {
  std::size_t seed_windows = 0;
  std::size_t generated_windows = 0;
  std::size_t csv_rows = 0;
  std::vector<Complex> samples;    // seed then generated, stitched at the stride
  std::vector<Complex> generated;  // generated part only
};

/// Loads a generator checkpoint, seeds it with N true windows starting at
/// `start` and free-runs `steps` windows. Writes continuation.cf32 and a CSV
/// of (true, predicted) values per window sample.
inline ContinueReport cmd_continue(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
  const auto ckpt = run_stage("io", [&] {
    require(!cfg.checkpoint.empty(), Errc::InvalidArgument, "continue needs \"checkpoint\"");
    return nn::load_checkpoint(cfg.checkpoint);
  });
  const Json& meta = ckpt.meta;
  run_stage("config", [&] {
    require(meta.value("task", "") == "generator", Errc::SchemaMismatch, "checkpoint is not a generator");
  });
  ExperimentConfig src = cfg;
  if (src.dataset.empty() && !src.generate) {
    if (meta.contains("dataset")) src.dataset = meta.at("dataset").get<std::string>();
    else if (meta.contains("generate")) src.generate = meta.at("generate").get<GenerateConfig>();
    if (!cfg.raw.contains("variant")) src.variant = meta.value("variant", "clean");
  }
  RecordingCache cache;
  const auto set = cache.get(src, src.variant);
  const std::string cls = cfg.target_class.empty() ? meta.value("class", "") : cfg.target_class;
  const auto& rec = run_stage("config", [&]() -> const Recording& { return find_recording(*set, cls); });
  const auto slice = run_stage("config", [&] { return meta.at("slice").get<SliceSpec>(); });
  const auto model = run_stage("neural", [&] { return ckpt.model(); });

  const auto& sig = rec.signal.samples;
  const auto seed = run_stage("dataset", [&] { return slice_example(sig, cfg.start, slice); });
  const auto gen = run_stage("neural", [&] { return nn::free_run_generate(seed, cfg.steps, model); });

  ContinueReport rep;
  rep.seed_windows = slice.n_steps;
  rep.generated_windows = gen.size();
  std::vector<std::vector<float>> all;
  for (std::size_t n = 0; n < slice.n_steps; ++n) {
    const auto s = seed.step(n);
    all.emplace_back(s.begin(), s.end());
  }
  all.insert(all.end(), gen.begin(), gen.end());
  rep.samples = nn::windows_to_samples(all, slice.window_len, slice.stride, slice.representation);
  if (!gen.empty()) rep.generated = nn::windows_to_samples(gen, slice.window_len, slice.stride, slice.representation);

  std::string csv = csv_line({"window", "role", "k", "sample_index", "true_re", "true_im", "pred_re", "pred_im"});
  for (std::size_t w = 0; w < all.size(); ++w) {
    const bool generated = w >= slice.n_steps;
    const auto pred = from_representation(all[w], slice.window_len, slice.representation);
    const std::size_t pos = cfg.start + w * slice.stride;
    // Truth goes through the same representation the model saw.
    std::vector<Complex> truth;
    if (pos + slice.window_len <= sig.size())
      truth = from_representation(to_representation(std::span(sig).subspan(pos, slice.window_len), slice.representation),
                                  slice.window_len, slice.representation);
    for (std::size_t k = 0; k < slice.window_len; ++k) {
      std::string tr, ti, pr, pi;
      if (!truth.empty()) {
        tr = num(truth[k].real());
        ti = num(truth[k].imag());
      }
      if (generated) {
        pr = num(pred[k].real());
        pi = num(pred[k].imag());
      }
      csv += csv_line({std::to_string(w), generated ? "generated" : "seed", std::to_string(k), std::to_string(pos + k), tr, ti, pr, pi});
      ++rep.csv_rows;
    }
  }
  run_stage("io", [&] {
    fs::create_directories(out);
    Json resolved = cfg.raw;
    resolved["resolved"] = {{"class", rec.class_name}, {"slice", slice}, {"variant", src.variant}, {"start", cfg.start}, {"steps", cfg.steps}};
    write_json_file(out / "resolved_config.json", resolved);
    write_iq(out / "continuation.cf32", rep.samples);
    io::write_text(out / "continuation.csv", csv);
  });
  note(log, std::to_string(rep.seed_windows) + " seed + " + std::to_string(rep.generated_windows) + " generated windows, " +
                std::to_string(rep.csv_rows) + " csv rows");
  return rep;
}

}  // namespace rfseq::harness
