#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "rfseq/harness.hpp"

using namespace rfseq;
using namespace rfseq::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rfseq_h_" + name);
  fs::remove_all(p);
  return p;
}

// Two desk classes, short enough that the whole chain runs in well under a
// second; small partition blocks keep the hard-partition logic exercised.
Json tiny_generate() {
  return {{"seed", 3},
          {"duration_s", 0.3},
          {"profiles", {"ping_like", "download_like"}},
          {"variants", {{"clean", "clean"}, {"channel", "channel"}}},
          {"slice", {{"n_steps", 8}, {"window_len", 16}, {"stride", 16}}},
          {"partition", {{"block_len", 20000}}}};
}

Json tiny_experiment(const Json& source) {
  Json j = {{"seed", 5},
            {"examples_per_class", 40},
            {"model", {{"hidden", 8}, {"dense_hidden", 8}, {"dropout", 0.2}}},
            {"train", {{"epochs", 2}, {"batch_size", 16}}}};
  j.update(source);
  return j;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

// Every file under `dir`, relative path -> contents.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

// Blanks wall-clock fields: "seconds" and "sec_per_epoch" CSV columns and JSON keys.
std::string strip_timing(const std::string& name, const std::string& text) {
  if (name.ends_with(".json")) {
    Json j = Json::parse(text);
    std::function<void(Json&)> walk = [&](Json& v) {
      if (v.is_object()) {
        for (auto it = v.begin(); it != v.end(); ++it) {
          if (it.key() == "seconds" || it.key() == "sec_per_epoch") it.value() = nullptr;
          else walk(it.value());
        }
      } else if (v.is_array()) {
        for (auto& x : v) walk(x);
      }
    };
    walk(j);
    return j.dump();
  }
  if (!name.ends_with(".csv")) return text;
  std::istringstream in(text);
  std::string line, out;
  std::vector<bool> drop;
  bool header = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (header) {
      for (const auto& c : cells) drop.push_back(c == "seconds" || c == "sec_per_epoch");
      header = false;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i < drop.size() && drop[i] ? "" : cells[i]) + ",";
    out += "\n";
  }
  return out;
}

int run_cli(const std::string& args, std::string* err = nullptr) {
  static int calls = 0;
  const auto errfile =
      fs::temp_directory_path() / ("rfseq_h_cli_stderr_" + std::to_string(::getpid()) + "_" + std::to_string(calls++) + ".txt");
  const std::string cmd = std::string(RFSEQ_CLI) + " " + args + " > /dev/null 2> " + errfile.string();
  const int status = std::system(cmd.c_str());
  if (err) *err = slurp(errfile);
  fs::remove(errfile);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_config(const fs::path& p, const Json& j) { io::write_text(p, j.dump(2)); }

}  // namespace

TEST(Confusion, RowSumsTraceAndJson) {
  ConfusionMatrix m({"a", "b", "c"});
  const std::pair<int, int> obs[] = {{0, 0}, {0, 1}, {1, 1}, {2, 2}, {2, 0}, {2, 2}};
  for (auto [t, p] : obs) m.add(t, p);
  EXPECT_EQ(m.row_sum(0), 2u);
  EXPECT_EQ(m.row_sum(1), 1u);
  EXPECT_EQ(m.row_sum(2), 3u);
  EXPECT_EQ(m.total(), 6u);
  EXPECT_DOUBLE_EQ(m.accuracy(), 4.0 / 6.0);
  const Json j = m;
  EXPECT_EQ(j.at("counts")[2][0], 1);
  const auto back = j.get<ConfusionMatrix>();
  EXPECT_EQ(back.counts, m.counts);
  EXPECT_THROW(m.add(3, 0), Error);
}

TEST(GenerateConfig, JsonRoundTripAndProfileForms) {
  const auto c = tiny_generate().get<GenerateConfig>();
  ASSERT_EQ(c.profiles.size(), 2u);
  EXPECT_EQ(c.profiles[1].name, "download_like");
  ASSERT_EQ(c.variants.size(), 2u);
  EXPECT_EQ(c.variants[0].name, "channel");
  EXPECT_FALSE(c.variants[0].channel.is_clean());
  EXPECT_TRUE(c.variants[1].channel.is_clean());
  const Json again = Json(c);
  EXPECT_EQ(Json(again.get<GenerateConfig>()), again);

  EXPECT_EQ(Json({{"profiles", "catalog"}}).get<GenerateConfig>().profiles.size(), 15u);
  const Json custom = {{"profiles", {{{"name", "x"}, {"sizes", {{"kind", "fixed"}, {"bytes", 10}}},
                                      {"arrivals", {{"kind", "periodic"}, {"interval_s", 0.01}}}}}}};
  EXPECT_EQ(custom.get<GenerateConfig>().profiles[0].name, "x");
  EXPECT_THROW(Json({{"profiles", "nope"}}).get<GenerateConfig>(), Error);
}

// Sample count per class from bit arithmetic: body bits plus one preamble per
// started period, two bits per symbol, sps samples per symbol, plus the
// filter tail, minus the channel interpolator's trim.
TEST(Generate, SampleCountMatchesBitArithmetic) {
  const auto cfg = tiny_generate().get<GenerateConfig>();
  const auto sets = generate_recordings(cfg);
  const std::size_t body = std::size_t(cfg.duration_s * double(cfg.framer.bit_rate));
  const std::size_t periods = (body + cfg.framer.preamble_period_bits - 1) / cfg.framer.preamble_period_bits;
  const std::size_t bits = body + periods * cfg.framer.preamble_pattern.size();
  const std::size_t sps = std::size_t(cfg.modem.samples_per_symbol);
  const std::size_t expect = (bits + 1) / 2 * sps + std::size_t(cfg.modem.rrc_span_symbols) * sps - kInterpTaps;
  for (const auto& r : sets.at("clean").recordings) EXPECT_EQ(r.signal.size(), expect) << r.class_name;
  EXPECT_DOUBLE_EQ(sets.at("clean").recordings[0].signal.sample_rate, 1e6);
}

TEST(Generate, VariantsShareSymbols) {
  auto cfg = tiny_generate().get<GenerateConfig>();
  cfg.variants = {{"a", ChannelConfig::clean()}, {"b", ChannelConfig::clean()}, {"noisy", ChannelConfig{}}};
  const auto sets = generate_recordings(cfg);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(sets.at("a").recordings[c].signal.samples, sets.at("b").recordings[c].signal.samples);
    EXPECT_NE(sets.at("a").recordings[c].signal.samples, sets.at("noisy").recordings[c].signal.samples);
  }
  // The clean variant is the baseband itself, up to the interpolator trim.
  const auto base = synthesize_class(cfg, 0);
  const auto& clean = sets.at("a").recordings[0].signal.samples;
  for (std::size_t n = 0; n < clean.size(); n += 997) {
    const Complex ref = base.baseband.samples[n + kInterpLead];
    EXPECT_NEAR(clean[n].real(), ref.real(), 1e-6);
    EXPECT_NEAR(clean[n].imag(), ref.imag(), 1e-6);
  }
}

TEST(Generate, RerunIsByteIdentical) {
  const auto cfg = tiny_generate().get<GenerateConfig>();
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  const auto rep = cmd_generate(cfg, a);
  cmd_generate(cfg, b);
  EXPECT_EQ(rep.variants, (std::vector<std::string>{"channel", "clean"}));
  const auto ta = tree(a), tb = tree(b);
  EXPECT_EQ(ta, tb);
  for (const char* f : {"resolved_config.json", "clean/manifest.json", "channel/manifest.json", "traces/ping_like.pcap",
                        "bits/download_like.bits", "bits/index.json", "channel/channel_draws.jsonl"})
    EXPECT_TRUE(ta.count(f)) << f;
  // Files read back through the library agree with the in-memory run.
  const auto mem = generate_recordings(cfg);
  const auto disk = read_dataset(a / "channel");
  EXPECT_EQ(disk.recordings[1].signal.samples, mem.at("channel").recordings[1].signal.samples);
  const auto trace = pcap::read(a / "traces" / "ping_like.pcap");
  EXPECT_EQ(trace.records.size(), synthesize_class(cfg, 0).trace.records.size());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Generate, ErrorsCarryTheirStage) {
  auto j = tiny_generate();
  j["profiles"] = {{{"name", "flood"}, {"sizes", {{"kind", "fixed"}, {"bytes", 1500}}},
                    {"arrivals", {{"kind", "periodic"}, {"interval_s", 0.001}}}}};
  j["framer"] = {{"bit_rate", 100000}};
  try {
    generate_recordings(j.get<GenerateConfig>());
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "framing");
    EXPECT_EQ(e.code(), Errc::Overrun);
  }
  j["profiles"][0]["duty_cycle"] = 0.0;
  try {
    generate_recordings(j.get<GenerateConfig>());
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "trace");
    EXPECT_EQ(e.code(), Errc::DegenerateProfile);
  }
}

TEST(Experiment, ParseRequiresSource) {
  try {
    parse_experiment(Json{{"seed", 1}});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  const auto c = parse_experiment(tiny_experiment({{"generate", tiny_generate()}, {"variant", "channel"}}));
  EXPECT_EQ(c.variant, "channel");
  EXPECT_EQ(c.train.epochs, 2u);
  EXPECT_TRUE(c.generate.has_value());
}

TEST(Experiment, InsufficientClasses) {
  auto cfg = parse_experiment(tiny_experiment({{"generate", tiny_generate()}, {"num_classes", 11}}));
  try {
    cmd_train_classifier(cfg, scratch("insufficient"));
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientClasses);
    EXPECT_NE(std::string(e.what()).find("11"), std::string::npos);
  }
}

TEST(Experiment, TrainClassifierOutputsAreConsistent) {
  const auto out = scratch("cls");
  const auto cfg = parse_experiment(tiny_experiment({{"generate", tiny_generate()}}));
  const auto run = cmd_train_classifier(cfg, out);

  for (const char* f : {"resolved_config.json", "metrics.csv", "confusion.json", "summary.json", "model.ckpt"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const Json conf = read_json_file(out / "confusion.json");
  const auto m = conf.get<ConfusionMatrix>();
  ASSERT_EQ(m.counts.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(m.row_sum(k), 20u);  // 40 per class, half held out
  const Json summary = read_json_file(out / "summary.json");
  EXPECT_NEAR(m.accuracy(), summary.at("val_acc").get<double>(), 1e-9);

  const std::string metrics = slurp(out / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "epoch,train_loss,val_loss,val_acc,seconds");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);

  // The saved checkpoint scores the rebuilt test split identically.
  RecordingCache cache;
  const auto ckpt = nn::load_checkpoint(out / "model.ckpt");
  EXPECT_EQ(ckpt.meta.at("classes"), Json(run.classes));
  const auto again = reevaluate_checkpoint(ckpt, *cache.get(cfg, cfg.variant), cfg);
  EXPECT_EQ(again.counts, m.counts);
  fs::remove_all(out);
}

TEST(Experiment, TradeSeqlenSortedWithSpanColumn) {
  const auto out = scratch("seqlen");
  auto j = tiny_experiment({{"generate", tiny_generate()}});
  j["seqlens"] = {12, 4, 8, 4};
  j["seeds"] = {1, 2};
  const auto rows = cmd_trade_seqlen(parse_experiment(j), out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].n_steps, 4u);
  EXPECT_EQ(rows[2].n_steps, 12u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.consumed_samples, 16 + (r.n_steps - 1) * 16);
    EXPECT_EQ(r.n_symbols, r.consumed_samples / 2);
    EXPECT_EQ(r.seed_acc.size(), 2u);
  }
  const std::string summary = slurp(out / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 4);
  EXPECT_NE(summary.find("\n8,16,16,128,64,128,16,32,"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "N12_seed2" / "metrics.csv"));
  fs::remove_all(out);
}

TEST(Experiment, GridRunsCartesianProductAndResumes) {
  const auto out = scratch("grid");
  auto j = tiny_experiment({{"generate", tiny_generate()}});
  j["grid"] = {{"axes", {{{"name", "representation"}, {"values", {"cartesian_iq", "polar_r_theta"}}},
                         {{"name", "variant"}, {"values", {"clean", "channel"}}}}}};
  const auto cfg = parse_experiment(j);
  std::ostringstream log;
  const auto first = cmd_trade_grid(cfg, out, &log);
  EXPECT_EQ(log.str().substr(0, log.str().find('\n')), "grid: 4 cells (representation[2] x variant[2])");
  ASSERT_EQ(first.size(), 4u);
  std::set<std::string> hashes;
  for (const auto& c : first) {
    EXPECT_FALSE(c.reused);
    hashes.insert(c.hash);
    EXPECT_TRUE(fs::exists(out / "cells" / c.hash / "metrics.csv"));
  }
  EXPECT_EQ(hashes.size(), 4u);
  const std::string table = slurp(out / "results.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  EXPECT_EQ(table.substr(0, table.find('\n')), "representation,variant,cell,val_loss,val_acc,sec_per_epoch,curve");

  std::map<std::string, fs::file_time_type> stamps;
  for (const auto& c : first) stamps[c.hash] = fs::last_write_time(out / "cells" / c.hash / "result.json");
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  fs::remove_all(out / "cells" / first[2].hash);
  const auto second = cmd_trade_grid(cfg, out);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(second[i].reused, i != 2) << i;
    if (i != 2) EXPECT_EQ(fs::last_write_time(out / "cells" / second[i].hash / "result.json"), stamps[second[i].hash]);
    EXPECT_EQ(second[i].val_acc, first[i].val_acc);
  }
  for (const auto& e : fs::directory_iterator(out / "cells")) EXPECT_NE(e.path().filename().string().front(), '.');
  fs::remove_all(out);
}

TEST(Experiment, GeneratorAndContinuationBookkeeping) {
  const auto out = scratch("gen");
  auto j = tiny_experiment({{"generate", tiny_generate()}, {"class", "ping_like"}, {"examples", 32}});
  j["slice"] = {{"n_steps", 4}, {"window_len", 8}, {"stride", 8}};
  const auto g = cmd_train_generator(parse_experiment(j), out / "model");
  EXPECT_EQ(g.arch.output_dim, 16u);
  const auto ckpt = nn::load_checkpoint(out / "model" / "model.ckpt");
  EXPECT_EQ(ckpt.meta.at("task"), "generator");

  for (std::size_t steps : {0u, 5u}) {
    Json c = {{"checkpoint", (out / "model" / "model.ckpt").string()}, {"start", 1000}, {"steps", steps}};
    const auto dir = out / ("cont" + std::to_string(steps));
    const auto rep = cmd_continue(parse_experiment(c), dir);
    EXPECT_EQ(rep.generated_windows, steps);
    EXPECT_EQ(rep.csv_rows, (4 + steps) * 8);
    const std::string csv = slurp(dir / "continuation.csv");
    EXPECT_EQ(std::size_t(std::count(csv.begin(), csv.end(), '\n')), rep.csv_rows + 1);
    EXPECT_EQ(read_iq(dir / "continuation.cf32").size(), 8 + (4 + steps - 1) * 8);
    if (steps == 0) {
      EXPECT_TRUE(rep.generated.empty());
      EXPECT_EQ(csv.find("generated"), std::string::npos);
    }
  }
  fs::remove_all(out);
}

TEST(Cli, GenerateIsReproducibleAndSeedOverrides) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  write_config(dir / "gen.json", tiny_generate());
  ASSERT_EQ(run_cli("generate -q -c " + (dir / "gen.json").string() + " -o " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("generate -q -c " + (dir / "gen.json").string() + " -o " + (dir / "b").string()), 0);
  ASSERT_EQ(run_cli("generate -q -c " + (dir / "gen.json").string() + " --seed 99 -o " + (dir / "c").string()), 0);
  EXPECT_EQ(tree(dir / "a"), tree(dir / "b"));
  EXPECT_NE(slurp(dir / "a" / "clean" / "ping_like.cf32"), slurp(dir / "c" / "clean" / "ping_like.cf32"));
  EXPECT_EQ(read_json_file(dir / "c" / "resolved_config.json").at("seed"), 99);
  fs::remove_all(dir);
}

TEST(Cli, TrainingCommandsReproducibleUpToTiming) {
  const auto dir = scratch("cli_train");
  fs::create_directories(dir);
  write_config(dir / "cls.json", tiny_experiment({{"generate", tiny_generate()}}));
  for (const char* run : {"a", "b"})
    ASSERT_EQ(run_cli("train-classifier -q -c " + (dir / "cls.json").string() + " -o " + (dir / run).string()), 0);
  const auto ta = tree(dir / "a"), tb = tree(dir / "b");
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [name, text] : ta) EXPECT_EQ(strip_timing(name, text), strip_timing(name, tb.at(name))) << name;
  EXPECT_EQ(ta.at("model.ckpt"), tb.at("model.ckpt"));
  fs::remove_all(dir);
}

TEST(Cli, ErrorsAreStageAttributedAndNonzero) {
  const auto dir = scratch("cli_err");
  fs::create_directories(dir);
  auto j = tiny_generate();
  j["profiles"] = {{{"name", "flood"}, {"sizes", {{"kind", "fixed"}, {"bytes", 1500}}},
                    {"arrivals", {{"kind", "periodic"}, {"interval_s", 0.001}}}}};
  j["framer"] = {{"bit_rate", 100000}};
  write_config(dir / "bad.json", j);
  std::string err;
  EXPECT_NE(run_cli("generate -c " + (dir / "bad.json").string() + " -o " + (dir / "x").string(), &err), 0);
  EXPECT_NE(err.find("stage 'framing'"), std::string::npos) << err;
  EXPECT_NE(err.find("Overrun"), std::string::npos) << err;

  io::write_text(dir / "broken.json", "{ not json");
  EXPECT_NE(run_cli("train-classifier -c " + (dir / "broken.json").string() + " -o " + (dir / "y").string(), &err), 0);
  EXPECT_NE(err.find("stage 'config'"), std::string::npos) << err;

  write_config(dir / "cls.json", tiny_experiment({{"generate", tiny_generate()}, {"num_classes", 11}}));
  EXPECT_NE(run_cli("train-classifier -c " + (dir / "cls.json").string() + " -o " + (dir / "z").string(), &err), 0);
  EXPECT_NE(err.find("InsufficientClasses"), std::string::npos) << err;

  EXPECT_NE(run_cli("generate -c " + (dir / "gen_missing.json").string() + " -o " + (dir / "w").string()), 0);
  fs::remove_all(dir);
}
