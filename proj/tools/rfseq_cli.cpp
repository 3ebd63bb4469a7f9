// rfseq command-line front end. Every subcommand takes one JSON config file
// plus optional --seed / --out overrides.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "rfseq/harness.hpp"

namespace {

using rfseq::Json;
namespace h = rfseq::harness;

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool quiet = false;
  CLI::Option* seed_opt = nullptr;
};

Json load_config(const Options& o, std::string& out) {
  Json j = h::read_json_file(o.config);
  h::run_stage("config", [&] {
    rfseq::require(j.is_object(), rfseq::Errc::SchemaMismatch, "config must be a JSON object");
    if (o.seed_opt && *o.seed_opt) j["seed"] = o.seed;
    out = o.out;
    if (out.empty() && j.contains("out")) out = j.at("out").get<std::string>();
    rfseq::require(!out.empty(), rfseq::Errc::InvalidArgument, "no output directory (--out or \"out\" in config)");
    j.erase("out");
  });
  return j;
}

int run(const std::string& cmd, const Options& o) {
  std::ostream* log = o.quiet ? nullptr : &std::cout;
  std::string out;
  const Json j = load_config(o, out);
  if (cmd == "generate") {
    const auto cfg = h::run_stage("config", [&] { return j.get<h::GenerateConfig>(); });
    const auto rep = h::cmd_generate(cfg, out, log);
    h::note(log, "wrote " + std::to_string(rep.variants.size()) + " variants x " + std::to_string(rep.classes.size()) +
                     " classes to " + out);
    return 0;
  }
  const auto cfg = h::parse_experiment(j);
  if (cmd == "train-classifier") h::cmd_train_classifier(cfg, out, log);
  else if (cmd == "trade-seqlen") h::cmd_trade_seqlen(cfg, out, log);
  else if (cmd == "trade-grid") h::cmd_trade_grid(cfg, out, log);
  else if (cmd == "train-generator") h::cmd_train_generator(cfg, out, log);
  else if (cmd == "continue") h::cmd_continue(cfg, out, log);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic traffic to IQ datasets, LSTM classification and generation experiments"};
  app.require_subcommand(1, 1);
  Options o;
  const std::pair<const char*, const char*> commands[] = {
      {"generate", "trace -> framing -> modem -> channel datasets on disk"},
      {"train-classifier", "train one classifier; metrics, confusion matrix, checkpoint"},
      {"trade-seqlen", "classifier accuracy against sequence length N"},
      {"trade-grid", "resumable cartesian grid over config axes"},
      {"train-generator", "train a next-window generator"},
      {"continue", "free-run a generator checkpoint from a seed signal"},
  };
  for (const auto& [name, help] : commands) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("-c,--config", o.config, "JSON config file")->required()->check(CLI::ExistingFile);
    auto* seed = sc->add_option("--seed", o.seed, "override the config seed");
    sc->add_option("-o,--out", o.out, "output directory (overrides \"out\" in the config)");
    sc->add_flag("-q,--quiet", o.quiet, "no progress output");
    sc->callback([&o, seed] { o.seed_opt = seed; });
  }
  CLI11_PARSE(app, argc, argv);

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, o);
  } catch (const h::StageError& e) {
    std::cerr << "rfseq " << cmd << ": error in stage '" << e.stage() << "': " << e.detail() << "\n";
    return 2;
  } catch (const rfseq::Error& e) {
    std::cerr << "rfseq " << cmd << ": error in stage 'harness': " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rfseq " << cmd << ": error in stage 'internal': " << e.what() << "\n";
    return 3;
  }
}
