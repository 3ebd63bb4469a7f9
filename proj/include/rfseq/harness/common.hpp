#pragma once

// Pieces shared by every harness command: stage-attributed errors, JSON/CSV
// file helpers and the confusion matrix.

#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <ostream>
#include <string>
#include <vector>

#include "rfseq/error.hpp"
#include "rfseq/io.hpp"
#include "rfseq/json.hpp"

namespace rfseq::harness {

/// A library failure tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, Errc code, const std::string& detail)
      : std::runtime_error(stage + ": " + detail), stage_(std::move(stage)), detail_(detail), code_(code) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }
  Errc code() const noexcept { return code_; }

 private:
  std::string stage_;
  std::string detail_;
  Errc code_;
};

template <typename F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.code(), e.what());
  } catch (const Json::exception& e) {
    throw StageError(name, Errc::SchemaMismatch, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(name, Errc::Io, e.what());
  }
}

inline Json read_json_file(const std::filesystem::path& path) {
  return run_stage("config", [&] {
    const std::string text = io::read_text(path);
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      fail(Errc::SchemaMismatch, path.string() + ": " + e.what());
    }
  });
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

/// Shortest round-trip-safe decimal for CSV cells.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + "\n";
}

inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h{"epoch", "train_loss", "val_loss", "val_acc", "seconds"};
  return h;
}

template <typename Metrics>
std::string metrics_csv(const std::vector<Metrics>& history) {
  std::string s = csv_line(metrics_header());
  for (const auto& m : history)
    s += csv_line({std::to_string(m.epoch), num(m.train_loss), num(m.val_loss), num(m.val_acc), num(m.seconds)});
  return s;
}

/// K x K counts, row = true class, column = predicted class.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::vector<std::string> names = {})
      : classes(std::move(names)), counts(classes.size(), std::vector<std::size_t>(classes.size(), 0)) {}

  void add(int truth, int predicted) {
    require(truth >= 0 && predicted >= 0 && std::size_t(truth) < classes.size() && std::size_t(predicted) < classes.size(),
            Errc::InvalidArgument, "confusion index out of range");
    ++counts[std::size_t(truth)][std::size_t(predicted)];
  }
  std::size_t row_sum(std::size_t k) const {
    std::size_t s = 0;
    for (auto v : counts[k]) s += v;
    return s;
  }
  std::size_t total() const {
    std::size_t s = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) s += row_sum(k);
    return s;
  }
  std::size_t trace() const {
    std::size_t s = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) s += counts[k][k];
    return s;
  }
  double accuracy() const { return total() ? double(trace()) / double(total()) : 0.0; }
};

inline void to_json(Json& j, const ConfusionMatrix& m) {
  j = {{"classes", m.classes}, {"counts", m.counts}, {"rows", "true"}, {"cols", "predicted"},
       {"total", m.total()},   {"correct", m.trace()}, {"accuracy", m.accuracy()}};
}

inline void from_json(const Json& j, ConfusionMatrix& m) {
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.counts = j.at("counts").get<std::vector<std::vector<std::size_t>>>();
}

inline void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << std::endl;
}

}  // namespace rfseq::harness
