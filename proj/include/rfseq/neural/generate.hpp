#pragma once

#include <deque>
#include <vector>

#include "rfseq/dataset.hpp"
#include "rfseq/modem.hpp"
#include "rfseq/neural/model.hpp"

namespace rfseq::nn {

/// Autoregressive continuation: predicts the window after the seed stack,
/// appends it, drops the oldest window and repeats. Returns `steps` windows,
/// each flattened to channels * window_len values.
template <typename S>
std::vector<std::vector<float>> free_run_generate(const ExampleTensor& seed, std::size_t steps, const SequenceModel<S>& model) {
  const std::size_t d = seed.channels * seed.window_len;
  require(seed.n_steps >= 1 && seed.values.size() == seed.n_steps * d, Errc::ShapeMismatch, "seed tensor malformed");
  require(model.config().input_dim == d && model.config().output_dim == d, Errc::ShapeMismatch,
          "generator output width must equal one window");
  std::vector<std::vector<float>> out;
  out.reserve(steps);
  std::deque<std::vector<float>> stack;
  for (std::size_t t = 0; t < seed.n_steps; ++t)
    stack.emplace_back(seed.values.begin() + static_cast<std::ptrdiff_t>(t * d), seed.values.begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
  const auto n = static_cast<Eigen::Index>(seed.n_steps);
  Mat<S> x(static_cast<Eigen::Index>(d), n);
  for (std::size_t k = 0; k < steps; ++k) {
    for (Eigen::Index t = 0; t < n; ++t)
      for (std::size_t i = 0; i < d; ++i) x(static_cast<Eigen::Index>(i), t) = static_cast<S>(stack[static_cast<std::size_t>(t)][i]);
    const Mat<S> y = model.predict_raw(x, seed.n_steps);
    std::vector<float> w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = static_cast<float>(y(static_cast<Eigen::Index>(i), 0));
    stack.pop_front();
    stack.push_back(w);
    out.push_back(std::move(w));
  }
  return out;
}

/// Stitches consecutive windows taken `stride` samples apart back into one
/// sample stream: the first `stride` samples of every window, then the tail of
/// the last window.
inline std::vector<Complex> windows_to_samples(const std::vector<std::vector<float>>& windows, std::size_t window_len,
                                               std::size_t stride, Representation rep) {
  std::vector<Complex> out;
  if (windows.empty()) return out;
  const std::size_t keep = std::min(stride, window_len);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto s = from_representation(windows[k], window_len, rep);
    const std::size_t take = k + 1 == windows.size() ? window_len : keep;
    out.insert(out.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

/// Normalized autocorrelation of the real part after mean removal, lags
/// 0..max_lag.
inline std::vector<double> autocorrelation(std::span<const Complex> x, std::size_t max_lag) {
  std::vector<double> r(max_lag + 1, 0.0);
  if (x.empty()) return r;
  double mean = 0.0;
  for (const auto& v : x) mean += v.real();
  mean /= static_cast<double>(x.size());
  for (std::size_t lag = 0; lag <= max_lag && lag < x.size(); ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) acc += (x[i].real() - mean) * (x[i + lag].real() - mean);
    r[lag] = acc / static_cast<double>(x.size());
  }
  if (r[0] > 0.0)
    for (auto& v : r) v /= r[0];
  return r;
}

/// Lag in [min_lag, max_lag] with the largest autocorrelation.
inline std::size_t dominant_period(std::span<const Complex> x, std::size_t min_lag, std::size_t max_lag) {
  const auto r = autocorrelation(x, max_lag);
  std::size_t best = min_lag;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag)
    if (r[lag] > r[best]) best = lag;
  return best;
}

}  // namespace rfseq::nn
