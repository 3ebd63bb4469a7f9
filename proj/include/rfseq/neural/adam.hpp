#pragma once

#include <cmath>
#include <cstdint>

#include "rfseq/neural/model.hpp"

namespace rfseq::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamState {
  Vec<S> m;
  Vec<S> v;
  std::int64_t step = 0;

  static AdamState zeros(Eigen::Index n) { return {Vec<S>::Zero(n), Vec<S>::Zero(n), 0}; }
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename S>
void adam_step(Vec<S>& params, const Vec<S>& grads, AdamState<S>& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size()) state = AdamState<S>::zeros(params.size());
  ++state.step;
  const auto b1 = static_cast<S>(cfg.beta1);
  const auto b2 = static_cast<S>(cfg.beta2);
  state.m = b1 * state.m + (S(1) - b1) * grads;
  state.v = b2 * state.v + (S(1) - b2) * grads.cwiseProduct(grads);
  const auto c1 = static_cast<S>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const auto c2 = static_cast<S>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const auto lr = static_cast<S>(cfg.lr);
  const auto eps = static_cast<S>(cfg.eps);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

}  // namespace rfseq::nn
