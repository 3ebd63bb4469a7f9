#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rfseq/error.hpp"
#include "rfseq/neural/model.hpp"

namespace rfseq::nn {

inline constexpr double kProbClamp = 1e-7;

/// -sum(y * log(max(p, eps))) for one probability vector.
inline double loss_crossentropy(std::span<const double> probs, std::span<const double> one_hot) {
  require(probs.size() == one_hot.size(), Errc::ShapeMismatch, "probs/one_hot length mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k)
    if (one_hot[k] != 0.0) loss -= one_hot[k] * std::log(std::max(probs[k], kProbClamp));
  return loss;
}

inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
  require(pred.size() == target.size() && !pred.empty(), Errc::ShapeMismatch, "pred/target length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) acc += (pred[k] - target[k]) * (pred[k] - target[k]);
  return acc / static_cast<double>(pred.size());
}

/// Column-wise softmax, max-shifted.
template <typename S>
Mat<S> softmax(const Mat<S>& logits) {
  Mat<S> p = logits;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    p.col(j).array() -= p.col(j).maxCoeff();
    p.col(j) = p.col(j).array().exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

template <typename S>
struct LossResult {
  double loss = 0.0;
  Mat<S> d_output;
  std::size_t correct = 0;  // classification only
};

/// Mean softmax cross-entropy over the batch, computed through log-sum-exp.
template <typename S>
LossResult<S> softmax_cross_entropy(const Mat<S>& logits, std::span<const int> labels) {
  require(static_cast<std::size_t>(logits.cols()) == labels.size(), Errc::ShapeMismatch, "label count != batch size");
  LossResult<S> r;
  r.d_output = softmax(logits);
  const auto B = static_cast<double>(labels.size());
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    require(y >= 0 && y < logits.rows(), Errc::ShapeMismatch, "label outside [0, K)");
    const double mx = static_cast<double>(logits.col(j).maxCoeff());
    double lse = 0.0;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) lse += std::exp(static_cast<double>(logits(k, j)) - mx);
    total += mx + std::log(lse) - static_cast<double>(logits(y, j));
    Eigen::Index arg;
    logits.col(j).maxCoeff(&arg);
    if (arg == y) ++r.correct;
    r.d_output(y, j) -= S(1);
  }
  r.d_output /= static_cast<S>(B);
  r.loss = total / B;
  return r;
}

/// Mean squared error over every output element of the batch.
template <typename S>
LossResult<S> mean_squared_error(const Mat<S>& pred, const Mat<S>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), Errc::ShapeMismatch, "pred/target shape mismatch");
  LossResult<S> r;
  const Mat<S> diff = pred - target;
  const auto n = static_cast<double>(diff.size());
  r.loss = static_cast<double>(diff.template cast<double>().squaredNorm()) / n;
  r.d_output = diff * static_cast<S>(2.0 / n);
  return r;
}

}  // namespace rfseq::nn
