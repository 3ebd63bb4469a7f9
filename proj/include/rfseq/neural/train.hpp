#pragma once

// Mini-batch training loop shared by the classifier (softmax cross-entropy)
// and the generator (MSE). Deterministic for a fixed seed: one RNG drives
// initialization, epoch shuffles and dropout masks.

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "rfseq/dataset.hpp"
#include "rfseq/neural/adam.hpp"
#include "rfseq/neural/loss.hpp"
#include "rfseq/neural/model.hpp"

namespace rfseq::nn {

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;  // classification only
  double val_loss = 0.0;
  double val_acc = 0.0;    // classification only
  double seconds = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  AdamConfig adam;
  double clip_norm = 5.0;     // global gradient-norm clip; 0 disables
  std::size_t patience = 0;   // early stop after this many epochs without val-loss improvement; 0 disables
  bool restore_best = true;   // return the parameters of the best validation epoch
  bool eval_train = false;    // recompute train loss/accuracy in eval mode after each epoch
  std::uint64_t seed = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;  // argmax per example (classification)
};

template <typename S>
struct TrainResult {
  SequenceModel<S> model;
  AdamState<S> optimizer;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::string rng_state;
};

namespace detail {

inline std::vector<const ExampleTensor*> pointers(const std::vector<ExampleTensor>& v, std::span<const std::size_t> idx) {
  std::vector<const ExampleTensor*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&v[i]);
  return out;
}

template <typename S>
Mat<S> make_targets(std::span<const ExampleTensor* const> examples) {
  const std::size_t d = examples.front()->target.size();
  require(d > 0, Errc::ShapeMismatch, "generative example without target");
  Mat<S> y(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(examples.size()));
  for (std::size_t e = 0; e < examples.size(); ++e) {
    require(examples[e]->target.size() == d, Errc::ShapeMismatch, "target sizes differ within a batch");
    for (std::size_t k = 0; k < d; ++k) y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e)) = static_cast<S>(examples[e]->target[k]);
  }
  return y;
}

inline std::vector<int> labels_of(std::span<const ExampleTensor* const> examples) {
  std::vector<int> y;
  y.reserve(examples.size());
  for (auto* e : examples) y.push_back(e->label);
  return y;
}

/// Loss and gradient w.r.t. the model outputs for a batch.
template <typename S>
LossResult<S> batch_loss(const SequenceModel<S>& model, const Mat<S>& output, std::span<const ExampleTensor* const> batch) {
  if (model.config().head == Head::Softmax) return softmax_cross_entropy<S>(output, labels_of(batch));
  return mean_squared_error<S>(output, make_targets<S>(batch));
}

}  // namespace detail

template <typename S>
EvalResult evaluate(const SequenceModel<S>& model, const std::vector<ExampleTensor>& examples, std::size_t batch_size = 64) {
  EvalResult r;
  if (examples.empty()) return r;
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
    const std::size_t hi = std::min(idx.size(), lo + batch_size);
    const auto batch = detail::pointers(examples, std::span(idx).subspan(lo, hi - lo));
    const Mat<S> out = model.predict_raw(make_batch<S>(batch), batch.front()->n_steps);
    const auto lr = detail::batch_loss(model, out, batch);
    loss += lr.loss * static_cast<double>(batch.size());
    correct += lr.correct;
    if (model.config().head == Head::Softmax) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        Eigen::Index arg;
        out.col(j).maxCoeff(&arg);
        r.predictions.push_back(static_cast<int>(arg));
      }
    }
  }
  r.loss = loss / static_cast<double>(examples.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return r;
}

/// Trains `config` on `train_set`, validating on `val_set` after every epoch.
/// Throws Diverged when a batch loss or gradient becomes non-finite.
template <typename S = float>
TrainResult<S> train(const std::vector<ExampleTensor>& train_set, const std::vector<ExampleTensor>& val_set,
                     const ModelConfig& config, const TrainConfig& hyper) {
  require(!train_set.empty(), Errc::InvalidArgument, "empty training set");
  require(hyper.batch_size > 0, Errc::InvalidArgument, "batch_size must be > 0");
  std::mt19937_64 rng(hyper.seed);
  TrainResult<S> res{SequenceModel<S>(config), AdamState<S>::zeros(static_cast<Eigen::Index>(param_count(config))), {}, 0, false, {}};
  res.model.init(rng());

  Vec<S> best = res.model.params();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += hyper.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + hyper.batch_size);
      const auto batch = detail::pointers(train_set, std::span(order).subspan(lo, hi - lo));
      const auto cache = res.model.forward(make_batch<S>(batch), batch.front()->n_steps, &rng);
      const auto lr = detail::batch_loss(res.model, cache.output, batch);
      Vec<S> grad = res.model.backward(cache, lr.d_output);
      const double gnorm = static_cast<double>(grad.template cast<double>().norm());
      if (!std::isfinite(lr.loss) || !std::isfinite(gnorm)) {
        std::ostringstream msg;
        msg << "non-finite training signal at epoch " << epoch << ", batch starting at " << lo << ": loss=" << lr.loss
            << " grad_norm=" << gnorm << " lr=" << hyper.adam.lr;
        fail(Errc::Diverged, msg.str());
      }
      if (hyper.clip_norm > 0.0 && gnorm > hyper.clip_norm) grad *= static_cast<S>(hyper.clip_norm / gnorm);
      adam_step(res.model.params(), grad, res.optimizer, hyper.adam);
      loss_sum += lr.loss * static_cast<double>(batch.size());
      correct += lr.correct;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_set.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (hyper.eval_train) {
      const auto e = evaluate(res.model, train_set, hyper.batch_size);
      m.train_loss = e.loss;
      m.train_acc = e.accuracy;
    }
    if (!val_set.empty()) {
      const auto e = evaluate(res.model, val_set, hyper.batch_size);
      m.val_loss = e.loss;
      m.val_acc = e.accuracy;
    } else {
      m.val_loss = m.train_loss;
      m.val_acc = m.train_acc;
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(m);
    if (hyper.on_epoch) hyper.on_epoch(m);

    if (m.val_loss < best_loss) {
      best_loss = m.val_loss;
      best = res.model.params();
      res.best_epoch = epoch;
      since_best = 0;
    } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
      res.stopped_early = true;
      break;
    }
  }
  if (hyper.restore_best && res.best_epoch > 0) res.model.params() = best;
  std::ostringstream st;
  st << rng;
  res.rng_state = st.str();
  return res;
}

}  // namespace rfseq::nn
