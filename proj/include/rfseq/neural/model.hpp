#pragma once

// Stacked LSTM sequence model with a fully-connected head.
//
//   x_t (C*L) -> LSTM_1 -> [dropout] -> ... -> LSTM_k -> pool (last | mean)
//             -> [dropout] -> Dense(F, relu) -> [dropout] -> Dense(O)
//
// The classifier head emits logits (softmax applied by the loss / predict),
// the generator head is linear. All parameters live in one flat vector so the
// optimizer, checkpoints and gradient checks treat them uniformly. Matrices
// are column-major views into that vector.
//
// LSTM gate order is (input i, forget f, cell g, output o):
//   z = W x_t + U h_{t-1} + b
//   i, f, o = sigmoid(z_i, z_f, z_o);  g = tanh(z_g)
//   c_t = f * c_{t-1} + i * g;          h_t = o * tanh(c_t)

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfseq/dataset.hpp"
#include "rfseq/error.hpp"

namespace rfseq::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Head { Softmax, Linear };
enum class Pooling { Last, Mean };

struct ModelConfig {
  std::size_t input_dim = 256;     // C * L real values per time step
  std::size_t hidden = 64;         // LSTM width H
  std::size_t lstm_layers = 2;
  std::size_t dense_hidden = 256;  // 0 disables the hidden dense layer
  std::size_t output_dim = 4;      // K classes or C * L regression outputs
  Head head = Head::Softmax;
  Pooling pooling = Pooling::Last;
  double dropout = 0.5;
  double forget_bias = 1.0;

  static ModelConfig classifier(std::size_t input_dim, std::size_t classes, std::size_t hidden = 64,
                                std::size_t dense_hidden = 256, double dropout = 0.5) {
    return {input_dim, hidden, 2, dense_hidden, classes, Head::Softmax, Pooling::Last, dropout};
  }
  static ModelConfig generator(std::size_t input_dim, std::size_t hidden = 64, double dropout = 0.0) {
    return {input_dim, hidden, 2, 0, input_dim, Head::Linear, Pooling::Last, dropout};
  }

  void validate() const {
    require(input_dim > 0 && hidden > 0 && lstm_layers > 0 && output_dim > 0, Errc::InvalidArgument,
            "model dimensions must be positive");
    require(dropout >= 0.0 && dropout < 1.0, Errc::InvalidArgument, "dropout must be in [0, 1)");
  }
};

struct ParamGroup {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
};

inline std::vector<ParamGroup> param_layout(const ModelConfig& cfg) {
  std::vector<ParamGroup> g;
  std::size_t off = 0;
  auto add = [&](std::string name, std::size_t r, std::size_t c) {
    g.push_back({std::move(name), r, c, off});
    off += r * c;
  };
  const std::size_t h = cfg.hidden;
  for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
    const std::string p = "lstm" + std::to_string(l);
    add(p + ".W", 4 * h, l == 0 ? cfg.input_dim : h);
    add(p + ".U", 4 * h, h);
    add(p + ".b", 4 * h, 1);
  }
  std::size_t in = h;
  std::size_t d = 0;
  if (cfg.dense_hidden > 0) {
    add("dense0.W", cfg.dense_hidden, in);
    add("dense0.b", cfg.dense_hidden, 1);
    in = cfg.dense_hidden;
    d = 1;
  }
  add("dense" + std::to_string(d) + ".W", cfg.output_dim, in);
  add("dense" + std::to_string(d) + ".b", cfg.output_dim, 1);
  return g;
}

inline std::size_t param_count(const ModelConfig& cfg) {
  const auto g = param_layout(cfg);
  return g.back().offset + g.back().size();
}

/// Packs examples into a (step_dim x N*B) matrix; column t*B + b holds step t
/// of example b.
template <typename S>
Mat<S> make_batch(std::span<const ExampleTensor* const> examples) {
  require(!examples.empty(), Errc::ShapeMismatch, "empty batch");
  const auto& first = *examples.front();
  const std::size_t n = first.n_steps;
  const std::size_t d = first.channels * first.window_len;
  const std::size_t b = examples.size();
  Mat<S> x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n * b));
  for (std::size_t e = 0; e < b; ++e) {
    const auto& ex = *examples[e];
    require(ex.n_steps == n && ex.channels * ex.window_len == d && ex.values.size() == n * d, Errc::ShapeMismatch,
            "examples in a batch must share one shape");
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t * b + e)) = static_cast<S>(ex.values[t * d + k]);
  }
  return x;
}

template <typename S>
struct LstmCache {
  Mat<S> input;   // D x NB (after dropout)
  Mat<S> gates;   // 4H x NB, activated
  Mat<S> cell;    // H x NB
  Mat<S> tanh_cell;
  Mat<S> hidden;  // H x NB
  Mat<S> input_mask;  // dropout mask applied to `input` (empty when off)
};

template <typename S>
struct DenseCache {
  Mat<S> input;       // after dropout
  Mat<S> input_mask;  // empty when off
  Mat<S> pre;         // W a + b
};

template <typename S>
struct ForwardCache {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<LstmCache<S>> lstm;
  std::vector<DenseCache<S>> dense;
  Mat<S> output;  // O x B (logits or linear outputs)
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return S(1) / (S(1) + (-x).exp());
}

template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  Mat<S> m(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : S(0);
  return m;
}

}  // namespace detail

/// One LSTM step on column vectors; returns the activated gates in `gates`.
template <typename S>
void lstm_cell_forward(const Mat<S>& W, const Mat<S>& U, const Vec<S>& b, const Vec<S>& x, const Vec<S>& h_prev,
                       const Vec<S>& c_prev, Vec<S>& h, Vec<S>& c, Vec<S>* gates = nullptr) {
  const Eigen::Index hs = U.cols();
  require(W.rows() == 4 * hs && U.rows() == 4 * hs && b.size() == 4 * hs && W.cols() == x.size() &&
              h_prev.size() == hs && c_prev.size() == hs,
          Errc::ShapeMismatch, "lstm_cell_forward shape mismatch");
  Vec<S> z = W * x + U * h_prev + b;
  const Vec<S> i = detail::sigmoid(z.segment(0, hs).array()).matrix();
  const Vec<S> f = detail::sigmoid(z.segment(hs, hs).array()).matrix();
  const Vec<S> g = z.segment(2 * hs, hs).array().tanh().matrix();
  const Vec<S> o = detail::sigmoid(z.segment(3 * hs, hs).array()).matrix();
  c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  h = (o.array() * c.array().tanh()).matrix();
  if (gates) {
    gates->resize(4 * hs);
    *gates << i, f, g, o;
  }
}

template <typename S>
class SequenceModel {
 public:
  using MatMap = Eigen::Map<Mat<S>>;
  using ConstMatMap = Eigen::Map<const Mat<S>>;

  SequenceModel() = default;
  explicit SequenceModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    layout_ = param_layout(cfg_);
    params_ = Vec<S>::Zero(static_cast<Eigen::Index>(param_count(cfg_)));
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<ParamGroup>& layout() const { return layout_; }
  Vec<S>& params() { return params_; }
  const Vec<S>& params() const { return params_; }
  std::size_t dense_layers() const { return cfg_.dense_hidden > 0 ? 2 : 1; }

  MatMap group(Vec<S>& v, std::size_t gi) const {
    const auto& g = layout_[gi];
    return MatMap(v.data() + g.offset, static_cast<Eigen::Index>(g.rows), static_cast<Eigen::Index>(g.cols));
  }
  ConstMatMap group(const Vec<S>& v, std::size_t gi) const {
    const auto& g = layout_[gi];
    return ConstMatMap(v.data() + g.offset, static_cast<Eigen::Index>(g.rows), static_cast<Eigen::Index>(g.cols));
  }
  std::size_t lstm_group(std::size_t layer, std::size_t which) const { return 3 * layer + which; }
  std::size_t dense_group(std::size_t layer, std::size_t which) const { return 3 * cfg_.lstm_layers + 2 * layer + which; }

  /// Uniform(+-1/sqrt(fan_in)) weights, zero biases, forget-gate bias slice set
  /// to cfg.forget_bias.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t gi = 0; gi < layout_.size(); ++gi) {
      const auto& g = layout_[gi];
      auto m = group(params_, gi);
      if (g.cols == 1) {
        m.setZero();
        continue;
      }
      const double a = 1.0 / std::sqrt(static_cast<double>(g.cols));
      std::uniform_real_distribution<double> u(-a, a);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<S>(u(rng));
    }
    const auto h = static_cast<Eigen::Index>(cfg_.hidden);
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l)
      group(params_, lstm_group(l, 2)).block(h, 0, h, 1).setConstant(static_cast<S>(cfg_.forget_bias));
  }

  /// Runs the network on a packed batch. When `dropout_rng` is non-null the
  /// model is in training mode and inverted-dropout masks are drawn from it.
  ForwardCache<S> forward(const Mat<S>& x, std::size_t steps, std::mt19937_64* dropout_rng = nullptr) const {
    require(steps > 0 && x.cols() % static_cast<Eigen::Index>(steps) == 0, Errc::ShapeMismatch, "batch columns not a multiple of steps");
    require(x.rows() == static_cast<Eigen::Index>(cfg_.input_dim), Errc::ShapeMismatch,
            "step dimension " + std::to_string(x.rows()) + " != model input_dim " + std::to_string(cfg_.input_dim));
    const bool train = dropout_rng != nullptr && cfg_.dropout > 0.0;
    ForwardCache<S> c;
    c.steps = steps;
    c.batch = static_cast<std::size_t>(x.cols()) / steps;
    const auto B = static_cast<Eigen::Index>(c.batch);
    const auto N = static_cast<Eigen::Index>(steps);
    const auto H = static_cast<Eigen::Index>(cfg_.hidden);

    c.lstm.resize(cfg_.lstm_layers);
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
      auto& lc = c.lstm[l];
      lc.input = l == 0 ? x : c.lstm[l - 1].hidden;
      if (l > 0 && train) {
        lc.input_mask = detail::dropout_mask<S>(lc.input.rows(), lc.input.cols(), cfg_.dropout, *dropout_rng);
        lc.input.array() *= lc.input_mask.array();
      }
      const auto W = group(params_, lstm_group(l, 0));
      const auto U = group(params_, lstm_group(l, 1));
      const auto b = group(params_, lstm_group(l, 2));
      lc.gates.noalias() = W * lc.input;
      lc.gates.colwise() += b.col(0);
      lc.cell.resize(H, N * B);
      lc.tanh_cell.resize(H, N * B);
      lc.hidden.resize(H, N * B);
      for (Eigen::Index t = 0; t < N; ++t) {
        auto z = lc.gates.middleCols(t * B, B);
        if (t > 0) z.noalias() += U * lc.hidden.middleCols((t - 1) * B, B);
        z.topRows(2 * H) = detail::sigmoid(z.topRows(2 * H).array()).matrix();
        z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
        z.bottomRows(H) = detail::sigmoid(z.bottomRows(H).array()).matrix();
        auto ct = lc.cell.middleCols(t * B, B);
        ct = (z.middleRows(0, H).array() * z.middleRows(2 * H, H).array()).matrix();
        if (t > 0) ct.array() += z.middleRows(H, H).array() * lc.cell.middleCols((t - 1) * B, B).array();
        lc.tanh_cell.middleCols(t * B, B) = ct.array().tanh().matrix();
        lc.hidden.middleCols(t * B, B) = (z.bottomRows(H).array() * lc.tanh_cell.middleCols(t * B, B).array()).matrix();
      }
    }

    const auto& top = c.lstm.back().hidden;
    Mat<S> a;
    if (cfg_.pooling == Pooling::Last) {
      a = top.middleCols((N - 1) * B, B);
    } else {
      a = Mat<S>::Zero(H, B);
      for (Eigen::Index t = 0; t < N; ++t) a += top.middleCols(t * B, B);
      a /= static_cast<S>(N);
    }

    const std::size_t nd = dense_layers();
    c.dense.resize(nd);
    for (std::size_t d = 0; d < nd; ++d) {
      auto& dc = c.dense[d];
      dc.input = std::move(a);
      if (train) {
        dc.input_mask = detail::dropout_mask<S>(dc.input.rows(), dc.input.cols(), cfg_.dropout, *dropout_rng);
        dc.input.array() *= dc.input_mask.array();
      }
      const auto W = group(params_, dense_group(d, 0));
      const auto b = group(params_, dense_group(d, 1));
      dc.pre.noalias() = W * dc.input;
      dc.pre.colwise() += b.col(0);
      if (d + 1 < nd) a = dc.pre.cwiseMax(S(0));
    }
    c.output = c.dense.back().pre;
    return c;
  }

  /// Exact gradient of a loss whose derivative w.r.t. the outputs is `d_output`.
  Vec<S> backward(const ForwardCache<S>& c, const Mat<S>& d_output) const {
    require(d_output.rows() == c.output.rows() && d_output.cols() == c.output.cols(), Errc::ShapeMismatch,
            "d_output shape mismatch");
    Vec<S> grad = Vec<S>::Zero(params_.size());
    const auto B = static_cast<Eigen::Index>(c.batch);
    const auto N = static_cast<Eigen::Index>(c.steps);
    const auto H = static_cast<Eigen::Index>(cfg_.hidden);

    Mat<S> dz = d_output;
    const std::size_t nd = dense_layers();
    Mat<S> da;
    for (std::size_t k = nd; k-- > 0;) {
      const auto& dc = c.dense[k];
      group(grad, dense_group(k, 0)).noalias() = dz * dc.input.transpose();
      group(grad, dense_group(k, 1)) = dz.rowwise().sum();
      da.noalias() = group(params_, dense_group(k, 0)).transpose() * dz;
      if (dc.input_mask.size()) da.array() *= dc.input_mask.array();
      if (k > 0) dz = (da.array() * (c.dense[k - 1].pre.array() > S(0)).template cast<S>()).matrix();
    }

    Mat<S> d_hidden = Mat<S>::Zero(H, N * B);
    if (cfg_.pooling == Pooling::Last) {
      d_hidden.middleCols((N - 1) * B, B) = da;
    } else {
      for (Eigen::Index t = 0; t < N; ++t) d_hidden.middleCols(t * B, B) = da / static_cast<S>(N);
    }

    for (std::size_t l = cfg_.lstm_layers; l-- > 0;) {
      const auto& lc = c.lstm[l];
      const auto W = group(params_, lstm_group(l, 0));
      const auto U = group(params_, lstm_group(l, 1));
      Mat<S> dz_all(4 * H, N * B);
      Mat<S> dh_next = Mat<S>::Zero(H, B);
      Mat<S> dc_next = Mat<S>::Zero(H, B);
      for (Eigen::Index t = N; t-- > 0;) {
        const auto g = lc.gates.middleCols(t * B, B);
        const auto ig = g.topRows(H).array();
        const auto fg = g.middleRows(H, H).array();
        const auto gg = g.middleRows(2 * H, H).array();
        const auto og = g.bottomRows(H).array();
        const auto tc = lc.tanh_cell.middleCols(t * B, B).array();
        const Mat<S> dh = d_hidden.middleCols(t * B, B) + dh_next;
        const Mat<S> dcell = (dh.array() * og * (S(1) - tc.square()) + dc_next.array()).matrix();
        auto dzt = dz_all.middleCols(t * B, B);
        dzt.topRows(H) = (dcell.array() * gg * ig * (S(1) - ig)).matrix();
        if (t > 0) {
          dzt.middleRows(H, H) = (dcell.array() * lc.cell.middleCols((t - 1) * B, B).array() * fg * (S(1) - fg)).matrix();
        } else {
          dzt.middleRows(H, H).setZero();
        }
        dzt.middleRows(2 * H, H) = (dcell.array() * ig * (S(1) - gg.square())).matrix();
        dzt.bottomRows(H) = (dh.array() * tc * og * (S(1) - og)).matrix();
        dc_next = (dcell.array() * fg).matrix();
        dh_next.noalias() = U.transpose() * dzt;
      }
      group(grad, lstm_group(l, 0)).noalias() = dz_all * lc.input.transpose();
      if (N > 1)
        group(grad, lstm_group(l, 1)).noalias() = dz_all.rightCols((N - 1) * B) * lc.hidden.leftCols((N - 1) * B).transpose();
      group(grad, lstm_group(l, 2)) = dz_all.rowwise().sum();
      if (l > 0) {
        d_hidden.noalias() = W.transpose() * dz_all;
        if (lc.input_mask.size()) d_hidden.array() *= lc.input_mask.array();
      }
    }
    return grad;
  }

  /// Eval-mode outputs for a packed batch (logits or linear outputs).
  Mat<S> predict_raw(const Mat<S>& x, std::size_t steps) const { return forward(x, steps).output; }

  template <typename T>
  SequenceModel<T> cast() const {
    SequenceModel<T> m(cfg_);
    m.params() = params_.template cast<T>();
    return m;
  }

 private:
  ModelConfig cfg_;
  std::vector<ParamGroup> layout_;
  Vec<S> params_;
};

}  // namespace rfseq::nn
