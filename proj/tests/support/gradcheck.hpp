#pragma once

// Central finite-difference oracle for the BPTT gradients. Double precision
// throughout; in train mode every loss evaluation reseeds the dropout RNG so
// the mask stays fixed while parameters are perturbed.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rfseq/neural/loss.hpp"
#include "rfseq/neural/model.hpp"

namespace rfseq::gradcheck {

struct GroupError {
  std::string name;
  double max_rel = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GroupError> groups;
  double max_rel = 0.0;
};

inline nn::LossResult<double> head_loss(const nn::SequenceModel<double>& m, const nn::Mat<double>& out,
                                        const std::vector<int>& labels, const nn::Mat<double>& targets) {
  if (m.config().head == nn::Head::Softmax) return nn::softmax_cross_entropy<double>(out, labels);
  return nn::mean_squared_error<double>(out, targets);
}

/// Compares backward() against (L(p + e) - L(p - e)) / 2e for every parameter
/// (or `per_group` randomly chosen ones when non-zero). Relative error is
/// |a - n| / max(|a| + |n|, floor).
inline GradCheckReport gradient_check(nn::SequenceModel<double>& model, const nn::Mat<double>& x, std::size_t steps,
                                      const std::vector<int>& labels, const nn::Mat<double>& targets, bool train_mode,
                                      std::uint64_t mask_seed = 1, double eps = 1e-5, double floor = 1e-6,
                                      std::size_t per_group = 0) {
  auto loss_at = [&] {
    std::mt19937_64 rng(mask_seed);
    const auto cache = model.forward(x, steps, train_mode ? &rng : nullptr);
    return head_loss(model, cache.output, labels, targets).loss;
  };
  std::mt19937_64 rng(mask_seed);
  const auto cache = model.forward(x, steps, train_mode ? &rng : nullptr);
  const auto lr = head_loss(model, cache.output, labels, targets);
  const nn::Vec<double> analytic = model.backward(cache, lr.d_output);

  GradCheckReport rep;
  std::mt19937_64 pick(mask_seed + 99);
  for (const auto& g : model.layout()) {
    GroupError ge{g.name};
    std::vector<std::size_t> idx(g.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = g.offset + i;
    if (per_group > 0 && idx.size() > per_group) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(per_group);
    }
    for (std::size_t i : idx) {
      double& p = model.params()[static_cast<Eigen::Index>(i)];
      const double keep = p;
      p = keep + eps;
      const double up = loss_at();
      p = keep - eps;
      const double down = loss_at();
      p = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[static_cast<Eigen::Index>(i)];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      ge.max_rel = std::max(ge.max_rel, rel);
      ++ge.checked;
    }
    rep.max_rel = std::max(rep.max_rel, ge.max_rel);
    rep.groups.push_back(ge);
  }
  return rep;
}

/// Random tiny batch: B examples of `steps` steps with `dim` inputs each,
/// packed as make_batch would (column t*B + b).
inline nn::Mat<double> random_batch(std::size_t dim, std::size_t steps, std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  nn::Mat<double> x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(steps * batch));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = g(rng);
  return x;
}

}  // namespace rfseq::gradcheck
