#include "psgnn/discriminator.hpp"

#include <algorithm>

#include "psgnn/errors.hpp"
#include "psgnn/nn.hpp"
#include "psgnn/ops.hpp"

namespace psgnn {

namespace {
constexpr std::size_t kHidden = 64;
}

void add_discriminator_params(ModelParams& params, Rng& rng) {
  params.insert("disc.fc0.weight", he_uniform({2 * kNodeWidth, kHidden}, 2 * kNodeWidth, rng));
  params.insert("disc.fc0.bias", Tensor::zeros({kHidden}, true));
  params.insert("disc.fc1.weight", glorot_uniform({kHidden, 1}, kHidden, 1, rng));
  params.insert("disc.fc1.bias", Tensor::zeros({1}, true));
}

Tensor pair_logits(const Tensor& node_feats, const ModelParams& params, bool training, Rng* rng) {
  if (node_feats.rank() != 2 || node_feats.dim(1) != kNodeWidth) {
    throw DimensionError("pair_logits expects N x " + std::to_string(kNodeWidth) + " nodes, got " +
                         shape_str(node_feats.shape()));
  }
  const auto n = node_feats.dim(0);
  if (n == 0) return Tensor::zeros({0, 0});
  if (training && rng == nullptr) throw ParameterError("pair_logits: training mode needs an rng for dropout");

  std::vector<std::size_t> left, right;
  left.reserve(n * n);
  right.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      left.push_back(i);
      right.push_back(j);
    }
  }
  const Tensor normed = standardize_rows(node_feats);
  Tensor pairs = concat_cols(gather_rows(normed, left), gather_rows(normed, right));
  const DenseLayer fc0 = params.dense("disc.fc0", Activation::relu);
  const DenseLayer fc1 = params.dense("disc.fc1", Activation::sigmoid);
  Tensor hidden = mlp_forward(pairs, std::span(&fc0, 1));
  Rng inference_rng(0);
  hidden = dropout(hidden, params.config().dropout_rate, training, rng ? *rng : inference_rng);
  return reshape(mlp_forward(hidden, std::span(&fc1, 1)), {n, n});
}

Tensor prediction_matrix(std::span<const MarkingPoint> points, const Tensor& probs) {
  const auto n = points.size();
  if (probs.numel() != n * n) {
    throw DimensionError("pair probabilities " + shape_str(probs.shape()) + " do not match " + std::to_string(n) +
                         " points");
  }
  std::vector<double> rows;
  rows.reserve(n * n * 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      rows.insert(rows.end(), {points[i].x, points[i].y, points[j].x, points[j].y, probs[i * n + j]});
    }
  }
  return Tensor({n * n, 5}, std::move(rows));
}

std::vector<SlotPrediction> assemble_predictions(std::span<const MarkingPoint> points, const Tensor& probs,
                                                 double pair_threshold) {
  const auto n = points.size();
  if (probs.numel() != n * n) {
    throw DimensionError("pair probabilities " + shape_str(probs.shape()) + " do not match " + std::to_string(n) +
                         " points");
  }
  std::vector<SlotPrediction> accepted;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double t = probs[i * n + j];
      if (t < pair_threshold) continue;
      const double reverse = probs[j * n + i];
      // Reverse direction also accepted and wins (ties go to i < j).
      if (reverse >= pair_threshold && (reverse > t || (reverse == t && j < i))) continue;
      accepted.push_back({points[i].x, points[i].y, points[j].x, points[j].y, t, i, j});
    }
  }
  std::stable_sort(accepted.begin(), accepted.end(),
                   [](const SlotPrediction& a, const SlotPrediction& b) { return a.t > b.t; });
  return accepted;
}

Tensor line_loss(const Tensor& probs, std::span<const OrderedPair> gt_pairs) {
  const auto n = probs.rank() == 2 ? probs.dim(0) : 0;
  if (probs.numel() == 0) return Tensor::scalar(0.0);
  if (probs.rank() != 2 || probs.dim(1) != n) throw DimensionError("line_loss expects a square matrix, got " + shape_str(probs.shape()));
  Tensor labels = Tensor::zeros({n, n});
  auto l = labels.mutable_data();
  for (const auto& p : gt_pairs) {
    if (p.first >= n || p.second >= n) {
      throw DataError("entrance pair (" + std::to_string(p.first) + ", " + std::to_string(p.second) +
                      ") outside " + std::to_string(n) + " points");
    }
    l[p.first * n + p.second] = 1.0;
  }
  return binary_cross_entropy(probs, labels, kProbabilityClamp);
}

Tensor total_loss(const Tensor& point, const Tensor& line, const LossWeights& weights) {
  return add(scale(point, weights.lambda1), scale(line, weights.lambda2));
}

}  // namespace psgnn
