#pragma once

#include <span>
#include <vector>

#include "psgnn/config.hpp"
#include "psgnn/geometry.hpp"
#include "psgnn/params.hpp"
#include "psgnn/random.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

void add_discriminator_params(ModelParams& params, Rng& rng);

/// N x N matrix whose (i, j) entry is sigmoid(MLP([v_i || v_j])), MLP 128 -> 64
/// -> 1 with ReLU and dropout between the layers. Dropout is active only when
/// `training` is set, in which case `rng` must be non-null.
Tensor pair_logits(const Tensor& node_feats, const ModelParams& params, bool training = false, Rng* rng = nullptr);

/// The full K x 5 output (K = N * N): row i * N + j is (x_i, y_i, x_j, y_j, p_ij).
Tensor prediction_matrix(std::span<const MarkingPoint> points, const Tensor& probs);

/// Accepted entrance lines: off-diagonal entries with t >= threshold. When both
/// directions of a pair are accepted only the more probable one survives.
/// Sorted by descending t.
std::vector<SlotPrediction> assemble_predictions(std::span<const MarkingPoint> points, const Tensor& probs,
                                                 double pair_threshold);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy over all N * N ordered pairs; (i, j) is positive
/// iff it appears in `gt_pairs`. Zero for N = 0.
Tensor line_loss(const Tensor& probs, std::span<const OrderedPair> gt_pairs);

/// lambda1 * point + lambda2 * line.
Tensor total_loss(const Tensor& point, const Tensor& line, const LossWeights& weights);

}  // namespace psgnn
