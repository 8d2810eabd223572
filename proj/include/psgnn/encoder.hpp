#pragma once

#include <span>

#include "psgnn/detector.hpp"
#include "psgnn/params.hpp"
#include "psgnn/random.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

/// Per-point graph inputs. Row i of `features` belongs to row i of `positions`.
struct NodeFeatures {
  Tensor features;   // N x 64
  Tensor positions;  // N x 2, normalised (x, y)

  std::size_t size() const { return positions.dim(0); }
};

void add_encoder_params(ModelParams& params, Rng& rng);

/// Four 3x3 stride-1 padded convolutions, 64 channels, ReLU on all but the last.
Tensor encoder_forward(const Tensor& features, const ModelParams& params);

/// N x 2 tensor of point coordinates (no gradient).
Tensor positions_tensor(std::span<const MarkingPoint> points);

/// f_i + MLP(x_i, y_i) with a 2 -> 32 -> 64 MLP. When the model is configured
/// without the positional encoder the features pass through unchanged.
NodeFeatures fuse_position(const Tensor& features, const Tensor& positions, const ModelParams& params);

/// Convenience: sample the encoder map at the points and fuse positions.
NodeFeatures encode_nodes(const Tensor& encoder_map, std::span<const MarkingPoint> points, const ModelParams& params);

}  // namespace psgnn
