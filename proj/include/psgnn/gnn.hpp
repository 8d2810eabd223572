#pragma once

#include "psgnn/config.hpp"
#include "psgnn/encoder.hpp"
#include "psgnn/nn.hpp"
#include "psgnn/params.hpp"
#include "psgnn/random.hpp"

namespace psgnn {

/// Parameters of one attentional message-passing layer. query/key/value are
/// 64 -> 64 maps whose column blocks of width 64 / heads are the per-head
/// projections; merge recombines the concatenated head messages.
struct GraphLayerParams {
  DenseLayer query;
  DenseLayer key;
  DenseLayer value;
  DenseLayer merge;
  DenseLayer update_hidden;  // 128 -> 128, ReLU
  DenseLayer update_out;     // 128 -> 64, linear
  std::size_t heads = 4;
};

GraphLayerParams graph_layer_params(const ModelParams& params, std::size_t layer);

/// Hidden width of the per-node residual MLP used by the FCN baseline, chosen
/// so one baseline layer has (nearly) the parameter count of an attention layer.
std::size_t fcn_hidden_width();
std::size_t attention_layer_parameter_count();

void add_gnn_params(ModelParams& params, Rng& rng);

/// x_i + MLP([x_i || W (m_i^1 || ... || m_i^h)]) where
/// m_i^k = sum_j softmax_j(q_i^T k_j) v_j over all nodes, self included.
Tensor attention_layer(const Tensor& nodes, const GraphLayerParams& layer);

/// Row-stochastic N x N attention matrix of one head (diagnostics only).
Tensor attention_weights(const Tensor& nodes, const GraphLayerParams& layer, std::size_t head);

/// Stacks `config.layers` layers of the configured variant.
Tensor gnn_forward(const NodeFeatures& nodes, const GnnConfig& config, const ModelParams& params);

}  // namespace psgnn
