#include "psgnn/gnn.hpp"

#include <cmath>

#include "psgnn/errors.hpp"
#include "psgnn/ops.hpp"

namespace psgnn {

namespace {

constexpr std::size_t kUpdateHidden = 2 * kNodeWidth;

std::string layer_prefix(std::size_t layer) { return "gnn.layer" + std::to_string(layer); }

void add_dense(ModelParams& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  params.insert(prefix + ".weight", glorot_uniform({in, out}, in, out, rng));
  params.insert(prefix + ".bias", Tensor::zeros({out}, true));
}

Tensor project(const Tensor& x, const DenseLayer& layer) { return add_bias(matmul(x, layer.weight), layer.bias); }

void check_nodes(const Tensor& nodes) {
  if (nodes.rank() != 2 || nodes.dim(1) != kNodeWidth) {
    throw DimensionError("graph nodes must be N x " + std::to_string(kNodeWidth) + ", got " + shape_str(nodes.shape()));
  }
}

Tensor head_attention(const Tensor& q, const Tensor& k, std::size_t head, std::size_t width) {
  Tensor qh = slice_cols(q, head * width, (head + 1) * width);
  Tensor kh = slice_cols(k, head * width, (head + 1) * width);
  return softmax(matmul(qh, transpose(kh)));
}

Tensor fcn_layer(const Tensor& nodes, const ModelParams& params, std::size_t layer) {
  const auto prefix = layer_prefix(layer);
  const DenseLayer mlp[] = {params.dense(prefix + ".fc0", Activation::relu),
                            params.dense(prefix + ".fc1", Activation::identity)};
  return add(nodes, mlp_forward(standardize_rows(nodes), mlp));
}

}  // namespace

std::size_t attention_layer_parameter_count() {
  const auto w = kNodeWidth;
  return 4 * (w * w + w) + (2 * w * kUpdateHidden + kUpdateHidden) + (kUpdateHidden * w + w);
}

std::size_t fcn_hidden_width() {
  // One baseline layer holds 2 * w * hidden + hidden + w parameters.
  const double w = static_cast<double>(kNodeWidth);
  const double target = static_cast<double>(attention_layer_parameter_count());
  return static_cast<std::size_t>(std::lround((target - w) / (2.0 * w + 1.0)));
}

GraphLayerParams graph_layer_params(const ModelParams& params, std::size_t layer) {
  const auto prefix = layer_prefix(layer);
  return {params.dense(prefix + ".query", Activation::identity),
          params.dense(prefix + ".key", Activation::identity),
          params.dense(prefix + ".value", Activation::identity),
          params.dense(prefix + ".merge", Activation::identity),
          params.dense(prefix + ".update.fc0", Activation::relu),
          params.dense(prefix + ".update.fc1", Activation::identity),
          params.config().gnn.heads};
}

void add_gnn_params(ModelParams& params, Rng& rng) {
  const auto& cfg = params.config().gnn;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto prefix = layer_prefix(l);
    if (cfg.variant == GnnVariant::attentional) {
      add_dense(params, prefix + ".query", kNodeWidth, kNodeWidth, rng);
      add_dense(params, prefix + ".key", kNodeWidth, kNodeWidth, rng);
      add_dense(params, prefix + ".value", kNodeWidth, kNodeWidth, rng);
      add_dense(params, prefix + ".merge", kNodeWidth, kNodeWidth, rng);
      add_dense(params, prefix + ".update.fc0", 2 * kNodeWidth, kUpdateHidden, rng);
      add_dense(params, prefix + ".update.fc1", kUpdateHidden, kNodeWidth, rng);
    } else {
      add_dense(params, prefix + ".fc0", kNodeWidth, fcn_hidden_width(), rng);
      add_dense(params, prefix + ".fc1", fcn_hidden_width(), kNodeWidth, rng);
    }
  }
}

Tensor attention_layer(const Tensor& nodes, const GraphLayerParams& layer) {
  check_nodes(nodes);
  if (layer.heads == 0 || kNodeWidth % layer.heads != 0) {
    throw ParameterError("head count " + std::to_string(layer.heads) + " does not divide " + std::to_string(kNodeWidth));
  }
  if (nodes.dim(0) == 0) return nodes;
  const auto width = kNodeWidth / layer.heads;
  const Tensor xin = standardize_rows(nodes);
  Tensor q = project(xin, layer.query);
  Tensor k = project(xin, layer.key);
  Tensor v = project(xin, layer.value);
  Tensor messages;
  for (std::size_t h = 0; h < layer.heads; ++h) {
    Tensor m = matmul(head_attention(q, k, h, width), slice_cols(v, h * width, (h + 1) * width));
    messages = h == 0 ? m : concat_cols(messages, m);
  }
  Tensor merged = project(messages, layer.merge);
  const DenseLayer update[] = {layer.update_hidden, layer.update_out};
  return add(nodes, mlp_forward(concat_cols(xin, merged), update));
}

Tensor attention_weights(const Tensor& nodes, const GraphLayerParams& layer, std::size_t head) {
  check_nodes(nodes);
  if (head >= layer.heads) {
    throw ParameterError("head " + std::to_string(head) + " out of range for " + std::to_string(layer.heads) + " heads");
  }
  if (nodes.dim(0) == 0) return Tensor::zeros({0, 0});
  const auto width = kNodeWidth / layer.heads;
  const Tensor xin = standardize_rows(nodes);
  return head_attention(project(xin, layer.query), project(xin, layer.key), head, width);
}

Tensor gnn_forward(const NodeFeatures& nodes, const GnnConfig& config, const ModelParams& params) {
  Tensor x = nodes.features;
  check_nodes(x);
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.variant == GnnVariant::attentional) {
      GraphLayerParams layer = graph_layer_params(params, l);
      layer.heads = config.heads;
      x = attention_layer(x, layer);
    } else {
      x = fcn_layer(x, params, l);
    }
  }
  return x;
}

}  // namespace psgnn
