#include "psgnn/model.hpp"

#include "psgnn/discriminator.hpp"
#include "psgnn/gnn.hpp"

namespace psgnn {

ModelParams init_model_params(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  ModelParams params(config);
  // Each module draws from its own stream so toggling one (e.g. the
  // positional encoder) leaves the others' initial weights unchanged.
  Rng backbone_rng(mix_seed(seed, 10)), detector_rng(mix_seed(seed, 11)), encoder_rng(mix_seed(seed, 12)),
      gnn_rng(mix_seed(seed, 13)), disc_rng(mix_seed(seed, 14));
  add_backbone_params(params, backbone_rng);
  add_detector_params(params, detector_rng);
  add_encoder_params(params, encoder_rng);
  add_gnn_params(params, gnn_rng);
  add_discriminator_params(params, disc_rng);
  return params;
}

SampleLoss sample_loss(const ModelParams& params, const SceneRecord& scene, bool training, Rng* dropout_rng) {
  const auto& cfg = params.config();
  Tensor features = backbone_forward(scene.image, params);
  GridMap grid = detector_forward(features, params);
  Tensor point = point_loss(grid, scene.points);

  NodeFeatures nodes = encode_nodes(encoder_forward(features, params), scene.points, params);
  Tensor node_out = gnn_forward(nodes, cfg.gnn, params);
  Tensor probs = pair_logits(node_out, params, training, dropout_rng);
  Tensor line = line_loss(probs, scene.entrance_pairs);
  return {total_loss(point, line, cfg.loss), point, line};
}

NodeEmbeddings node_embeddings(const ModelParams& params, const Tensor& image, std::span<const MarkingPoint> points) {
  Tensor features = backbone_forward(image, params);
  NodeFeatures nodes = encode_nodes(encoder_forward(features, params), points, params);
  return {nodes.features, gnn_forward(nodes, params.config().gnn, params)};
}

Inference infer(const ModelParams& params, const Tensor& image) {
  Tape::Pause no_tape;
  const auto& cfg = params.config();
  Tensor features = backbone_forward(image, params);
  Inference out;
  out.points = decode_points(detector_forward(features, params), cfg.decode.conf_threshold, cfg.decode.nms_radius,
                             cfg.decode.max_points);
  if (out.points.empty()) {
    out.probs = Tensor::zeros({0, 0});
    return out;
  }
  NodeFeatures nodes = encode_nodes(encoder_forward(features, params), out.points, params);
  out.probs = pair_logits(gnn_forward(nodes, cfg.gnn, params), params, false, nullptr);
  out.slots = assemble_predictions(out.points, out.probs, cfg.pair_threshold);
  return out;
}

}  // namespace psgnn
