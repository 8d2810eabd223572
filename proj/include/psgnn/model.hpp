#pragma once

#include <cstdint>
#include <vector>

#include "psgnn/config.hpp"
#include "psgnn/detector.hpp"
#include "psgnn/encoder.hpp"
#include "psgnn/geometry.hpp"
#include "psgnn/params.hpp"
#include "psgnn/random.hpp"
#include "psgnn/scene.hpp"
#include "psgnn/tensor.hpp"

// End-to-end wiring of backbone, detector, encoder, graph network and
// entrance-line discriminator.

namespace psgnn {

/// Fresh parameters for every module the configuration needs.
ModelParams init_model_params(const ModelConfig& config, std::uint64_t seed);

struct SampleLoss {
  Tensor total;
  Tensor point;
  Tensor line;
};

/// Training objective for one scene. The graph branch is fed ground-truth
/// positions. Records onto the active tape, if any.
SampleLoss sample_loss(const ModelParams& params, const SceneRecord& scene, bool training, Rng* dropout_rng);

/// Node features entering and leaving the graph network at the given points.
struct NodeEmbeddings {
  Tensor before;
  Tensor after;
};
NodeEmbeddings node_embeddings(const ModelParams& params, const Tensor& image, std::span<const MarkingPoint> points);

struct Inference {
  std::vector<MarkingPoint> points;   // decoded detections
  Tensor probs;                       // N x N pair probabilities
  std::vector<SlotPrediction> slots;  // accepted entrance lines
};

/// Detection -> decoding -> graph -> discriminator with dropout off.
Inference infer(const ModelParams& params, const Tensor& image);

}  // namespace psgnn
