#include "psgnn/encoder.hpp"

#include "psgnn/errors.hpp"
#include "psgnn/nn.hpp"
#include "psgnn/ops.hpp"

namespace psgnn {

namespace {
constexpr std::size_t kPosHidden = 32;
}

void add_encoder_params(ModelParams& params, Rng& rng) {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto prefix = "encoder.conv" + std::to_string(i);
    params.insert(prefix + ".kernel", he_uniform({3, 3, kFeatureChannels, kNodeWidth}, 9 * kFeatureChannels, rng));
    params.insert(prefix + ".bias", Tensor::zeros({kNodeWidth}, true));
  }
  if (params.config().use_pos_encoder) {
    params.insert("encoder.pos.fc0.weight", he_uniform({2, kPosHidden}, 2, rng));
    params.insert("encoder.pos.fc0.bias", Tensor::zeros({kPosHidden}, true));
    params.insert("encoder.pos.fc1.weight", glorot_uniform({kPosHidden, kNodeWidth}, kPosHidden, kNodeWidth, rng));
    params.insert("encoder.pos.fc1.bias", Tensor::zeros({kNodeWidth}, true));
  }
}

Tensor encoder_forward(const Tensor& features, const ModelParams& params) {
  if (features.rank() != 3 || features.dim(2) != kFeatureChannels) {
    throw DimensionError("encoder expects H x W x " + std::to_string(kFeatureChannels) + " features, got " +
                         shape_str(features.shape()));
  }
  Tensor x = features;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto prefix = "encoder.conv" + std::to_string(i);
    x = add_bias(conv2d(x, params.at(prefix + ".kernel"), 1, 1), params.at(prefix + ".bias"));
    if (i < 3) x = relu(x);
  }
  return x;
}

Tensor positions_tensor(std::span<const MarkingPoint> points) {
  std::vector<double> xy;
  xy.reserve(points.size() * 2);
  for (const auto& p : points) {
    xy.push_back(p.x);
    xy.push_back(p.y);
  }
  return Tensor({points.size(), 2}, std::move(xy));
}

NodeFeatures fuse_position(const Tensor& features, const Tensor& positions, const ModelParams& params) {
  if (features.rank() != 2 || features.dim(1) != kNodeWidth) {
    throw DimensionError("node features must be N x " + std::to_string(kNodeWidth) + ", got " +
                         shape_str(features.shape()));
  }
  if (positions.rank() != 2 || positions.dim(1) != 2 || positions.dim(0) != features.dim(0)) {
    throw DimensionError("positions " + shape_str(positions.shape()) + " do not match features " +
                         shape_str(features.shape()));
  }
  if (!params.config().use_pos_encoder || features.dim(0) == 0) return {features, positions};
  const DenseLayer mlp[] = {params.dense("encoder.pos.fc0", Activation::relu),
                            params.dense("encoder.pos.fc1", Activation::identity)};
  return {add(features, mlp_forward(positions, mlp)), positions};
}

NodeFeatures encode_nodes(const Tensor& encoder_map, std::span<const MarkingPoint> points, const ModelParams& params) {
  Tensor positions = positions_tensor(points);
  return fuse_position(bilinear_sample(encoder_map, positions), positions, params);
}

}  // namespace psgnn
