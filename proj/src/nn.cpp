#include "psgnn/nn.hpp"

#include <cmath>

#include "psgnn/errors.hpp"
#include "psgnn/ops.hpp"

namespace psgnn {

Tensor apply_activation(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::relu:
      return relu(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::identity:
      break;
  }
  return x;
}

Tensor mlp_forward(const Tensor& x, std::span<const DenseLayer> layers) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (h.rank() != 2 || layer.weight.rank() != 2 || h.dim(1) != layer.weight.dim(0)) {
      throw DimensionError("mlp layer " + std::to_string(i) + ": input " + shape_str(h.shape()) +
                           " does not chain into weight " + shape_str(layer.weight.shape()));
    }
    h = apply_activation(add_bias(matmul(h, layer.weight), layer.bias), layer.activation);
  }
  return h;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.mutable_data()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.mutable_data()) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace psgnn
