#pragma once

#include <span>
#include <vector>

#include "psgnn/random.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

enum class Activation { identity, relu, sigmoid };

/// One affine layer y = act(x W + b) with W of shape in x out.
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::identity;
};

Tensor apply_activation(const Tensor& x, Activation act);

/// Applies the layers in order to the rows of x (N x in).
Tensor mlp_forward(const Tensor& x, std::span<const DenseLayer> layers);

// Initialisers draw from Rng so parameter tensors are reproducible per seed.
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace psgnn
