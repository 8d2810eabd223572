#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "psgnn/random.hpp"
#include "psgnn/tensor.hpp"

// Differentiable primitives. Every function records a backward rule on the
// active tape when one exists and at least one input requires a gradient.

namespace psgnn {

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor square(const Tensor& a);

/// Adds a vector of length shape.back() to every trailing row of `a`.
Tensor add_bias(const Tensor& a, const Tensor& bias);

// Activations.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Softmax along the last axis (the whole vector for rank 1), computed with
/// max subtraction.
Tensor softmax(const Tensor& logits);
/// Per-row zero mean and unit variance over the last axis, no affine terms.
Tensor standardize_rows(const Tensor& x, double eps = 1e-5);

// Reductions.
Tensor sum(const Tensor& a);

// Structure.
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

/// Cross-correlation of an H x W x Cin input with a kh x kw x Cin x Cout
/// kernel, lowered to im2col + matmul.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

/// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// Mean binary cross-entropy of probabilities against {0,1} labels with the
/// probabilities clamped to [eps, 1 - eps]. Returns a scalar.
Tensor binary_cross_entropy(const Tensor& probs, const Tensor& labels, double eps);

/// Bilinear lookup of an H x W x C map at N normalised (x, y) positions,
/// using grid coordinates (x * (W - 1), y * (H - 1)) and border clamping.
/// Differentiable in the map only.
Tensor bilinear_sample(const Tensor& map, const Tensor& points);

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
};

/// Compares the tape gradient of scalar `f()` with respect to `x` against
/// central differences. `x` must be a tensor that `f` reads; it is perturbed
/// in place and restored. Coordinates whose absolute error is at most
/// `abs_floor` count as exact. When `max_coords` is nonzero an evenly spread
/// subset of coordinates is checked.
GradCheckResult grad_check(const std::function<Tensor()>& f, Tensor x, double step = 1e-5,
                           double abs_floor = 1e-6, std::size_t max_coords = 0);

}  // namespace psgnn
