#pragma once

#include <filesystem>
#include <span>

#include "psgnn/geometry.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

/// Binary PPM (P6, maxval 255) of an H x W x 3 tensor with values in [0, 1].
void write_ppm(const Tensor& image, const std::filesystem::path& path);

/// Reads P6 or P3 PPM files into an H x W x 3 tensor in [0, 1].
Tensor read_ppm(const std::filesystem::path& path);

inline constexpr double kOverlayCircleRadiusPx = 4.0;

/// Copy of `image` with every prediction drawn as a blue entrance segment and
/// red circles at its two endpoints, plus red circles at `extra_points`.
/// Shapes are clipped to the image.
Tensor draw_overlay(const Tensor& image, std::span<const SlotPrediction> predictions,
                    std::span<const MarkingPoint> extra_points = {});

void render_overlay(const Tensor& image, std::span<const SlotPrediction> predictions,
                    const std::filesystem::path& out_path, std::span<const MarkingPoint> extra_points = {});

}  // namespace psgnn
