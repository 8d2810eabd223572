#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace psgnn {

inline constexpr std::size_t kImageSize = 256;      // square input raster, pixels
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kGridSize = 16;        // S: detector output is S x S x 3
inline constexpr std::size_t kFeatureChannels = 64; // backbone output channels
inline constexpr std::size_t kNodeWidth = 64;       // per-point feature width

enum class GnnVariant : std::uint8_t { attentional = 0, fcn_baseline = 1 };

std::string to_string(GnnVariant v);
GnnVariant parse_variant(const std::string& name);

struct GnnConfig {
  std::size_t layers = 3;
  std::size_t heads = 4;
  GnnVariant variant = GnnVariant::attentional;
};

struct LossWeights {
  double lambda1 = 100.0;  // point loss
  double lambda2 = 1.0;    // line loss
};

struct DecodeConfig {
  double conf_threshold = 0.25;
  double nms_radius = 1.0 / static_cast<double>(kGridSize);  // normalised units
  std::size_t max_points = 16;
};

/// Everything that shapes the network or its post-processing. Stored inside
/// every checkpoint.
struct ModelConfig {
  GnnConfig gnn;
  LossWeights loss;
  DecodeConfig decode;
  double pair_threshold = 0.5;
  double dropout_rate = 0.5;
  bool use_pos_encoder = true;
};

/// Throws ParameterError on out-of-range values.
void validate(const ModelConfig& config);

}  // namespace psgnn
