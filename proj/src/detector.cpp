#include "psgnn/detector.hpp"

#include <algorithm>
#include <cmath>

#include "psgnn/errors.hpp"
#include "psgnn/ops.hpp"

namespace psgnn {

namespace {

constexpr std::size_t kBackboneWidths[] = {3, 16, 32, 64, 64};
constexpr std::size_t kDetectorHidden = 32;
// Initial confidence: roughly the share of occupied cells in a typical scene.
constexpr double kConfidencePrior = 0.02;

Tensor conv_layer(const Tensor& x, const ModelParams& params, const std::string& prefix, std::size_t stride,
                  std::size_t padding, bool with_relu) {
  Tensor y = add_bias(conv2d(x, params.at(prefix + ".kernel"), stride, padding), params.at(prefix + ".bias"));
  return with_relu ? relu(y) : y;
}

void add_conv(ModelParams& params, const std::string& prefix, std::size_t k, std::size_t cin, std::size_t cout,
              Rng& rng) {
  params.insert(prefix + ".kernel", he_uniform({k, k, cin, cout}, k * k * cin, rng));
  params.insert(prefix + ".bias", Tensor::zeros({cout}, true));
}

}  // namespace

void add_backbone_params(ModelParams& params, Rng& rng) {
  for (std::size_t i = 0; i < 4; ++i) {
    add_conv(params, "backbone.conv" + std::to_string(i), 3, kBackboneWidths[i], kBackboneWidths[i + 1], rng);
  }
}

void add_detector_params(ModelParams& params, Rng& rng) {
  add_conv(params, "detector.conv0", 3, kFeatureChannels, kDetectorHidden, rng);
  add_conv(params, "detector.conv1", 1, kDetectorHidden, 3, rng);
  // Starting at the background rate keeps the first updates from slamming
  // every confidence into the flat tail of the sigmoid.
  Tensor bias = params.at("detector.conv1.bias");
  bias.mutable_data()[2] = std::log(kConfidencePrior / (1.0 - kConfidencePrior));
}

Tensor backbone_forward(const Tensor& image, const ModelParams& params) {
  if (image.rank() != 3 || image.dim(0) != kImageSize || image.dim(1) != kImageSize || image.dim(2) != kImageChannels) {
    throw DimensionError("backbone expects a " + shape_str({kImageSize, kImageSize, kImageChannels}) + " image, got " +
                         shape_str(image.shape()));
  }
  Tensor x = image;
  for (std::size_t i = 0; i < 4; ++i) x = conv_layer(x, params, "backbone.conv" + std::to_string(i), 2, 1, true);
  return x;
}

GridMap detector_forward(const Tensor& features, const ModelParams& params) {
  if (features.rank() != 3 || features.dim(0) != kGridSize || features.dim(1) != kGridSize ||
      features.dim(2) != kFeatureChannels) {
    throw DimensionError("detector expects " + shape_str({kGridSize, kGridSize, kFeatureChannels}) + " features, got " +
                         shape_str(features.shape()));
  }
  Tensor h = conv_layer(features, params, "detector.conv0", 1, 1, true);
  Tensor out = conv_layer(h, params, "detector.conv1", 1, 0, false);
  return {sigmoid(out), kGridSize};
}

CellIndex project_to_cell(const MarkingPoint& p, std::size_t grid_size) {
  const double s = static_cast<double>(grid_size);
  auto cell = [&](double v) {
    const double c = std::floor(std::clamp(v, 0.0, 1.0) * s);
    return std::min(static_cast<std::size_t>(c), grid_size - 1);
  };
  return {cell(p.y), cell(p.x)};
}

std::vector<MarkingPoint> decode_points(const GridMap& map, double conf_threshold, double nms_radius,
                                        std::size_t max_points) {
  const auto s = map.grid_size;
  const auto cells = map.cells.data();
  const double sd = static_cast<double>(s);
  std::vector<MarkingPoint> candidates;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const double* c = cells.data() + (i * s + j) * 3;
      if (c[2] >= conf_threshold) {
        candidates.push_back({(static_cast<double>(j) + c[0]) / sd, (static_cast<double>(i) + c[1]) / sd, c[2]});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MarkingPoint& a, const MarkingPoint& b) { return a.confidence > b.confidence; });

  std::vector<MarkingPoint> kept;
  for (const auto& p : candidates) {
    if (kept.size() == max_points) break;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const MarkingPoint& q) {
      return std::hypot(p.x - q.x, p.y - q.y) < nms_radius;
    });
    if (!suppressed) kept.push_back(p);
  }
  return kept;
}

GridMap encode_points(std::span<const MarkingPoint> points, std::size_t grid_size) {
  Tensor cells = Tensor::zeros({grid_size, grid_size, 3});
  auto data = cells.mutable_data();
  const double s = static_cast<double>(grid_size);
  for (const auto& p : points) {
    const auto cell = project_to_cell(p, grid_size);
    double* c = data.data() + (cell.row * grid_size + cell.col) * 3;
    if (c[2] != 0.0) {
      throw DataError("two ground-truth points fall into grid cell (" + std::to_string(cell.row) + ", " +
                      std::to_string(cell.col) + ")");
    }
    c[0] = std::clamp(p.x, 0.0, 1.0) * s - static_cast<double>(cell.col);
    c[1] = std::clamp(p.y, 0.0, 1.0) * s - static_cast<double>(cell.row);
    c[2] = 1.0;
  }
  return {cells, grid_size};
}

Tensor point_loss(const GridMap& map, std::span<const MarkingPoint> gt_points) {
  const auto s = map.grid_size;
  GridMap target = encode_points(gt_points, s);
  Tensor mask = Tensor::zeros({s, s, 3});
  auto m = mask.mutable_data();
  const auto t = target.cells.data();
  for (std::size_t cell = 0; cell < s * s; ++cell) {
    m[cell * 3 + 2] = 1.0;
    if (t[cell * 3 + 2] == 1.0) m[cell * 3] = m[cell * 3 + 1] = 1.0;
  }
  Tensor err = mul(square(sub(map.cells, target.cells)), mask);
  return scale(sum(err), 1.0 / static_cast<double>(s * s));
}

}  // namespace psgnn
