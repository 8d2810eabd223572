#pragma once

#include <span>
#include <vector>

#include "psgnn/geometry.hpp"
#include "psgnn/params.hpp"
#include "psgnn/random.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

/// Detector output: S x S x 3 cells holding (x offset, y offset, confidence),
/// offsets relative to the cell's top-left corner in cell units.
struct GridMap {
  Tensor cells;
  std::size_t grid_size = kGridSize;
};

void add_backbone_params(ModelParams& params, Rng& rng);
void add_detector_params(ModelParams& params, Rng& rng);

/// Four stride-2 3x3 convolutions with ReLU: 256x256x3 -> 16x16x64.
Tensor backbone_forward(const Tensor& image, const ModelParams& params);

/// 3x3 conv (64->32, ReLU) then 1x1 conv (32->3), sigmoid on every channel.
GridMap detector_forward(const Tensor& features, const ModelParams& params);

/// Thresholds cell confidences, converts cells to normalised points and runs
/// greedy NMS. Result is sorted by descending confidence and holds at most
/// `max_points` entries.
std::vector<MarkingPoint> decode_points(const GridMap& map, double conf_threshold, double nms_radius,
                                        std::size_t max_points = 16);

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Grid cell that a normalised point projects into.
CellIndex project_to_cell(const MarkingPoint& p, std::size_t grid_size);

/// Ideal map for a set of ground-truth points: confidence 1 and exact offsets
/// at occupied cells, zero elsewhere. Throws DataError when two points share
/// a cell.
GridMap encode_points(std::span<const MarkingPoint> points, std::size_t grid_size = kGridSize);

/// Mean over cells of squared confidence error plus, at occupied cells,
/// squared offset error (cell-relative). Scalar tensor.
Tensor point_loss(const GridMap& map, std::span<const MarkingPoint> gt_points);

}  // namespace psgnn
