#pragma once

#include <compare>
#include <cstddef>

namespace psgnn {

/// A marking-point in normalised image coordinates.
struct MarkingPoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 1.0;

  bool operator==(const MarkingPoint&) const = default;
};

/// Ordered index pair (first -> second) into a point list.
struct OrderedPair {
  std::size_t first = 0;
  std::size_t second = 0;

  auto operator<=>(const OrderedPair&) const = default;
};

/// One accepted entrance line: ordered endpoints plus its probability.
struct SlotPrediction {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double t = 0.0;
  std::size_t first = 0;   // index of (x1, y1) in the point list
  std::size_t second = 0;  // index of (x2, y2)
};

}  // namespace psgnn
