#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "psgnn/geometry.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

using Color = std::array<double, 3>;

/// Knobs of the procedural parking-scene generator. Lengths are normalised
/// to the image side unless suffixed _px.
struct SceneConfig {
  std::size_t slots_min = 1;
  std::size_t slots_max = 3;
  double slot_width_min = 0.18;
  double slot_width_max = 0.24;
  double slot_depth_min = 0.30;
  double slot_depth_max = 0.42;
  double gap_probability = 0.3;  // chance that two neighbouring slots do not share a side line
  double gap_min = 0.10;
  double gap_max = 0.18;
  double line_thickness_min_px = 2.5;
  double line_thickness_max_px = 4.5;
  double noise_sigma = 0.03;
  std::size_t distractors = 2;
  double rotation_jitter = 0.25;  // radians around one of the four axis-aligned headings
  std::vector<Color> palette = {
      {0.32, 0.32, 0.33}, {0.24, 0.25, 0.26}, {0.40, 0.39, 0.37},  // asphalt
      {0.45, 0.27, 0.22}, {0.38, 0.30, 0.27},                      // brick
  };
};

/// Throws ParameterError on inconsistent ranges.
void validate(const SceneConfig& config);

/// Minimum distance between any two marking-points (1.5 grid cells).
inline constexpr double kMinPointSeparation = 1.5 / 16.0;
inline constexpr double kPointMargin = 0.05;

/// Four slot vertices in anticlockwise order as seen on the image (y down):
/// p1 -> p2 is the entrance line, p3 and p4 the rear corners.
struct SlotGeometry {
  std::array<double, 2> p1, p2, p3, p4;
};

/// Signed shoelace area in image coordinates (y down). Anticlockwise on
/// screen gives a negative value.
double signed_area(const SlotGeometry& slot);

struct SceneLayout {
  std::vector<SlotGeometry> slots;
  std::vector<MarkingPoint> points;
  std::vector<OrderedPair> entrance_pairs;
};

struct SceneRecord {
  Tensor image;  // 256 x 256 x 3 in [0, 1], every value exactly representable as f32
  std::vector<MarkingPoint> points;
  std::vector<OrderedPair> entrance_pairs;
  std::uint64_t seed = 0;
};

/// Bitwise comparison of every field.
bool identical(const SceneRecord& a, const SceneRecord& b);

/// Slot placement only (no raster). Deterministic in (config, seed).
SceneLayout layout_scene(const SceneConfig& config, std::uint64_t seed);

/// Layout plus rendering. Deterministic in (config, seed). Throws
/// GenerationError when 100 placement attempts fail.
SceneRecord generate_scene(const SceneConfig& config, std::uint64_t seed);

// Dataset file: "PSGD", u32 version, u32 record count, then per record
// u64 seed, u32 point count, f64 (x, y) per point, u32 pair count,
// u32 (first, second) per pair, f32 image (256 * 256 * 3, row-major HWC).

inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const std::vector<SceneRecord>& records, const std::filesystem::path& path);
std::vector<SceneRecord> read_dataset(const std::filesystem::path& path);

/// Appends records one at a time; the header count is patched on finish().
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::filesystem::path& path);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const SceneRecord& record);
  void finish();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::uint32_t count_ = 0;
  bool finished_ = false;
};

/// Random access over a dataset file without loading every image. The whole
/// file is validated when opened.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  std::size_t size() const { return offsets_.size(); }
  SceneRecord read(std::size_t index);

 private:
  std::ifstream in_;
  std::vector<std::uint64_t> offsets_;
};

}  // namespace psgnn
