#include "psgnn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "psgnn/binary_io.hpp"
#include "psgnn/config.hpp"
#include "psgnn/errors.hpp"
#include "psgnn/random.hpp"

namespace psgnn {

namespace {

using Vec2 = std::array<double, 2>;

Vec2 operator+(Vec2 a, Vec2 b) { return {a[0] + b[0], a[1] + b[1]}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a[0] - b[0], a[1] - b[1]}; }
Vec2 operator*(double s, Vec2 a) { return {s * a[0], s * a[1]}; }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a, ap = p - a;
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1];
  const double t = len2 > 0.0 ? std::clamp((ap[0] * ab[0] + ap[1] * ab[1]) / len2, 0.0, 1.0) : 0.0;
  const Vec2 d = p - (a + t * ab);
  return std::hypot(d[0], d[1]);
}

constexpr int kMaxAttempts = 100;
constexpr double kSideLineProbe = 0.12;  // this much of each side line must stay on the image
constexpr std::size_t kPixels = kImageSize * kImageSize;

class Canvas {
 public:
  Canvas() : px_(kPixels * 3, 0.0) {}

  double* at(std::size_t r, std::size_t c) { return px_.data() + (r * kImageSize + c) * 3; }
  std::vector<double>& pixels() { return px_; }

  void blend(std::size_t r, std::size_t c, const Color& color, double alpha) {
    double* p = at(r, c);
    for (int k = 0; k < 3; ++k) p[k] = p[k] * (1.0 - alpha) + color[k] * alpha;
  }

  // Anti-aliased segment with round caps; endpoints in normalised units.
  void segment(Vec2 a, Vec2 b, double thickness_px, const Color& color, double opacity) {
    const double s = static_cast<double>(kImageSize);
    const Vec2 pa = s * a, pb = s * b;
    const double reach = thickness_px / 2.0 + 1.0;
    const auto lo_c = clamp_px(std::min(pa[0], pb[0]) - reach), hi_c = clamp_px(std::max(pa[0], pb[0]) + reach);
    const auto lo_r = clamp_px(std::min(pa[1], pb[1]) - reach), hi_r = clamp_px(std::max(pa[1], pb[1]) + reach);
    for (auto r = lo_r; r <= hi_r; ++r) {
      for (auto c = lo_c; c <= hi_c; ++c) {
        const Vec2 centre{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
        const double cover = std::clamp(thickness_px / 2.0 + 0.5 - point_segment_distance(centre, pa, pb), 0.0, 1.0);
        if (cover > 0.0) blend(r, c, color, cover * opacity);
      }
    }
  }

  // Soft-edged filled ellipse.
  void blob(Vec2 centre, double rx, double ry, const Color& color, double opacity) {
    const double s = static_cast<double>(kImageSize);
    const Vec2 pc = s * centre;
    const double rxp = rx * s, ryp = ry * s;
    const auto lo_c = clamp_px(pc[0] - rxp - 1), hi_c = clamp_px(pc[0] + rxp + 1);
    const auto lo_r = clamp_px(pc[1] - ryp - 1), hi_r = clamp_px(pc[1] + ryp + 1);
    for (auto r = lo_r; r <= hi_r; ++r) {
      for (auto c = lo_c; c <= hi_c; ++c) {
        const double dx = (static_cast<double>(c) + 0.5 - pc[0]) / rxp;
        const double dy = (static_cast<double>(r) + 0.5 - pc[1]) / ryp;
        const double rho = std::sqrt(dx * dx + dy * dy);
        const double cover = std::clamp((1.0 - rho) * std::min(rxp, ryp) + 0.5, 0.0, 1.0);
        if (cover > 0.0) blend(r, c, color, cover * opacity);
      }
    }
  }

 private:
  static std::size_t clamp_px(double v) {
    return static_cast<std::size_t>(std::clamp(std::floor(v), 0.0, static_cast<double>(kImageSize - 1)));
  }

  std::vector<double> px_;
};

// Coarse random grid, bilinearly upsampled to the image.
std::vector<double> value_noise(Rng& rng, std::size_t grid, double amplitude) {
  std::vector<double> knots(grid * grid);
  for (auto& k : knots) k = rng.normal() * amplitude;
  std::vector<double> field(kPixels);
  const double step = static_cast<double>(grid - 1) / static_cast<double>(kImageSize);
  for (std::size_t r = 0; r < kImageSize; ++r) {
    const double gy = (static_cast<double>(r) + 0.5) * step;
    const auto y0 = std::min(static_cast<std::size_t>(gy), grid - 2);
    const double fy = gy - static_cast<double>(y0);
    for (std::size_t c = 0; c < kImageSize; ++c) {
      const double gx = (static_cast<double>(c) + 0.5) * step;
      const auto x0 = std::min(static_cast<std::size_t>(gx), grid - 2);
      const double fx = gx - static_cast<double>(x0);
      field[r * kImageSize + c] = (1 - fy) * ((1 - fx) * knots[y0 * grid + x0] + fx * knots[y0 * grid + x0 + 1]) +
                                  fy * ((1 - fx) * knots[(y0 + 1) * grid + x0] + fx * knots[(y0 + 1) * grid + x0 + 1]);
    }
  }
  return field;
}

struct Segment {
  Vec2 a, b;
};

std::vector<Segment> slot_lines(const SceneLayout& layout) {
  std::vector<Segment> lines;
  for (const auto& s : layout.slots) {
    lines.push_back({s.p1, s.p2});
    lines.push_back({s.p2, s.p3});
    lines.push_back({s.p1, s.p4});
  }
  return lines;
}

void render(const SceneConfig& config, const SceneLayout& layout, Rng& rng, Canvas& canvas) {
  const Color base = config.palette[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(config.palette.size()) - 1))];
  const double tint = rng.uniform(0.85, 1.15);
  const auto coarse = value_noise(rng, 9, 0.05);
  const auto fine = value_noise(rng, 65, 0.02);
  auto& px = canvas.pixels();
  for (std::size_t i = 0; i < kPixels; ++i) {
    for (int k = 0; k < 3; ++k) px[i * 3 + k] = base[k] * tint + coarse[i] + fine[i];
  }

  // Distractors sit under the paint: stains, patches and stray thin lines
  // kept away from the marking-points.
  for (std::size_t d = 0; d < config.distractors; ++d) {
    if (rng.bernoulli(0.5)) {
      const Vec2 c{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
      const double shade = rng.bernoulli(0.7) ? rng.uniform(0.05, 0.2) : rng.uniform(0.5, 0.7);
      canvas.blob(c, rng.uniform(0.02, 0.07), rng.uniform(0.02, 0.07), {shade, shade, shade * 0.95}, rng.uniform(0.4, 0.8));
    } else {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const Vec2 a{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
        const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double len = rng.uniform(0.08, 0.3);
        const Vec2 b = a + len * Vec2{std::cos(ang), std::sin(ang)};
        const double width = rng.uniform(1.0, 2.0);
        const double shade = rng.uniform(0.5, 0.75);
        const double opacity = rng.uniform(0.4, 0.7);
        const bool clear = std::all_of(layout.points.begin(), layout.points.end(), [&](const MarkingPoint& p) {
          return point_segment_distance({p.x, p.y}, a, b) >= 0.06;
        });
        if (clear) {
          canvas.segment(a, b, width, {shade, shade * 0.95, shade * 0.7}, opacity);
          break;
        }
      }
    }
  }

  const bool yellow = rng.bernoulli(0.25);
  const double brightness = rng.uniform(0.85, 1.0);
  const Color paint = yellow ? Color{0.95 * brightness, 0.82 * brightness, 0.25 * brightness}
                             : Color{brightness, brightness, brightness * 0.98};
  const double thickness = rng.uniform(config.line_thickness_min_px, config.line_thickness_max_px);
  for (const auto& line : slot_lines(layout)) canvas.segment(line.a, line.b, thickness, paint, rng.uniform(0.85, 1.0));

  for (auto& v : px) v = static_cast<double>(static_cast<float>(std::clamp(v + rng.normal() * config.noise_sigma, 0.0, 1.0)));
}

}  // namespace

void validate(const SceneConfig& c) {
  if (c.slots_min == 0 || c.slots_min > c.slots_max) throw ParameterError("slot count range must satisfy 1 <= min <= max");
  if (!(c.slot_width_min > 0.0 && c.slot_width_min <= c.slot_width_max)) throw ParameterError("invalid slot width range");
  if (!(c.slot_depth_min > 0.0 && c.slot_depth_min <= c.slot_depth_max)) throw ParameterError("invalid slot depth range");
  if (!(c.gap_min >= 0.0 && c.gap_min <= c.gap_max)) throw ParameterError("invalid gap range");
  if (!(c.gap_probability >= 0.0 && c.gap_probability <= 1.0)) throw ParameterError("gap probability outside [0, 1]");
  if (!(c.line_thickness_min_px > 0.0 && c.line_thickness_min_px <= c.line_thickness_max_px)) {
    throw ParameterError("invalid line thickness range");
  }
  if (!(c.noise_sigma >= 0.0)) throw ParameterError("noise amplitude must be non-negative");
  if (!(c.rotation_jitter >= 0.0)) throw ParameterError("rotation jitter must be non-negative");
  if (c.palette.empty()) throw ParameterError("background palette is empty");
}

double signed_area(const SlotGeometry& s) {
  const std::array<Vec2, 4> v{s.p1, s.p2, s.p3, s.p4};
  double twice = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % 4];
    twice += a[0] * b[1] - b[0] * a[1];
  }
  return twice / 2.0;
}

bool identical(const SceneRecord& a, const SceneRecord& b) {
  if (a.seed != b.seed || a.points != b.points || a.entrance_pairs != b.entrance_pairs) return false;
  if (a.image.shape() != b.image.shape()) return false;
  return std::memcmp(a.image.data().data(), b.image.data().data(), a.image.numel() * sizeof(double)) == 0;
}

SceneLayout layout_scene(const SceneConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(mix_seed(seed, 0));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto n_slots = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(config.slots_min), static_cast<std::int64_t>(config.slots_max)));
    const double heading = static_cast<double>(rng.uniform_int(0, 3)) * std::numbers::pi / 2.0 +
                           rng.uniform(-config.rotation_jitter, config.rotation_jitter);
    const Vec2 along{std::cos(heading), std::sin(heading)};
    const Vec2 inward{-along[1], along[0]};
    const double depth = rng.uniform(config.slot_depth_min, config.slot_depth_max);

    // Corner positions along the row; neighbouring slots share a corner
    // unless a gap separates them.
    std::vector<double> corners{0.0};
    std::vector<std::pair<std::size_t, std::size_t>> slot_corners;
    for (std::size_t k = 0; k < n_slots; ++k) {
      if (k > 0 && rng.bernoulli(config.gap_probability)) {
        corners.push_back(corners.back() + rng.uniform(config.gap_min, config.gap_max));
      }
      const auto start = corners.size() - 1;
      corners.push_back(corners.back() + rng.uniform(config.slot_width_min, config.slot_width_max));
      slot_corners.emplace_back(start, corners.size() - 1);
    }

    // Feasible origins: every corner inside the margin box and a stretch of
    // each side line inside the image.
    Vec2 lo{-1e9, -1e9}, hi{1e9, 1e9};
    for (double s : corners) {
      const Vec2 rel = s * along;
      const Vec2 probe = rel + kSideLineProbe * inward;
      for (int k = 0; k < 2; ++k) {
        lo[k] = std::max({lo[k], kPointMargin - rel[k], 0.0 - probe[k]});
        hi[k] = std::min({hi[k], 1.0 - kPointMargin - rel[k], 1.0 - probe[k]});
      }
    }
    const Vec2 origin_lo = lo, origin_hi = hi;
    const Vec2 origin{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    if (origin_lo[0] > origin_hi[0] || origin_lo[1] > origin_hi[1]) continue;
    const Vec2 o{origin_lo[0] + origin[0] * (origin_hi[0] - origin_lo[0]),
                 origin_lo[1] + origin[1] * (origin_hi[1] - origin_lo[1])};

    SceneLayout layout;
    for (double s : corners) {
      const Vec2 p = o + s * along;
      layout.points.push_back({p[0], p[1], 1.0});
    }
    bool separated = true;
    for (std::size_t i = 0; i < layout.points.size() && separated; ++i) {
      for (std::size_t j = i + 1; j < layout.points.size(); ++j) {
        if (std::hypot(layout.points[i].x - layout.points[j].x, layout.points[i].y - layout.points[j].y) <
            kMinPointSeparation) {
          separated = false;
          break;
        }
      }
    }
    if (!separated) continue;

    for (auto [a, b] : slot_corners) {
      SlotGeometry slot;
      slot.p1 = {layout.points[a].x, layout.points[a].y};
      slot.p2 = {layout.points[b].x, layout.points[b].y};
      slot.p3 = slot.p2 + depth * inward;
      slot.p4 = slot.p1 + depth * inward;
      if (signed_area(slot) > 0.0) {
        std::swap(a, b);
        slot = {slot.p2, slot.p1, slot.p4, slot.p3};
      }
      layout.slots.push_back(slot);
      layout.entrance_pairs.push_back({a, b});
    }
    return layout;
  }
  throw GenerationError("could not place " + std::to_string(config.slots_max) + " slots after " +
                        std::to_string(kMaxAttempts) + " attempts (seed " + std::to_string(seed) + ")");
}

SceneRecord generate_scene(const SceneConfig& config, std::uint64_t seed) {
  const SceneLayout layout = layout_scene(config, seed);
  Rng rng(mix_seed(seed, 1));
  Canvas canvas;
  render(config, layout, rng, canvas);
  SceneRecord record;
  record.image = Tensor({kImageSize, kImageSize, kImageChannels}, std::move(canvas.pixels()));
  record.points = layout.points;
  record.entrance_pairs = layout.entrance_pairs;
  record.seed = seed;
  return record;
}

namespace {

constexpr char kMagic[4] = {'P', 'S', 'G', 'D'};
constexpr std::uint32_t kMaxPointsPerRecord = 1024;
constexpr std::uint64_t kImageBytes = kPixels * kImageChannels * sizeof(float);

void write_record(BinaryWriter& w, const SceneRecord& r) {
  if (r.image.shape() != Shape{kImageSize, kImageSize, kImageChannels}) {
    throw DimensionError("dataset records hold " + shape_str({kImageSize, kImageSize, kImageChannels}) +
                         " images, got " + shape_str(r.image.shape()));
  }
  w.put(r.seed);
  w.put(static_cast<std::uint32_t>(r.points.size()));
  for (const auto& p : r.points) {
    w.put(p.x);
    w.put(p.y);
  }
  w.put(static_cast<std::uint32_t>(r.entrance_pairs.size()));
  for (const auto& p : r.entrance_pairs) {
    w.put(static_cast<std::uint32_t>(p.first));
    w.put(static_cast<std::uint32_t>(p.second));
  }
  std::vector<float> pixels(r.image.numel());
  std::transform(r.image.data().begin(), r.image.data().end(), pixels.begin(),
                 [](double v) { return static_cast<float>(v); });
  w.put_bytes(pixels.data(), pixels.size() * sizeof(float));
}

SceneRecord read_record(BinaryReader& r) {
  SceneRecord rec;
  rec.seed = r.get<std::uint64_t>("record seed");
  const auto points_at = r.offset();
  const auto n_points = r.get<std::uint32_t>("point count");
  if (n_points > kMaxPointsPerRecord) throw FormatError("implausible point count", points_at);
  rec.points.resize(n_points);
  for (auto& p : rec.points) {
    p.x = r.get<double>("point x");
    p.y = r.get<double>("point y");
    p.confidence = 1.0;
  }
  const auto pairs_at = r.offset();
  const auto n_pairs = r.get<std::uint32_t>("pair count");
  if (n_pairs > kMaxPointsPerRecord * kMaxPointsPerRecord) throw FormatError("implausible pair count", pairs_at);
  rec.entrance_pairs.resize(n_pairs);
  for (auto& p : rec.entrance_pairs) {
    const auto at = r.offset();
    p.first = r.get<std::uint32_t>("pair index");
    p.second = r.get<std::uint32_t>("pair index");
    if (p.first >= n_points || p.second >= n_points || p.first == p.second) {
      throw FormatError("entrance pair references an invalid point", at);
    }
  }
  std::vector<float> pixels(kPixels * kImageChannels);
  r.get_bytes(pixels.data(), kImageBytes, "image");
  rec.image = Tensor({kImageSize, kImageSize, kImageChannels}, std::vector<double>(pixels.begin(), pixels.end()));
  return rec;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  BinaryWriter w(out_);
  w.put_bytes(kMagic, sizeof kMagic);
  w.put(kDatasetVersion);
  w.put(std::uint32_t{0});
}

DatasetWriter::~DatasetWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void DatasetWriter::append(const SceneRecord& record) {
  if (finished_) throw std::logic_error("DatasetWriter: append after finish");
  BinaryWriter w(out_);
  write_record(w, record);
  ++count_;
}

void DatasetWriter::finish() {
  if (finished_) return;
  finished_ = true;
  out_.seekp(8);
  BinaryWriter(out_).put(count_);
  out_.flush();
  if (!out_) throw std::runtime_error("failed writing dataset '" + path_.string() + "'");
  out_.close();
}

void write_dataset(const std::vector<SceneRecord>& records, const std::filesystem::path& path) {
  DatasetWriter writer(path);
  for (const auto& r : records) writer.append(r);
  writer.finish();
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  const auto file_size = std::filesystem::file_size(path);
  BinaryReader r(in_);
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a dataset file (bad magic)", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version), 4);
  const auto count = r.get<std::uint32_t>("record count");
  offsets_.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    offsets_.push_back(r.offset());
    r.skip(8, "record seed");
    const auto points_at = r.offset();
    const auto n_points = r.get<std::uint32_t>("point count");
    if (n_points > kMaxPointsPerRecord) throw FormatError("implausible point count", points_at);
    if (r.offset() + 16ULL * n_points > file_size) throw FormatError("truncated file inside point list", file_size);
    r.skip(16ULL * n_points, "points");
    const auto n_pairs = r.get<std::uint32_t>("pair count");
    const auto tail = 8ULL * n_pairs + kImageBytes;
    if (r.offset() + tail > file_size) throw FormatError("truncated file inside record " + std::to_string(i), file_size);
    r.skip(tail, "pairs and image");
  }
  if (r.offset() != file_size) throw FormatError("trailing bytes after last record", r.offset());
}

SceneRecord DatasetReader::read(std::size_t index) {
  if (index >= offsets_.size()) throw std::out_of_range("dataset index " + std::to_string(index) + " out of range");
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offsets_[index]));
  BinaryReader r(in_, offsets_[index]);
  return read_record(r);
}

std::vector<SceneRecord> read_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  std::vector<SceneRecord> records;
  records.reserve(reader.size());
  for (std::size_t i = 0; i < reader.size(); ++i) records.push_back(reader.read(i));
  return records;
}

}  // namespace psgnn
