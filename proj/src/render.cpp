#include "psgnn/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psgnn/errors.hpp"

namespace psgnn {

namespace {

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3 || image.dim(0) == 0 || image.dim(1) == 0) {
    throw DimensionError("expected an H x W x 3 image, got " + shape_str(image.shape()));
  }
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void put(Tensor& img, std::ptrdiff_t r, std::ptrdiff_t c, const double (&rgb)[3]) {
  const auto h = static_cast<std::ptrdiff_t>(img.dim(0)), w = static_cast<std::ptrdiff_t>(img.dim(1));
  if (r < 0 || c < 0 || r >= h || c >= w) return;
  auto d = img.mutable_data();
  for (int k = 0; k < 3; ++k) d[static_cast<std::size_t>((r * w + c) * 3 + k)] = rgb[k];
}

void line(Tensor& img, double x0, double y0, double x1, double y1, const double (&rgb)[3]) {
  const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  const auto steps = static_cast<int>(std::ceil(len)) + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const double x = x0 + t * (x1 - x0), y = y0 + t * (y1 - y0);
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) put(img, static_cast<std::ptrdiff_t>(std::floor(y)) + dy, static_cast<std::ptrdiff_t>(std::floor(x)) + dx, rgb);
  }
}

void circle(Tensor& img, double cx, double cy, double radius, const double (&rgb)[3]) {
  const int steps = 64;
  for (int s = 0; s < steps; ++s) {
    const double a0 = 2.0 * M_PI * s / steps, a1 = 2.0 * M_PI * (s + 1) / steps;
    line(img, cx + radius * std::cos(a0), cy + radius * std::sin(a0), cx + radius * std::cos(a1),
         cy + radius * std::sin(a1), rgb);
  }
}

// Skips whitespace and '#' comments in a PPM header.
int next_header_int(std::istream& in) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v) || v < 0) throw FormatError("malformed PPM header", static_cast<std::uint64_t>(std::max<std::streamoff>(0, in.tellg())));
  return v;
}

}  // namespace

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  check_image(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  std::vector<char> bytes(image.numel());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(to_byte(image[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image '" + path.string() + "'");
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6" && magic != "P3") throw FormatError("not a PPM image (bad magic)", 0);
  const int w = next_header_int(in), h = next_header_int(in), maxval = next_header_int(in);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) throw FormatError("unsupported PPM dimensions or maxval", 2);
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  std::vector<double> data(n);
  if (magic == "P6") {
    in.get();  // single whitespace byte after maxval
    const auto header_end = static_cast<std::uint64_t>(in.tellg());
    std::vector<unsigned char> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw FormatError("truncated PPM pixel data", header_end + static_cast<std::uint64_t>(in.gcount()));
    }
    for (std::size_t i = 0; i < n; ++i) data[i] = bytes[i] / static_cast<double>(maxval);
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = next_header_int(in) / static_cast<double>(maxval);
  }
  return Tensor({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3}, std::move(data));
}

Tensor draw_overlay(const Tensor& image, std::span<const SlotPrediction> predictions,
                    std::span<const MarkingPoint> extra_points) {
  check_image(image);
  Tensor out = image.detach();
  const double w = static_cast<double>(image.dim(1)), h = static_cast<double>(image.dim(0));
  // Map normalised coordinates to pixel centres, clamped to the raster.
  auto px = [&](double x, double y) {
    return std::pair{std::clamp(x * w, 0.0, w - 1.0), std::clamp(y * h, 0.0, h - 1.0)};
  };
  constexpr double kBlue[3] = {0.0, 0.2, 1.0};
  constexpr double kRed[3] = {1.0, 0.0, 0.0};
  for (const auto& p : predictions) {
    const auto [x1, y1] = px(p.x1, p.y1);
    const auto [x2, y2] = px(p.x2, p.y2);
    line(out, x1, y1, x2, y2, kBlue);
  }
  for (const auto& p : predictions) {
    const auto [x1, y1] = px(p.x1, p.y1);
    const auto [x2, y2] = px(p.x2, p.y2);
    circle(out, x1, y1, kOverlayCircleRadiusPx, kRed);
    circle(out, x2, y2, kOverlayCircleRadiusPx, kRed);
  }
  for (const auto& p : extra_points) {
    const auto [x, y] = px(p.x, p.y);
    circle(out, x, y, kOverlayCircleRadiusPx, kRed);
  }
  return out;
}

void render_overlay(const Tensor& image, std::span<const SlotPrediction> predictions,
                    const std::filesystem::path& out_path, std::span<const MarkingPoint> extra_points) {
  write_ppm(draw_overlay(image, predictions, extra_points), out_path);
}

}  // namespace psgnn
