#include "psgnn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "psgnn/errors.hpp"

namespace psgnn {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

template <typename... Ts>
bool tracking(const Ts&... inputs) {
  return Tape::active() != nullptr && (inputs.requires_grad() || ...);
}

Tensor make_output(Shape shape, std::vector<double> data, bool track) {
  return Tensor(std::move(shape), std::move(data), track);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Elementwise unary op with a derivative expressed through input and output.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  const bool track = tracking(x);
  Tensor y = make_output(x.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([xn = x.node(), yn = y.node(), deriv] {
      if (yn->grad.empty()) return;
      auto& gx = xn->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += yn->grad[i] * deriv(xn->data[i], yn->data[i]);
    });
  }
  return y;
}

// Kernel columns [lo, hi) whose input column x0 + kx lies inside [0, width).
std::pair<std::size_t, std::size_t> valid_taps(std::ptrdiff_t x0, std::size_t kw, std::size_t width) {
  const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -x0));
  const auto hi = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(width) - x0, 0, static_cast<std::ptrdiff_t>(kw)));
  return {std::min(lo, hi), hi};
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  if (m && n && k) {
    MatMap(out.data(), m, n).noalias() =
        ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  }
  const bool track = tracking(a, b);
  Tensor c = make_output({m, n}, std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), bn = b.node(), cn = c.node(), m, k, n] {
      if (cn->grad.empty() || !m || !n || !k) return;
      ConstMatMap dc(cn->grad.data(), m, n);
      if (an->requires_grad) {
        MatMap(an->grad_buffer().data(), m, k).noalias() += dc * ConstMatMap(bn->data.data(), k, n).transpose();
      }
      if (bn->requires_grad) {
        MatMap(bn->grad_buffer().data(), k, n).noalias() += ConstMatMap(an->data.data(), m, k).transpose() * dc;
      }
    });
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const auto r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  const auto in = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  const bool track = tracking(a);
  Tensor t = make_output({c, r}, std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), tn = t.node(), r, c] {
      if (tn->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += tn->grad[j * r + i];
    });
  }
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool track = tracking(a, b);
  Tensor c = make_output(a.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), bn = b.node(), cn = c.node()] {
      if (cn->grad.empty()) return;
      if (an->requires_grad) an->accumulate(cn->grad);
      if (bn->requires_grad) bn->accumulate(cn->grad);
    });
  }
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const bool track = tracking(a, b);
  Tensor c = make_output(a.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), bn = b.node(), cn = c.node()] {
      if (cn->grad.empty()) return;
      if (an->requires_grad) an->accumulate(cn->grad);
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= cn->grad[i];
      }
    });
  }
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool track = tracking(a, b);
  Tensor c = make_output(a.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), bn = b.node(), cn = c.node()] {
      if (cn->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += cn->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += cn->grad[i] * an->data[i];
      }
    });
  }
  return c;
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double v) { return v * v; }, [](double x, double) { return 2.0 * x; });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const auto width = bias.dim(0);
  if (a.rank() == 0 || a.shape().back() != width) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not fit " + shape_str(a.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto rows = width ? out.size() / width : 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] += bias[c];
  const bool track = tracking(a, bias);
  Tensor y = make_output(a.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), bn = bias.node(), yn = y.node(), rows, width] {
      if (yn->grad.empty()) return;
      if (an->requires_grad) an->accumulate(yn->grad);
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < width; ++c) g[c] += yn->grad[r * width + c];
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& logits) {
  if (logits.numel() == 0 || logits.rank() == 0) throw DimensionError("softmax: empty input");
  const auto width = logits.shape().back();
  if (width == 0) throw DimensionError("softmax: empty input");
  const auto rows = logits.numel() / width;
  std::vector<double> out(logits.numel());
  const auto in = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * width;
    double* dst = out.data() + r * width;
    const double mx = *std::max_element(row, row + width);
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) total += dst[c] = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < width; ++c) dst[c] /= total;
  }
  const bool track = tracking(logits);
  Tensor y = make_output(logits.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([xn = logits.node(), yn = y.node(), rows, width] {
      if (yn->grad.empty()) return;
      auto& g = xn->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = yn->data.data() + r * width;
        const double* gy = yn->grad.data() + r * width;
        double dot = 0.0;
        for (std::size_t c = 0; c < width; ++c) dot += gy[c] * yr[c];
        for (std::size_t c = 0; c < width; ++c) g[r * width + c] += yr[c] * (gy[c] - dot);
      }
    });
  }
  return y;
}

Tensor standardize_rows(const Tensor& x, double eps) {
  const auto width = x.shape().back();
  const auto rows = x.numel() / width;
  std::vector<double> out(x.numel()), inv_sd(rows);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * width;
    double mean = 0.0;
    for (std::size_t c = 0; c < width; ++c) mean += row[c];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(width);
    inv_sd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = (row[c] - mean) * inv_sd[r];
  }
  const bool track = tracking(x);
  Tensor y = make_output(x.shape(), std::move(out), track);
  if (track) {
    Tape::active()->record([xn = x.node(), yn = y.node(), rows, width, inv_sd = std::move(inv_sd)] {
      if (yn->grad.empty()) return;
      auto& g = xn->grad_buffer();
      const double w = static_cast<double>(width);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = yn->data.data() + r * width;
        const double* gy = yn->grad.data() + r * width;
        double mg = 0.0, mgy = 0.0;
        for (std::size_t c = 0; c < width; ++c) {
          mg += gy[c];
          mgy += gy[c] * yr[c];
        }
        mg /= w;
        mgy /= w;
        for (std::size_t c = 0; c < width; ++c) g[r * width + c] += inv_sd[r] * (gy[c] - mg - yr[c] * mgy);
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const bool track = tracking(a);
  Tensor s = make_output({1}, {total}, track);
  if (track) {
    Tape::active()->record([an = a.node(), sn = s.node()] {
      if (sn->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (auto& v : g) v += sn->grad[0];
    });
  }
  return s;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  const bool track = tracking(a);
  Tensor y = make_output(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), track);
  if (track) {
    Tape::active()->record([an = a.node(), yn = y.node()] {
      if (!yn->grad.empty()) an->accumulate(yn->grad);
    });
  }
  return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const auto rows = a.dim(0), ca = a.dim(1), cb = b.dim(1), cw = ca + cb;
  std::vector<double> out(rows * cw);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * ca, ca, out.data() + r * cw);
    std::copy_n(b.data().data() + r * cb, cb, out.data() + r * cw + ca);
  }
  const bool track = tracking(a, b);
  Tensor y = make_output({rows, cw}, std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), bn = b.node(), yn = y.node(), rows, ca, cb, cw] {
      if (yn->grad.empty()) return;
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < ca; ++c) g[r * ca + c] += yn->grad[r * cw + c];
      }
      if (bn->requires_grad) {
        auto& g = bn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cb; ++c) g[r * cb + c] += yn->grad[r * cw + ca + c];
      }
    });
  }
  return y;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_cols");
  if (begin > end || end > a.dim(1)) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + shape_str(a.shape()));
  }
  const auto rows = a.dim(0), cols = a.dim(1), w = end - begin;
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(a.data().data() + r * cols + begin, w, out.data() + r * w);
  const bool track = tracking(a);
  Tensor y = make_output({rows, w}, std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), yn = y.node(), rows, cols, begin, w] {
      if (yn->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) g[r * cols + begin + c] += yn->grad[r * w + c];
    });
  }
  return y;
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank(a, 2, "gather_rows");
  const auto n = a.dim(0), cols = a.dim(1);
  std::vector<std::size_t> index(rows.begin(), rows.end());
  std::vector<double> out(index.size() * cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= n) throw DimensionError("gather_rows: row " + std::to_string(index[r]) + " outside " + shape_str(a.shape()));
    std::copy_n(a.data().data() + index[r] * cols, cols, out.data() + r * cols);
  }
  const bool track = tracking(a);
  Tensor y = make_output({index.size(), cols}, std::move(out), track);
  if (track) {
    Tape::active()->record([an = a.node(), yn = y.node(), index = std::move(index), cols] {
      if (yn->grad.empty()) return;
      auto& g = an->grad_buffer();
      for (std::size_t r = 0; r < index.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) g[index[r] * cols + c] += yn->grad[r * cols + c];
    });
  }
  return y;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (stride == 0) throw ParameterError("conv2d: stride must be positive");
  const auto h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const auto kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  if (kernel.dim(2) != cin) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " does not match input channels of " +
                         shape_str(input.shape()));
  }
  if (kh == 0 || kw == 0 || kh > h + 2 * padding || kw > w + 2 * padding) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                         shape_str(input.shape()));
  }
  const auto oh = (h + 2 * padding - kh) / stride + 1;
  const auto ow = (w + 2 * padding - kw) / stride + 1;
  const auto patch = kh * kw * cin;
  const auto rows = oh * ow;

  // im2col: one row per output pixel, columns ordered (ky, kx, cin) to match
  // the kernel's row-major flattening. Within one (ky) tap row the valid kx
  // taps are contiguous in the HWC input, so they are copied as one run.
  std::shared_ptr<double[]> cols(new double[rows * patch]);
  const double* src = input.data().data();
  const auto ph = static_cast<std::ptrdiff_t>(padding);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* dst = cols.get() + (oy * ow + ox) * patch;
      const auto x0 = static_cast<std::ptrdiff_t>(ox * stride) - ph;
      const auto [kx_lo, kx_hi] = valid_taps(x0, kw, w);
      for (std::size_t ky = 0; ky < kh; ++ky) {
        double* tap_row = dst + ky * kw * cin;
        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - ph;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || kx_lo >= kx_hi) {
          std::fill_n(tap_row, kw * cin, 0.0);
          continue;
        }
        std::fill_n(tap_row, kx_lo * cin, 0.0);
        std::copy_n(src + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(x0 + static_cast<std::ptrdiff_t>(kx_lo))) * cin,
                    (kx_hi - kx_lo) * cin, tap_row + kx_lo * cin);
        std::fill_n(tap_row + kx_hi * cin, (kw - kx_hi) * cin, 0.0);
      }
    }
  }

  std::vector<double> out(rows * cout);
  MatMap(out.data(), rows, cout).noalias() =
      ConstMatMap(cols.get(), rows, patch) * ConstMatMap(kernel.data().data(), patch, cout);

  const bool track = tracking(input, kernel);
  Tensor y = make_output({oh, ow, cout}, std::move(out), track);
  if (track) {
    Tape::active()->record([in = input.node(), kn = kernel.node(), yn = y.node(), cols, h, w, cin, kh, kw, cout, oh,
                            ow, stride, padding, patch, rows] {
      if (yn->grad.empty()) return;
      ConstMatMap dy(yn->grad.data(), rows, cout);
      if (kn->requires_grad) {
        MatMap(kn->grad_buffer().data(), patch, cout).noalias() +=
            ConstMatMap(cols.get(), rows, patch).transpose() * dy;
      }
      if (in->requires_grad) {
        RowMat dcols = dy * ConstMatMap(kn->data.data(), patch, cout).transpose();
        auto& g = in->grad_buffer();
        const auto ph = static_cast<std::ptrdiff_t>(padding);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* dc = dcols.data() + (oy * ow + ox) * patch;
            const auto x0 = static_cast<std::ptrdiff_t>(ox * stride) - ph;
            const auto [kx_lo, kx_hi] = valid_taps(x0, kw, w);
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - ph;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              double* gp = g.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(x0 + static_cast<std::ptrdiff_t>(kx_lo))) * cin;
              const double* dp = dc + (ky * kw + kx_lo) * cin;
              for (std::size_t c = 0; c < (kx_hi - kx_lo) * cin; ++c) gp[c] += dp[c];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask = Tensor::zeros(x.shape());
  for (auto& m : mask.mutable_data()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mul(x, mask);
}

Tensor binary_cross_entropy(const Tensor& probs, const Tensor& labels, double eps) {
  require_same_shape(probs, labels, "binary_cross_entropy");
  const auto n = probs.numel();
  if (n == 0) return Tensor::scalar(0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs[i], eps, 1.0 - eps);
    const double l = labels[i];
    total -= l * std::log(p) + (1.0 - l) * std::log(1.0 - p);
  }
  const bool track = tracking(probs);
  Tensor loss = make_output({1}, {total / static_cast<double>(n)}, track);
  if (track) {
    Tape::active()->record([pn = probs.node(), ln = labels.node(), out = loss.node(), n, eps] {
      if (out->grad.empty()) return;
      auto& g = pn->grad_buffer();
      const double upstream = out->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = pn->data[i];
        if (p <= eps || p >= 1.0 - eps) continue;  // clamp is flat here
        const double l = ln->data[i];
        g[i] += upstream * (-(l / p) + (1.0 - l) / (1.0 - p));
      }
    });
  }
  return loss;
}

Tensor bilinear_sample(const Tensor& map, const Tensor& points) {
  require_rank(map, 3, "bilinear_sample map");
  require_rank(points, 2, "bilinear_sample points");
  if (points.dim(1) != 2) throw DimensionError("bilinear_sample: points must be N x 2, got " + shape_str(points.shape()));
  const auto h = map.dim(0), w = map.dim(1), c = map.dim(2);
  if (h == 0 || w == 0) throw DimensionError("bilinear_sample: empty map");
  const auto n = points.dim(0);

  struct Tap {
    std::size_t cell[4];
    double weight[4];
  };
  std::vector<Tap> taps(n);
  std::vector<double> out(n * c, 0.0);
  auto axis = [](double v, std::size_t size, std::size_t& lo, std::size_t& hi, double& frac) {
    const double g = std::clamp(v, 0.0, 1.0) * static_cast<double>(size - 1);
    if (size == 1) {
      lo = hi = 0;
      frac = 0.0;
      return;
    }
    lo = std::min(static_cast<std::size_t>(std::floor(g)), size - 2);
    hi = lo + 1;
    frac = g - static_cast<double>(lo);
  };
  const double* m = map.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x0, x1, y0, y1;
    double fx, fy;
    axis(points[2 * i], w, x0, x1, fx);
    axis(points[2 * i + 1], h, y0, y1, fy);
    Tap& t = taps[i];
    t.cell[0] = y0 * w + x0;
    t.cell[1] = y0 * w + x1;
    t.cell[2] = y1 * w + x0;
    t.cell[3] = y1 * w + x1;
    t.weight[0] = (1.0 - fy) * (1.0 - fx);
    t.weight[1] = (1.0 - fy) * fx;
    t.weight[2] = fy * (1.0 - fx);
    t.weight[3] = fy * fx;
    for (std::size_t k = 0; k < c; ++k) {
      out[i * c + k] = (1.0 - fy) * ((1.0 - fx) * m[t.cell[0] * c + k] + fx * m[t.cell[1] * c + k]) +
                       fy * ((1.0 - fx) * m[t.cell[2] * c + k] + fx * m[t.cell[3] * c + k]);
    }
  }
  const bool track = tracking(map);
  Tensor y = make_output({n, c}, std::move(out), track);
  if (track) {
    Tape::active()->record([mn = map.node(), yn = y.node(), taps = std::move(taps), c] {
      if (yn->grad.empty()) return;
      auto& g = mn->grad_buffer();
      for (std::size_t i = 0; i < taps.size(); ++i)
        for (int q = 0; q < 4; ++q)
          for (std::size_t k = 0; k < c; ++k) g[taps[i].cell[q] * c + k] += taps[i].weight[q] * yn->grad[i * c + k];
    });
  }
  return y;
}

GradCheckResult grad_check(const std::function<Tensor()>& f, Tensor x, double step, double abs_floor,
                           std::size_t max_coords) {
  const bool was_tracked = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
    const auto g = x.grad();
    analytic.assign(g.begin(), g.end());
  }
  x.zero_grad();
  x.set_requires_grad(was_tracked);

  const auto n = x.numel();
  std::vector<std::size_t> coords;
  if (max_coords == 0 || max_coords >= n) {
    for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (std::size_t k = 0; k < max_coords; ++k) coords.push_back((2 * k + 1) * n / (2 * max_coords));
  }

  GradCheckResult result;
  Tape::Pause pause;
  auto data = x.mutable_data();
  for (auto i : coords) {
    const double saved = data[i];
    data[i] = saved + step;
    const double up = f().item();
    data[i] = saved - step;
    const double down = f().item();
    data[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(numeric - analytic[i]);
    result.max_absolute_error = std::max(result.max_absolute_error, err);
    if (err > abs_floor) {
      const double denom = std::max(std::abs(numeric), std::abs(analytic[i]));
      result.max_relative_error = std::max(result.max_relative_error, err / denom);
    }
    ++result.checked;
  }
  return result;
}

}  // namespace psgnn
