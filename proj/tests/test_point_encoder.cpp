#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "psgnn/encoder.hpp"
#include "psgnn/errors.hpp"
#include "psgnn/ops.hpp"
#include "test_support.hpp"

using namespace psgnn;
using psgnn::testing::max_abs_diff;
using psgnn::testing::random_tensor;

namespace {

ModelParams encoder_model(std::uint64_t seed, bool use_pos = true) {
  ModelConfig cfg;
  cfg.use_pos_encoder = use_pos;
  ModelParams p(cfg);
  Rng rng(seed);
  add_encoder_params(p, rng);
  return p;
}

void fill(ModelParams& p, std::string_view prefix, double value) {
  for (const auto& [path, t] : p.tensors()) {
    if (path.starts_with(prefix)) {
      Tensor copy = t;
      for (auto& v : copy.mutable_data()) v = value;
    }
  }
}

Tensor points(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<double> d;
  for (const auto& [x, y] : xy) {
    d.push_back(x);
    d.push_back(y);
  }
  return Tensor({xy.size(), 2}, d);
}

}  // namespace

TEST(Encoder, ZeroInputZeroBiasGivesZero) {
  ModelParams p = encoder_model(1);
  for (int l = 0; l < 4; ++l) fill(p, "encoder.conv" + std::to_string(l) + ".bias", 0.0);
  const Tensor y = encoder_forward(Tensor::zeros({kGridSize, kGridSize, kFeatureChannels}), p);
  ASSERT_EQ(y.shape(), (Shape{kGridSize, kGridSize, kNodeWidth}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, ShapeMismatchThrows) {
  const ModelParams p = encoder_model(2);
  EXPECT_THROW(encoder_forward(Tensor::zeros({kGridSize, kGridSize, 32}), p), DimensionError);
}

TEST(Encoder, GradientThroughEncoder) {
  const ModelParams p = encoder_model(3);
  Rng rng(4);
  Tensor features = random_tensor({kGridSize, kGridSize, kFeatureChannels}, rng, 0, 1, true);
  const Tensor pts = points({{0.2, 0.3}, {0.77, 0.61}});
  auto f = [&] { return sum(square(bilinear_sample(encoder_forward(features, p), pts))); };
  EXPECT_LT(psgnn::testing::check_gradient(f, features, 40).max_relative_error, 1e-4);
  for (const char* path : {"encoder.conv0.kernel", "encoder.conv3.kernel", "encoder.conv3.bias"}) {
    EXPECT_LT(psgnn::testing::check_gradient(f, p.at(path), 30).max_relative_error, 1e-4) << path;
  }
}

TEST(Bilinear, KnotReturnsCellExactly) {
  Rng rng(5);
  const Tensor map = random_tensor({kGridSize, kGridSize, kNodeWidth}, rng);
  for (auto [i, j] : {std::pair{0, 0}, {3, 7}, {15, 15}, {9, 0}}) {
    const Tensor s = bilinear_sample(map, points({{j / 15.0, i / 15.0}}));
    for (std::size_t c = 0; c < kNodeWidth; ++c) {
      EXPECT_EQ(s[c], map[(static_cast<std::size_t>(i) * kGridSize + static_cast<std::size_t>(j)) * kNodeWidth + c]);
    }
  }
}

TEST(Bilinear, CentreOfTwoByTwo) {
  const Tensor s = bilinear_sample(Tensor({2, 2, 1}, {1, 2, 3, 4}), points({{0.5, 0.5}}));
  EXPECT_DOUBLE_EQ(s[0], 2.5);
}

TEST(Bilinear, EdgeMidpointAveragesNeighbours) {
  Rng rng(6);
  const Tensor map = random_tensor({kGridSize, kGridSize, 4}, rng);
  // Midway between (row 4, col 6) and (row 4, col 7).
  const Tensor s = bilinear_sample(map, points({{6.5 / 15.0, 4.0 / 15.0}}));
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(s[c], 0.5 * (map[(4 * 16 + 6) * 4 + c] + map[(4 * 16 + 7) * 4 + c]), 1e-12);
  }
}

TEST(Bilinear, OutsideIsClampedToBorder) {
  Rng rng(7);
  const Tensor map = random_tensor({kGridSize, kGridSize, 3}, rng);
  const Tensor a = bilinear_sample(map, points({{-0.3, 1.4}}));
  const Tensor b = bilinear_sample(map, points({{0.0, 1.0}}));
  EXPECT_EQ(max_abs_diff(a.data(), b.data()), 0.0);
}

TEST(Bilinear, LinearInTheMap) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({kGridSize, kGridSize, 8}, rng), b = random_tensor({kGridSize, kGridSize, 8}, rng);
    const double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
    const Tensor pts = random_tensor({5, 2}, rng, 0, 1);
    const Tensor lhs = bilinear_sample(add(scale(a, alpha), scale(b, beta)), pts);
    const Tensor rhs = add(scale(bilinear_sample(a, pts), alpha), scale(bilinear_sample(b, pts), beta));
    EXPECT_LT(max_abs_diff(lhs.data(), rhs.data()), 1e-12);
  }
}

TEST(Bilinear, ConvexCombinationBounds) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor map = random_tensor({kGridSize, kGridSize, 6}, rng, -3, 3);
    const double x = rng.uniform(), y = rng.uniform();
    const Tensor s = bilinear_sample(map, points({{x, y}}));
    const auto c0 = std::min<std::size_t>(static_cast<std::size_t>(x * 15.0), 14);
    const auto r0 = std::min<std::size_t>(static_cast<std::size_t>(y * 15.0), 14);
    for (std::size_t c = 0; c < 6; ++c) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t r : {r0, r0 + 1}) {
        for (std::size_t col : {c0, c0 + 1}) {
          lo = std::min(lo, map[(r * 16 + col) * 6 + c]);
          hi = std::max(hi, map[(r * 16 + col) * 6 + c]);
        }
      }
      EXPECT_GE(s[c], lo - 1e-12);
      EXPECT_LE(s[c], hi + 1e-12);
    }
  }
}

TEST(Bilinear, GradientFlowsToMapOnly) {
  Rng rng(10);
  Tensor map = random_tensor({5, 6, 3}, rng, -1, 1, true);
  Tensor pts = random_tensor({4, 2}, rng, 0, 1, true);
  auto f = [&] { return sum(square(bilinear_sample(map, pts))); };
  EXPECT_LT(grad_check(f, map).max_relative_error, 1e-6);
  Tape tape;
  {
    Tape::Scope scope(tape);
    tape.backward(f());
  }
  for (double g : pts.grad()) EXPECT_EQ(g, 0.0);
}

TEST(FusePosition, ZeroMlpLeavesFeatures) {
  ModelParams p = encoder_model(11);
  fill(p, "encoder.pos.", 0.0);
  Rng rng(12);
  const Tensor f = random_tensor({5, kNodeWidth}, rng);
  const NodeFeatures n = fuse_position(f, random_tensor({5, 2}, rng, 0, 1), p);
  EXPECT_EQ(max_abs_diff(n.features.data(), f.data()), 0.0);
}

TEST(FusePosition, ZeroFeaturesGivePositionalEmbedding) {
  const ModelParams p = encoder_model(13);
  const Tensor pos = points({{0.25, 0.5}, {0.9, 0.1}});
  const NodeFeatures n = fuse_position(Tensor::zeros({2, kNodeWidth}), pos, p);
  // Reference MLP evaluated by hand: 2 -> 32 (ReLU) -> 64.
  const Tensor& w0 = p.at("encoder.pos.fc0.weight");
  const Tensor& b0 = p.at("encoder.pos.fc0.bias");
  const Tensor& w1 = p.at("encoder.pos.fc1.weight");
  const Tensor& b1 = p.at("encoder.pos.fc1.bias");
  for (std::size_t r = 0; r < 2; ++r) {
    std::vector<double> hidden(32);
    for (std::size_t h = 0; h < 32; ++h) {
      hidden[h] = std::max(0.0, pos[r * 2] * w0[h] + pos[r * 2 + 1] * w0[32 + h] + b0[h]);
    }
    for (std::size_t o = 0; o < kNodeWidth; ++o) {
      double v = b1[o];
      for (std::size_t h = 0; h < 32; ++h) v += hidden[h] * w1[h * kNodeWidth + o];
      EXPECT_NEAR(n.features[r * kNodeWidth + o], v, 1e-12);
    }
  }
}

TEST(FusePosition, SamePositionDiffersByFeatureDifference) {
  const ModelParams p = encoder_model(14);
  Rng rng(15);
  const Tensor f = random_tensor({2, kNodeWidth}, rng);
  const NodeFeatures n = fuse_position(f, points({{0.4, 0.6}, {0.4, 0.6}}), p);
  for (std::size_t c = 0; c < kNodeWidth; ++c) {
    EXPECT_NEAR(n.features[c] - n.features[kNodeWidth + c], f[c] - f[kNodeWidth + c], 1e-12);
  }
}

TEST(FusePosition, PreservesRowOrderUnderPermutation) {
  const ModelParams p = encoder_model(16);
  Rng rng(17);
  const Tensor f = random_tensor({4, kNodeWidth}, rng);
  const Tensor pos = random_tensor({4, 2}, rng, 0, 1);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  const NodeFeatures a = fuse_position(f, pos, p);
  const NodeFeatures b = fuse_position(gather_rows(f, perm), gather_rows(pos, perm), p);
  const Tensor expected = gather_rows(a.features, perm);
  EXPECT_EQ(max_abs_diff(b.features.data(), expected.data()), 0.0);
}

TEST(FusePosition, DisabledEncoderPassesThrough) {
  const ModelParams p = encoder_model(18, false);
  EXPECT_FALSE(p.contains("encoder.pos.fc0.weight"));
  Rng rng(19);
  const Tensor f = random_tensor({3, kNodeWidth}, rng);
  EXPECT_EQ(max_abs_diff(fuse_position(f, random_tensor({3, 2}, rng, 0, 1), p).features.data(), f.data()), 0.0);
}

TEST(FusePosition, WidthMismatchThrows) {
  const ModelParams p = encoder_model(20);
  EXPECT_THROW(fuse_position(Tensor::zeros({2, 32}), Tensor::zeros({2, 2}), p), DimensionError);
  EXPECT_THROW(fuse_position(Tensor::zeros({2, kNodeWidth}), Tensor::zeros({3, 2}), p), DimensionError);
}

TEST(EncodeNodes, EmptyPointList) {
  const ModelParams p = encoder_model(21);
  const NodeFeatures n = encode_nodes(Tensor::zeros({kGridSize, kGridSize, kNodeWidth}), {}, p);
  EXPECT_EQ(n.size(), 0u);
}
