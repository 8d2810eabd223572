#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "psgnn/discriminator.hpp"
#include "psgnn/errors.hpp"
#include "psgnn/ops.hpp"
#include "test_support.hpp"

using namespace psgnn;
using psgnn::testing::max_abs_diff;
using psgnn::testing::random_tensor;

namespace {

ModelParams disc_model(std::uint64_t seed) {
  ModelParams p;
  Rng rng(seed);
  add_discriminator_params(p, rng);
  return p;
}

std::vector<MarkingPoint> some_points(std::size_t n) {
  std::vector<MarkingPoint> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({0.1 + 0.08 * i, 0.9 - 0.07 * i});
  return pts;
}

// Independent BCE reference over an N x N probability table.
double reference_bce(const std::vector<double>& probs, std::size_t n, const std::set<std::pair<std::size_t, std::size_t>>& pos) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double l = std::min(std::max(probs[i * n + j], 1e-7), 1.0 - 1e-7);
      total -= pos.count({i, j}) ? std::log(l) : std::log(1.0 - l);
    }
  }
  return total / static_cast<double>(n * n);
}

}  // namespace

TEST(PairLogits, ZeroFinalLayerGivesHalf) {
  const ModelParams p = disc_model(1);
  for (const char* path : {"disc.fc1.weight", "disc.fc1.bias"}) {
    Tensor t = p.at(path);
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  Rng rng(2);
  const Tensor probs = pair_logits(random_tensor({5, kNodeWidth}, rng), p);
  ASSERT_EQ(probs.shape(), (Shape{5, 5}));
  for (double v : probs.data()) EXPECT_EQ(v, 0.5);
}

TEST(PairLogits, OrderMatters) {
  const ModelParams p = disc_model(3);
  Rng rng(4);
  const Tensor probs = pair_logits(random_tensor({4, kNodeWidth}, rng), p);
  double asym = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) asym = std::max(asym, std::abs(probs[i * 4 + j] - probs[j * 4 + i]));
  EXPECT_GT(asym, 1e-6);
}

TEST(PairLogits, EntryMatchesDirectMlp) {
  const ModelParams p = disc_model(5);
  Rng rng(6);
  const Tensor v = random_tensor({3, kNodeWidth}, rng);
  const Tensor probs = pair_logits(v, p);
  const auto vs = psgnn::testing::standardized_rows(v);
  const Tensor &w0 = p.at("disc.fc0.weight"), &b0 = p.at("disc.fc0.bias");
  const Tensor &w1 = p.at("disc.fc1.weight"), &b1 = p.at("disc.fc1.bias");
  const std::size_t hidden = w0.dim(1);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double z = b1[0];
      for (std::size_t h = 0; h < hidden; ++h) {
        double a = b0[h];
        for (std::size_t c = 0; c < kNodeWidth; ++c) {
          a += vs[i * kNodeWidth + c] * w0[c * hidden + h] + vs[j * kNodeWidth + c] * w0[(kNodeWidth + c) * hidden + h];
        }
        z += std::max(0.0, a) * w1[h];
      }
      EXPECT_NEAR(probs[i * 3 + j], 1.0 / (1.0 + std::exp(-z)), 1e-12);
    }
  }
}

TEST(PairLogits, InferenceDeterministicTrainingStochastic) {
  const ModelParams p = disc_model(7);
  Rng rng(8);
  const Tensor v = random_tensor({6, kNodeWidth}, rng);
  const Tensor a = pair_logits(v, p), b = pair_logits(v, p);
  EXPECT_EQ(max_abs_diff(a.data(), b.data()), 0.0);
  Rng drop(9);
  const Tensor t = pair_logits(v, p, true, &drop);
  EXPECT_GT(max_abs_diff(t.data(), a.data()), 1e-6);
  EXPECT_THROW(pair_logits(v, p, true, nullptr), ParameterError);
}

TEST(PairLogits, EmptyGraph) {
  const ModelParams p = disc_model(10);
  EXPECT_EQ(pair_logits(Tensor::zeros({0, kNodeWidth}), p).numel(), 0u);
}

TEST(PairLogits, GradientThroughLineLoss) {
  const ModelParams p = disc_model(11);
  Rng rng(12);
  Tensor v = random_tensor({4, kNodeWidth}, rng, -1, 1, true);
  const std::vector<OrderedPair> gt = {{0, 2}, {3, 1}};
  auto f = [&] { return line_loss(pair_logits(v, p), gt); };
  EXPECT_LT(psgnn::testing::check_gradient(f, v, 256).max_relative_error, 1e-4);
  for (const char* path : {"disc.fc0.weight", "disc.fc0.bias", "disc.fc1.weight", "disc.fc1.bias"}) {
    EXPECT_LT(psgnn::testing::check_gradient(f, p.at(path), 60).max_relative_error, 1e-4) << path;
  }
}

TEST(PredictionMatrix, RowsAreOrderedPairs) {
  const auto pts = some_points(3);
  Rng rng(13);
  const Tensor probs = random_tensor({3, 3}, rng, 0, 1);
  const Tensor k = prediction_matrix(pts, probs);
  ASSERT_EQ(k.shape(), (Shape{9, 5}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t r = (i * 3 + j) * 5;
      EXPECT_EQ(k[r], pts[i].x);
      EXPECT_EQ(k[r + 1], pts[i].y);
      EXPECT_EQ(k[r + 2], pts[j].x);
      EXPECT_EQ(k[r + 3], pts[j].y);
      EXPECT_EQ(k[r + 4], probs[i * 3 + j]);
    }
  }
}

TEST(Assemble, EmptyInput) { EXPECT_TRUE(assemble_predictions({}, Tensor::zeros({0, 0}), 0.5).empty()); }

TEST(Assemble, KeepsMoreConfidentDirection) {
  const auto pts = some_points(3);
  Tensor probs = Tensor::zeros({3, 3});
  probs.mutable_data()[1 * 3 + 2] = 0.9;
  probs.mutable_data()[2 * 3 + 1] = 0.7;
  const auto out = assemble_predictions(pts, probs, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].first, 1u);
  EXPECT_EQ(out[0].second, 2u);
  EXPECT_EQ(out[0].x1, pts[1].x);
  EXPECT_EQ(out[0].y2, pts[2].y);
  EXPECT_EQ(out[0].t, 0.9);
}

TEST(Assemble, DiagonalNeverAccepted) {
  const auto pts = some_points(4);
  Tensor probs = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 4; ++i) probs.mutable_data()[i * 5] = 0.99;
  EXPECT_TRUE(assemble_predictions(pts, probs, 0.5).empty());
}

TEST(Assemble, SortedAndNoDuplicatePairs) {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 9));
    const auto pts = some_points(n);
    const Tensor probs = random_tensor({n, n}, rng, 0, 1);
    const auto out = assemble_predictions(pts, probs, 0.5);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t k = 0; k < out.size(); ++k) {
      EXPECT_NE(out[k].first, out[k].second);
      EXPECT_GE(out[k].t, 0.5);
      if (k) EXPECT_GE(out[k - 1].t, out[k].t);
      EXPECT_TRUE(seen.insert({std::min(out[k].first, out[k].second), std::max(out[k].first, out[k].second)}).second);
    }
    // Every above-threshold unordered pair is represented exactly once.
    std::size_t expected = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) expected += (probs[i * n + j] >= 0.5 || probs[j * n + i] >= 0.5);
    EXPECT_EQ(out.size(), expected);
  }
}

TEST(LineLoss, HalfEverywhereIsLn2) {
  for (const std::vector<OrderedPair>& gt : {std::vector<OrderedPair>{}, {{0, 1}}, {{0, 1}, {2, 0}, {1, 2}}}) {
    EXPECT_NEAR(line_loss(Tensor::full({3, 3}, 0.5), gt).item(), std::log(2.0), 1e-15);
  }
}

TEST(LineLoss, PerfectPredictionIsTiny) {
  Tensor probs = Tensor::zeros({3, 3});
  probs.mutable_data()[0 * 3 + 1] = 1.0;
  const double loss = line_loss(probs, std::vector<OrderedPair>{{0, 1}}).item();
  EXPECT_GE(loss, 0.0);
  EXPECT_LT(loss, 1e-6);
}

TEST(LineLoss, MatchesReferenceBce) {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor probs = random_tensor({3, 3}, rng, 0, 1);
    const std::size_t a = static_cast<std::size_t>(rng.uniform_int(0, 2));
    const std::size_t b = (a + 1 + static_cast<std::size_t>(rng.uniform_int(0, 1))) % 3;
    const std::vector<double> d(probs.data().begin(), probs.data().end());
    EXPECT_NEAR(line_loss(probs, std::vector<OrderedPair>{{a, b}}).item(), reference_bce(d, 3, {{a, b}}), 1e-12);
  }
}

TEST(LineLoss, EmptyGraphAndBadIndices) {
  EXPECT_EQ(line_loss(Tensor::zeros({0, 0}), {}).item(), 0.0);
  EXPECT_THROW(line_loss(Tensor::full({2, 2}, 0.5), std::vector<OrderedPair>{{0, 2}}), DataError);
}

TEST(LineLoss, MonotoneInPositiveProbability) {
  Rng rng(16);
  Tensor probs = random_tensor({4, 4}, rng, 0.05, 0.6);
  const std::vector<OrderedPair> gt = {{1, 3}};
  double prev = line_loss(probs, gt).item();
  for (int step = 0; step < 20; ++step) {
    probs.mutable_data()[1 * 4 + 3] += 0.015;
    const double now = line_loss(probs, gt).item();
    EXPECT_LT(now, prev);
    prev = now;
  }
}

TEST(LineLoss, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  Tensor probs = random_tensor({5, 5}, rng, 0.05, 0.95, true);
  const std::vector<OrderedPair> gt = {{0, 1}, {3, 2}};
  EXPECT_LT(grad_check([&] { return line_loss(probs, gt); }, probs).max_relative_error, 1e-6);
}

TEST(TotalLoss, Examples) {
  EXPECT_DOUBLE_EQ(total_loss(Tensor::scalar(0.01), Tensor::scalar(0.5), {100.0, 1.0}).item(), 1.5);
  EXPECT_DOUBLE_EQ(total_loss(Tensor::scalar(0.3), Tensor::scalar(0.25), {1.0, 1.0}).item(), 0.55);
  EXPECT_EQ(total_loss(Tensor::scalar(0.0), Tensor::scalar(0.0), {100.0, 1.0}).item(), 0.0);
}

TEST(TotalLoss, LinearInEachComponent) {
  Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(0, 2), b = rng.uniform(0, 2), c = rng.uniform(0, 2);
    const LossWeights w{rng.uniform(0, 100), rng.uniform(0, 2)};
    const double lhs = total_loss(Tensor::scalar(a + c), Tensor::scalar(b), w).item();
    const double rhs = total_loss(Tensor::scalar(a), Tensor::scalar(b), w).item() + w.lambda1 * c;
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}
