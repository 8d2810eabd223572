#include "psgnn/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "psgnn/model.hpp"
#include "psgnn/scene.hpp"

namespace psgnn {

namespace {
// Guards the strict "< threshold" test against round-off in the pixel
// conversion; far below any meaningful pixel distance.
constexpr double kBoundaryTolerancePx = 1e-9;

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double EvalReport::f1() const {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

void EvalReport::add(SceneEval scene) {
  true_positives += scene.true_positives;
  false_positives += scene.false_positives;
  false_negatives += scene.false_negatives;
  precision = ratio(true_positives, true_positives + false_positives);
  recall = ratio(true_positives, true_positives + false_negatives);
  scenes.push_back(std::move(scene));
}

double slot_distance_px(const SlotPrediction& d, const GroundTruthSlot& g, const MatchOptions& options) {
  const double s = options.reference_px;
  auto norm4 = [s](double a, double b, double c, double e) {
    return std::sqrt((a * s) * (a * s) + (b * s) * (b * s) + (c * s) * (c * s) + (e * s) * (e * s));
  };
  const double direct = norm4(g.x1 - d.x1, g.y1 - d.y1, g.x2 - d.x2, g.y2 - d.y2);
  if (options.ordered) return direct;
  return std::min(direct, norm4(g.x1 - d.x2, g.y1 - d.y2, g.x2 - d.x1, g.y2 - d.y1));
}

SceneEval match_slots(std::span<const SlotPrediction> detections, std::span<const GroundTruthSlot> truth,
                      const MatchOptions& options) {
  // Visit detections by descending t without assuming the caller sorted them.
  std::vector<std::size_t> order(detections.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].t > detections[b].t; });

  SceneEval eval;
  std::vector<bool> claimed(truth.size(), false);
  for (auto d : order) {
    std::size_t best = truth.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (claimed[g]) continue;
      const double dist = slot_distance_px(detections[d], truth[g], options);
      if (dist < options.threshold_px - kBoundaryTolerancePx && dist < best_dist) {
        best = g;
        best_dist = dist;
      }
    }
    if (best < truth.size()) {
      claimed[best] = true;
      ++eval.true_positives;
      eval.matches.push_back({d, best, best_dist});
    } else {
      ++eval.false_positives;
    }
  }
  for (bool c : claimed) eval.false_negatives += c ? 0 : 1;
  return eval;
}

EvalReport evaluate(const ModelParams& params, const std::filesystem::path& dataset_path, const MatchOptions& options) {
  DatasetReader reader(dataset_path);
  EvalReport report;
  for (std::size_t i = 0; i < reader.size(); ++i) {
    const SceneRecord scene = reader.read(i);
    std::vector<GroundTruthSlot> truth;
    for (const auto& p : scene.entrance_pairs) {
      const auto& a = scene.points[p.first];
      const auto& b = scene.points[p.second];
      truth.push_back({a.x, a.y, b.x, b.y});
    }
    const Inference result = infer(params, scene.image);
    SceneEval eval = match_slots(result.slots, truth, options);
    eval.scene = i;
    report.add(std::move(eval));
  }
  return report;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0.0 ? dot / denom : 0.0;
}

SimilarityReport similarity_report(const ModelParams& params, const std::filesystem::path& dataset_path) {
  DatasetReader reader(dataset_path);
  SimilarityReport report;
  Tape::Pause no_tape;
  for (std::size_t s = 0; s < reader.size(); ++s) {
    const SceneRecord scene = reader.read(s);
    const auto n = scene.points.size();
    if (n < 2) continue;
    ++report.scenes_used;
    std::set<std::pair<std::size_t, std::size_t>> paired;
    for (const auto& p : scene.entrance_pairs) paired.emplace(std::min(p.first, p.second), std::max(p.first, p.second));
    const NodeEmbeddings emb = node_embeddings(params, scene.image, scene.points);
    const auto w = emb.before.dim(1);
    auto row = [w](const Tensor& t, std::size_t i) { return t.data().subspan(i * w, w); };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double before = cosine_similarity(row(emb.before, i), row(emb.before, j));
        const double after = cosine_similarity(row(emb.after, i), row(emb.after, j));
        if (paired.count({i, j})) {
          report.paired_before += before;
          report.paired_after += after;
          ++report.paired_count;
        } else {
          report.unpaired_before += before;
          report.unpaired_after += after;
          ++report.unpaired_count;
        }
      }
    }
  }
  if (report.paired_count) {
    report.paired_before /= static_cast<double>(report.paired_count);
    report.paired_after /= static_cast<double>(report.paired_count);
  }
  if (report.unpaired_count) {
    report.unpaired_before /= static_cast<double>(report.unpaired_count);
    report.unpaired_after /= static_cast<double>(report.unpaired_count);
  }
  return report;
}

}  // namespace psgnn
