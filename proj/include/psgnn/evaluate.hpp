#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "psgnn/geometry.hpp"
#include "psgnn/params.hpp"

namespace psgnn {

/// The reference frame in which the slot-matching threshold is expressed:
/// 10 px on a 600 px around-view image.
inline constexpr double kReferenceImagePx = 600.0;
inline constexpr double kDefaultThresholdPx = 10.0;

struct MatchOptions {
  double threshold_px = kDefaultThresholdPx;  // in the reference frame
  double reference_px = kReferenceImagePx;
  bool ordered = true;  // false: a detection may match with its endpoints swapped
};

struct GroundTruthSlot {
  double x1, y1, x2, y2;
};

struct SlotMatch {
  std::size_t detection = 0;
  std::size_t ground_truth = 0;
  double distance_px = 0.0;  // reference-frame pixels
};

struct SceneEval {
  std::size_t scene = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::vector<SlotMatch> matches;
};

struct EvalReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 1.0;
  double recall = 1.0;
  std::vector<SceneEval> scenes;

  double f1() const;
  void add(SceneEval scene);  // accumulates counts and refreshes the ratios
};

/// Distance between two ordered entrance lines: Euclidean norm of the
/// concatenated endpoint differences, in reference-frame pixels.
double slot_distance_px(const SlotPrediction& d, const GroundTruthSlot& g, const MatchOptions& options);

/// Greedy matching in descending detection probability; each ground-truth
/// slot is claimed at most once, by the closest detection strictly inside the
/// threshold.
SceneEval match_slots(std::span<const SlotPrediction> detections, std::span<const GroundTruthSlot> truth,
                      const MatchOptions& options);

/// Runs inference on every scene of a dataset file and matches against its labels.
EvalReport evaluate(const ModelParams& params, const std::filesystem::path& dataset_path, const MatchOptions& options);

struct SimilarityReport {
  double paired_before = 0.0;
  double unpaired_before = 0.0;
  double paired_after = 0.0;
  double unpaired_after = 0.0;
  std::size_t paired_count = 0;
  std::size_t unpaired_count = 0;
  std::size_t scenes_used = 0;

  double gap_before() const { return paired_before - unpaired_before; }
  double gap_after() const { return paired_after - unpaired_after; }
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Mean cosine similarity of node features for ground-truth entrance pairs
/// versus all other point pairs, measured entering and leaving the graph
/// network. Scenes with fewer than two points are skipped.
SimilarityReport similarity_report(const ModelParams& params, const std::filesystem::path& dataset_path);

}  // namespace psgnn
