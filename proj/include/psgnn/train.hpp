#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "psgnn/config.hpp"
#include "psgnn/params.hpp"

namespace psgnn {

/// Bias-corrected Adam moments for every parameter path.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>, std::less<>> first_moment;
  std::map<std::string, std::vector<double>, std::less<>> second_moment;
};

/// One Adam update from the gradients currently accumulated on `params`,
/// visiting parameters in sorted path order. Throws TrainingError naming the
/// path of any non-finite gradient (before touching any parameter).
void adam_step(ModelParams& params, AdamState& state);

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 24;
  double learning_rate = 0.001;
  std::uint64_t seed = 42;
  std::size_t max_scenes = 0;  // 0: use the whole dataset
  std::ostream* log = nullptr;
};

struct EpochStats {
  double total = 0.0;
  double point = 0.0;
  double line = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> epochs;
  std::vector<double> step_losses;  // mean batch loss per optimiser step
};

/// Minibatch Adam on the joint objective. Fully determined by the dataset,
/// model configuration and options.
TrainResult train(const std::filesystem::path& dataset_path, const ModelConfig& model, const TrainOptions& options);

}  // namespace psgnn
