#include "psgnn/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "psgnn/errors.hpp"
#include "psgnn/model.hpp"
#include "psgnn/ops.hpp"
#include "psgnn/scene.hpp"

namespace psgnn {

void adam_step(ModelParams& params, AdamState& state) {
  for (const auto& [path, t] : params.tensors()) {
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient for parameter '" + path + "'");
    }
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, step);
  const double bias2 = 1.0 - std::pow(state.beta2, step);
  for (const auto& [path, t] : params.tensors()) {
    Tensor param = t;
    auto& m = state.first_moment[path];
    auto& v = state.second_moment[path];
    if (m.size() != param.numel()) {
      m.assign(param.numel(), 0.0);
      v.assign(param.numel(), 0.0);
    }
    const auto g = param.grad();
    auto w = param.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

TrainResult train(const std::filesystem::path& dataset_path, const ModelConfig& model, const TrainOptions& options) {
  if (options.batch_size == 0) throw ParameterError("batch size must be positive");
  DatasetReader reader(dataset_path);
  std::size_t n = reader.size();
  if (options.max_scenes) n = std::min(n, options.max_scenes);
  if (n == 0) throw ParameterError("training dataset is empty");

  TrainResult result{init_model_params(model, options.seed), {}, {}};
  ModelParams& params = result.params;
  AdamState adam;
  adam.lr = options.learning_rate;

  Rng order_rng(mix_seed(options.seed, 100));
  std::vector<std::size_t> order(n);
  const auto started = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    EpochStats stats;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const SceneRecord scene = reader.read(order[k]);
        Rng dropout_rng(mix_seed(options.seed, 1000 + adam.step * options.batch_size + (k - start)));
        Tape tape;
        Tape::Scope scope(tape);
        SampleLoss loss = sample_loss(params, scene, true, &dropout_rng);
        const double total = loss.total.item();
        if (!std::isfinite(total)) {
          throw TrainingError("loss diverged (non-finite) at epoch " + std::to_string(epoch) + ", scene " +
                              std::to_string(order[k]));
        }
        tape.backward(scale(loss.total, inv_batch));
        batch_loss += total * inv_batch;
        stats.total += total;
        stats.point += loss.point.item();
        stats.line += loss.line.item();
      }
      adam_step(params, adam);
      result.step_losses.push_back(batch_loss);
    }
    const double dn = static_cast<double>(n);
    stats.total /= dn;
    stats.point /= dn;
    stats.line /= dn;
    result.epochs.push_back(stats);
    if (options.log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      *options.log << "epoch " << epoch + 1 << "/" << options.epochs << "  loss " << stats.total << "  point "
                   << stats.point << "  line " << stats.line << "  (" << secs << " s)\n";
      options.log->flush();
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace psgnn
