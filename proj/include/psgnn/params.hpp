#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "psgnn/config.hpp"
#include "psgnn/nn.hpp"
#include "psgnn/tensor.hpp"

namespace psgnn {

/// Named collection of every learnable tensor plus the configuration that
/// produced it. Paths are dotted, e.g. "backbone.conv0.kernel"; iteration is
/// in sorted path order.
class ModelParams {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelParams() = default;
  explicit ModelParams(ModelConfig config) : config_(config) {}

  const ModelConfig& config() const { return config_; }
  std::uint32_t version() const { return version_; }

  void insert(const std::string& path, Tensor tensor);
  bool contains(std::string_view path) const;
  /// Throws LoadError naming the path when absent.
  const Tensor& at(std::string_view path) const;

  /// Reads "<prefix>.weight" and "<prefix>.bias".
  DenseLayer dense(std::string_view prefix, Activation act) const;

  const std::map<std::string, Tensor, std::less<>>& tensors() const { return tensors_; }
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  ModelConfig config_;
  std::uint32_t version_ = kFormatVersion;
  std::map<std::string, Tensor, std::less<>> tensors_;
};

/// Checkpoint layout: "PSCK", u32 version, config snapshot, u32 tensor count,
/// then per tensor in sorted path order: path string, u32 rank, u32 dims,
/// f64 data. All integers little-endian.
void write_checkpoint(const ModelParams& params, std::ostream& out);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace psgnn
