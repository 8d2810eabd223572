#include "psgnn/params.hpp"

#include <fstream>

#include "psgnn/binary_io.hpp"
#include "psgnn/errors.hpp"

namespace psgnn {

std::string to_string(GnnVariant v) { return v == GnnVariant::attentional ? "attentional" : "fcn-baseline"; }

GnnVariant parse_variant(const std::string& name) {
  if (name == "attentional") return GnnVariant::attentional;
  if (name == "fcn-baseline" || name == "fcn_baseline") return GnnVariant::fcn_baseline;
  throw ParameterError("unknown GNN variant '" + name + "'");
}

void validate(const ModelConfig& c) {
  if (c.gnn.heads == 0 || kNodeWidth % c.gnn.heads != 0) {
    throw ParameterError("head count must divide the node width " + std::to_string(kNodeWidth));
  }
  if (!(c.loss.lambda1 >= 0.0) || !(c.loss.lambda2 >= 0.0)) throw ParameterError("loss weights must be non-negative");
  if (!(c.decode.conf_threshold > 0.0 && c.decode.conf_threshold < 1.0)) {
    throw ParameterError("confidence threshold must lie in (0, 1)");
  }
  if (!(c.decode.nms_radius > 0.0)) throw ParameterError("NMS radius must be positive");
  if (c.decode.max_points == 0) throw ParameterError("max_points must be positive");
  if (!(c.pair_threshold > 0.0 && c.pair_threshold < 1.0)) throw ParameterError("pair threshold must lie in (0, 1)");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
}

void ModelParams::insert(const std::string& path, Tensor tensor) { tensors_.insert_or_assign(path, std::move(tensor)); }

bool ModelParams::contains(std::string_view path) const { return tensors_.find(path) != tensors_.end(); }

const Tensor& ModelParams::at(std::string_view path) const {
  auto it = tensors_.find(path);
  if (it == tensors_.end()) throw LoadError("missing parameter '" + std::string(path) + "'");
  return it->second;
}

DenseLayer ModelParams::dense(std::string_view prefix, Activation act) const {
  const std::string p(prefix);
  return {at(p + ".weight"), at(p + ".bias"), act};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [_, t] : tensors_) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

namespace {

constexpr char kMagic[4] = {'P', 'S', 'C', 'K'};

void write_config(BinaryWriter& w, const ModelConfig& c) {
  w.put(static_cast<std::uint32_t>(c.gnn.layers));
  w.put(static_cast<std::uint32_t>(c.gnn.heads));
  w.put(static_cast<std::uint8_t>(c.gnn.variant));
  w.put(static_cast<std::uint8_t>(c.use_pos_encoder ? 1 : 0));
  w.put(c.loss.lambda1);
  w.put(c.loss.lambda2);
  w.put(c.decode.conf_threshold);
  w.put(c.decode.nms_radius);
  w.put(static_cast<std::uint32_t>(c.decode.max_points));
  w.put(c.pair_threshold);
  w.put(c.dropout_rate);
}

ModelConfig read_config(BinaryReader& r) {
  ModelConfig c;
  c.gnn.layers = r.get<std::uint32_t>("gnn layers");
  c.gnn.heads = r.get<std::uint32_t>("gnn heads");
  const auto variant_at = r.offset();
  const auto variant = r.get<std::uint8_t>("gnn variant");
  if (variant > 1) throw FormatError("unknown GNN variant tag", variant_at);
  c.gnn.variant = static_cast<GnnVariant>(variant);
  c.use_pos_encoder = r.get<std::uint8_t>("positional encoder flag") != 0;
  c.loss.lambda1 = r.get<double>("lambda1");
  c.loss.lambda2 = r.get<double>("lambda2");
  c.decode.conf_threshold = r.get<double>("confidence threshold");
  c.decode.nms_radius = r.get<double>("nms radius");
  c.decode.max_points = r.get<std::uint32_t>("max points");
  c.pair_threshold = r.get<double>("pair threshold");
  c.dropout_rate = r.get<double>("dropout rate");
  return c;
}

}  // namespace

void write_checkpoint(const ModelParams& params, std::ostream& out) {
  BinaryWriter w(out);
  w.put_bytes(kMagic, sizeof kMagic);
  w.put(params.version());
  write_config(w, params.config());
  w.put(static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& [path, t] : params.tensors()) {
    w.put_string(path);
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put(static_cast<std::uint32_t>(d));
    w.put_bytes(t.data().data(), t.numel() * sizeof(double));
  }
  if (!w.good()) throw std::runtime_error("failed writing checkpoint");
}

ModelParams read_checkpoint(std::istream& in) {
  BinaryReader r(in);
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != ModelParams::kFormatVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto config_at = r.offset();
  ModelConfig config = read_config(r);
  try {
    validate(config);
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid config snapshot: ") + e.what(), config_at);
  }
  ModelParams params(config);
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string path = r.get_string("parameter path");
    const auto rank_at = r.offset();
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible rank for '" + path + "'", rank_at);
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>("dimension");
    const auto n = shape_numel(shape);
    if (n > (std::size_t{1} << 28)) throw FormatError("implausible size for '" + path + "'", rank_at);
    std::vector<double> data(n);
    r.get_bytes(data.data(), n * sizeof(double), "tensor data");
    params.insert(path, Tensor(std::move(shape), std::move(data), true));
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_checkpoint(params, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace psgnn
