#include "flesd/encoder.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "flesd/byte_io.hpp"
#include "flesd/error.hpp"
#include "flesd/rng.hpp"

namespace flesd {
namespace {

constexpr char kMagic[] = "FLSDENC1";
constexpr std::size_t kMagicLen = 8;

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ParameterError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

void EncoderConfig::validate() const {
  if (layer_sizes.size() < 2) throw ParameterError("encoder: need at least two layer sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ParameterError("encoder: layer sizes must be positive");
  }
  if (output_dim() < 2) throw ParameterError("encoder: output dimension must be >= 2");
}

EncoderParams::EncoderParams(EncoderConfig config, std::vector<DenseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.size() + 1 != config_.layer_sizes.size()) {
    throw DimensionError("EncoderParams: layer count does not match config");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t in = config_.layer_sizes[l];
    const std::size_t out = config_.layer_sizes[l + 1];
    const auto& L = layers_[l];
    if (L.weight.value.rows() != in || L.weight.value.cols() != out ||
        L.bias.value.rows() != 1 || L.bias.value.cols() != out) {
      throw DimensionError("EncoderParams: layer " + std::to_string(l) +
                           " shape does not match config");
    }
  }
}

std::vector<ParamTensor*> EncoderParams::tensors() {
  std::vector<ParamTensor*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const ParamTensor*> EncoderParams::tensors() const {
  std::vector<const ParamTensor*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::size_t EncoderParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.value.size() + l.bias.value.size();
  return n;
}

void EncoderParams::zero_grad() {
  for (auto* t : tensors()) t->zero_grad();
}

bool EncoderParams::same_architecture(const EncoderParams& other) const {
  return config_.layer_sizes == other.config_.layer_sizes &&
         config_.activation == other.config_.activation;
}

bool operator==(const EncoderParams& a, const EncoderParams& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weight.value != b.layers_[l].weight.value ||
        a.layers_[l].bias.value != b.layers_[l].bias.value) {
      return false;
    }
  }
  return true;
}

EncoderParams init_encoder(const EncoderConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed({cfg.init_seed, tag(SeedTag::kInit)}));
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
    const std::size_t in = cfg.layer_sizes[l];
    const std::size_t out = cfg.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> unif(-bound, bound);
    Matrix w(in, out);
    for (double& v : w.data()) v = unif(rng);
    layers.push_back(DenseLayer{ParamTensor(std::move(w)), ParamTensor(Matrix(1, out))});
  }
  return EncoderParams(cfg, std::move(layers));
}

Matrix encode(const EncoderParams& params, const Matrix& batch) {
  if (batch.cols() != params.config().input_dim()) {
    throw DimensionError("encode: batch has " + std::to_string(batch.cols()) +
                         " columns, encoder expects " +
                         std::to_string(params.config().input_dim()));
  }
  const auto layers = params.layers();
  Matrix h = batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = add_row_bias(matmul(h, layers[l].weight.value), layers[l].bias.value);
    if (l + 1 < layers.size()) {
      h = params.config().activation == Activation::kTanh ? tanh(h) : relu(h);
    }
  }
  return l2_normalize_rows(h);
}

Var encode(Tape& tape, EncoderParams& params, Var batch) {
  if (tape.value(batch).cols() != params.config().input_dim()) {
    throw DimensionError("encode: batch width does not match encoder input");
  }
  auto layers = params.layers();
  Var h = batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Var w = tape.param(layers[l].weight);
    Var b = tape.param(layers[l].bias);
    h = add_row_bias(tape, matmul(tape, h, w), b);
    if (l + 1 < layers.size()) {
      h = params.config().activation == Activation::kTanh ? tanh(tape, h) : relu(tape, h);
    }
  }
  return normalize_rows(tape, h);
}

std::size_t param_count(const EncoderConfig& cfg) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
    n += cfg.layer_sizes[l] * cfg.layer_sizes[l + 1] + cfg.layer_sizes[l + 1];
  }
  return n;
}

std::size_t snapshot_header_size(const EncoderConfig& cfg) {
  return kMagicLen + 4 + 4 + 4 * cfg.layer_sizes.size();
}

std::size_t snapshot_size(const EncoderConfig& cfg) {
  return snapshot_header_size(cfg) + 8 * param_count(cfg);
}

std::vector<std::uint8_t> serialize(const EncoderParams& params) {
  const auto& cfg = params.config();
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
  out.reserve(snapshot_size(cfg));
  bytes::put_u32(out, static_cast<std::uint32_t>(cfg.activation));
  bytes::put_u32(out, static_cast<std::uint32_t>(cfg.layer_sizes.size()));
  for (std::size_t s : cfg.layer_sizes) bytes::put_u32(out, static_cast<std::uint32_t>(s));
  for (const ParamTensor* t : params.tensors()) {
    for (double v : t->value.data()) bytes::put_f64(out, v);
  }
  return out;
}

EncoderParams deserialize(std::span<const std::uint8_t> data) {
  bytes::Reader in(data);
  if (in.raw(kMagicLen) != std::string(kMagic, kMagicLen)) {
    throw FormatError("encoder snapshot: bad magic");
  }
  const std::uint32_t act = in.u32();
  if (act > static_cast<std::uint32_t>(Activation::kTanh)) {
    throw FormatError("encoder snapshot: unknown activation code " + std::to_string(act));
  }
  const std::uint32_t n_sizes = in.u32();
  if (n_sizes < 2 || n_sizes > 64) throw FormatError("encoder snapshot: bad layer count");
  EncoderConfig cfg;
  cfg.activation = static_cast<Activation>(act);
  for (std::uint32_t i = 0; i < n_sizes; ++i) {
    const std::uint32_t s = in.u32();
    if (s == 0) throw FormatError("encoder snapshot: zero layer size");
    cfg.layer_sizes.push_back(s);
  }
  if (cfg.output_dim() < 2) throw FormatError("encoder snapshot: output dimension < 2");
  if (in.remaining() != 8 * param_count(cfg)) {
    throw FormatError("encoder snapshot: payload is " + std::to_string(in.remaining()) +
                      " bytes, expected " + std::to_string(8 * param_count(cfg)));
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
    Matrix w(cfg.layer_sizes[l], cfg.layer_sizes[l + 1]);
    for (double& v : w.data()) v = in.f64();
    Matrix b(1, cfg.layer_sizes[l + 1]);
    for (double& v : b.data()) v = in.f64();
    layers.push_back(DenseLayer{ParamTensor(std::move(w)), ParamTensor(std::move(b))});
  }
  return EncoderParams(std::move(cfg), std::move(layers));
}

void save_snapshot(const EncoderParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write snapshot " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EncoderParams load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open snapshot " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::uint64_t checksum(const EncoderParams& params) {
  std::uint64_t h = 0;
  for (const ParamTensor* t : params.tensors()) {
    for (double v : t->value.data()) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace flesd
