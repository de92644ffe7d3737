#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flesd/matrix.hpp"
#include "flesd/tape.hpp"

namespace flesd {

enum class Activation : std::uint32_t { kRelu = 0, kTanh = 1 };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct EncoderConfig {
  std::vector<std::size_t> layer_sizes;  // in_dim, hidden..., d
  Activation activation = Activation::kRelu;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
};

struct DenseLayer {
  ParamTensor weight;  // fan_in x fan_out
  ParamTensor bias;    // 1 x fan_out
};

// MLP encoder parameters. The same type holds a client model, the
// distillation student and its momentum encoder.
class EncoderParams {
 public:
  EncoderParams() = default;
  EncoderParams(EncoderConfig config, std::vector<DenseLayer> layers);

  const EncoderConfig& config() const { return config_; }
  std::span<DenseLayer> layers() { return layers_; }
  std::span<const DenseLayer> layers() const { return layers_; }

  // weight0, bias0, weight1, bias1, ... Pointers are invalidated by moves.
  std::vector<ParamTensor*> tensors();
  std::vector<const ParamTensor*> tensors() const;

  std::size_t param_count() const;
  void zero_grad();
  bool same_architecture(const EncoderParams& other) const;

  friend bool operator==(const EncoderParams& a, const EncoderParams& b);

 private:
  EncoderConfig config_;
  std::vector<DenseLayer> layers_;
};

// Glorot-uniform weights from cfg.init_seed, zero biases.
EncoderParams init_encoder(const EncoderConfig& cfg);

// Unit-norm representations, one row per input row. Throws
// DegenerateInputError when a pre-normalization row is all zero.
Matrix encode(const EncoderParams& params, const Matrix& batch);
// Taped variant; gradients reach params' ParamTensors through the tape.
Var encode(Tape& tape, EncoderParams& params, Var batch);

inline std::size_t param_count(const EncoderParams& p) { return p.param_count(); }
std::size_t param_count(const EncoderConfig& cfg);

// Snapshot format, little-endian:
//   8 bytes  magic "FLSDENC1"
//   u32      activation
//   u32      number of layer sizes L
//   L x u32  layer sizes
//   f64...   weight0 (row-major), bias0, weight1, bias1, ...
std::size_t snapshot_header_size(const EncoderConfig& cfg);
std::size_t snapshot_size(const EncoderConfig& cfg);
std::vector<std::uint8_t> serialize(const EncoderParams& params);
EncoderParams deserialize(std::span<const std::uint8_t> bytes);

void save_snapshot(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_snapshot(const std::filesystem::path& path);

// Order-sensitive hash of all parameter bits.
std::uint64_t checksum(const EncoderParams& params);

}  // namespace flesd
