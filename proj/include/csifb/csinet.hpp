#pragma once

// TypeII-CsiNet: an FC encoder with a quantized latent that compresses the
// sorted port coefficients, and a decoder that scatters its coarse
// coefficient estimate back into the angular-delay grid (position filling)
// before residual convolutional refinement.
//
// Decoder topology with conv_blocks = 10:
//   V   = fill(dropout(FC(latent)))
//   y1  = CB1(V)
//   y3  = lrelu(BN(conv(CB2(y1))) + y1)      pairs (2,3), (4,5), (6,7), (8,9)
//   ...
//   out = conv_CB10(y9) + V
// The no-fill ablation returns V directly (selected ports only).
//
// The model works on per-UE normalized data: inputs are divided by the
// largest selected-port magnitude, and outputs are in the same units.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csifb/adam.hpp"
#include "csifb/bitstream.hpp"
#include "csifb/layers.hpp"
#include "csifb/typeii.hpp"

namespace csifb::csinet {

struct ModelConfig {
  int N_p = 32;
  int N_t = 32;
  int M = 16;
  int B = 165;
  unsigned Q_u = 2;
  int hidden_width = 1024;
  int conv_channels = 128;
  int conv_blocks = 10;
  double lrelu_enc = 0.3;
  double lrelu_dec = 0.1;
  double dropout_dec = 0.02;
  double surrogate_temperature = 25.0;
  bool ablation_no_fill = false;

  int latent_width() const { return B / static_cast<int>(Q_u); }
  std::size_t latent_bits() const { return static_cast<std::size_t>(latent_width()) * Q_u; }
  void validate() const;
  // Stable text form of every architecture field; hashed into checkpoints.
  std::string canonical() const;
  std::uint64_t digest() const;
};

// [Re(w)^T, Im(w)^T].
std::vector<double> encoder_input(const CVector& w);

// Scatter [batch, 2 N_p] (real parts then imaginary parts) into
// [batch, 2, N_t, M] at each sample's port positions. Backward gathers.
tk::Tensor position_fill(const tk::Tensor& coefficients,
                         std::span<const typeii::PortSelection> selections, int N_t, int M);

struct EncodeOutput {
  tk::Tensor levels;                    // [batch, latent_width]
  std::vector<std::uint32_t> indices;  // row-major level indices
};

class TypeIICsiNet {
 public:
  TypeIICsiNet(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  tk::ParameterSet& parameters() { return params_; }
  const tk::ParameterSet& parameters() const { return params_; }
  std::map<std::string, tk::BatchNormState>& batchnorm_states() { return bn_; }
  const std::map<std::string, tk::BatchNormState>& batchnorm_states() const { return bn_; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  // input [batch, 2 N_p] -> quantized latent levels.
  EncodeOutput encode(const tk::Tensor& input, tk::Mode mode,
                      tk::QuantizerForward quantizer = tk::QuantizerForward::hard);
  // levels [batch, latent_width] -> [batch, 2, N_t, M].
  tk::Tensor decode(const tk::Tensor& levels, std::span<const typeii::PortSelection> selections,
                    tk::Mode mode);
  tk::Tensor forward(const tk::Tensor& input, std::span<const typeii::PortSelection> selections,
                     tk::Mode mode, tk::QuantizerForward quantizer = tk::QuantizerForward::hard);

  // One sample's latent indices <-> feedback bits (Q_u bits per unit).
  FeedbackBitstream pack_latent(std::span<const std::uint32_t> indices) const;
  std::vector<std::uint32_t> unpack_latent(const FeedbackBitstream& bits) const;
  tk::Tensor levels_from_bitstreams(std::span<const FeedbackBitstream> streams) const;

  // [batch, 2, N_t, M] -> complex N_t x M per sample.
  std::vector<CMatrix> to_complex(const tk::Tensor& output) const;

  // Parameters and BN running statistics by frozen name.
  struct StateEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
  };
  std::vector<StateEntry> state() const;
  void load_state(const std::vector<StateEntry>& entries);

 private:
  void add_linear(const std::string& name, int f_in, int f_out, bool with_bn, std::mt19937_64& rng);
  void add_conv(const std::string& name, int c_in, int c_out, bool with_bn, std::mt19937_64& rng);
  tk::Tensor linear_bn(const std::string& name, const tk::Tensor& x, tk::Mode mode);
  tk::Tensor conv_bn(const std::string& name, const tk::Tensor& x, tk::Mode mode);
  tk::Tensor conv_plain(const std::string& name, const tk::Tensor& x);

  ModelConfig cfg_;
  tk::ParameterSet params_;
  std::map<std::string, tk::BatchNormState> bn_;
  std::mt19937_64 dropout_rng_;
};

// Trainable scalar count implied by the architecture table.
std::size_t parameter_count(const ModelConfig& cfg);

}  // namespace csifb::csinet
