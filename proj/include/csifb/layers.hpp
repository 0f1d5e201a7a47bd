#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "csifb/tensor.hpp"

namespace csifb::tk {

enum class Mode { train, eval };

// y = x W + b for x [batch, f_i], W [f_i, f_o], b [f_o].
Tensor fc(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Same-size 3x3 convolution, stride 1, zero padding 1.
// x [batch, c_i, H, W], kernel [c_o, c_i, 3, 3], bias [c_o].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

struct BatchNormState {
  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalization of x [batch, c, ...] over the batch and trailing
// axes. Train mode uses batch statistics and updates the running ones.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                 Mode mode);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
Tensor dropout(const Tensor& x, double p, Mode mode, std::mt19937_64& rng);
Tensor add(const Tensor& a, const Tensor& b);

// Scalar reductions, mostly for losses and gradient checks.
Tensor sum(const Tensor& x);
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);

// Latent quantizer: 2^bits midpoint levels on [-1, 1].
enum class QuantizerForward {
  hard,       // nearest level, surrogate derivative in backward
  surrogate,  // the smooth staircase itself, for gradient checking
};

struct QuantizedOutput {
  Tensor levels;
  std::vector<std::uint32_t> indices;  // level index per element (hard forward)
};

QuantizedOutput quantize_uniform_ste(const Tensor& x, unsigned bits, double temperature,
                                     QuantizerForward forward = QuantizerForward::hard);

double uniform_level(std::uint32_t index, unsigned bits);
std::uint32_t uniform_index(double x, unsigned bits);
double staircase_surrogate(double x, unsigned bits, double temperature);
double staircase_surrogate_derivative(double x, unsigned bits, double temperature);

}  // namespace csifb::tk
