#pragma once

#include <random>
#include <vector>

#include "csifb/channelgen.hpp"
#include "csifb/tensor.hpp"

namespace testutil {

inline std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline csifb::tk::Tensor random_tensor(csifb::tk::Shape shape, std::uint64_t seed, bool grad = true) {
  const auto n = csifb::tk::numel(shape);
  return csifb::tk::Tensor(std::move(shape), uniform(n, seed), grad);
}

inline csifb::CMatrix random_cmatrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  csifb::CMatrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m(i) = {d(rng), d(rng)};
  return m;
}

// Fixed pseudo-random weights, so a scalar loss exercises every output entry.
inline std::vector<double> probe_weights(std::size_t n, std::uint64_t seed = 99) {
  return uniform(n, seed, 0.5, 1.5);
}

}  // namespace testutil
