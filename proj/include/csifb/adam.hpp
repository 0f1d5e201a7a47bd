#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csifb/tensor.hpp"

namespace csifb::tk {

// Named trainable tensors. std::map keeps iteration lexicographic by name.
class ParameterSet {
 public:
  // Registers a leaf tensor with requires_grad set. Names must be unique.
  Tensor& add(const std::string& name, Tensor tensor);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

 private:
  std::map<std::string, Tensor> tensors_;
};

struct AdamState {
  double lr = 3e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

// One bias-corrected Adam update over every parameter, then zero the grads.
// Throws if a parameter has no accumulated gradient.
void adam_step(ParameterSet& params, AdamState& state);

}  // namespace csifb::tk
