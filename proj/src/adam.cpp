#include "csifb/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "csifb/errors.hpp"

namespace csifb::tk {

Tensor& ParameterSet::add(const std::string& name, Tensor tensor) {
  if (tensors_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  return tensors_.emplace(name, std::move(tensor)).first->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

void adam_step(ParameterSet& params, AdamState& state) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) throw NumericalError("adam_step: parameter '" + name + "' has no gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, tensor] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) {
      m.assign(tensor.size(), 0.0);
      v.assign(tensor.size(), 0.0);
    }
    auto data = tensor.data();
    auto grad = tensor.grad_mut();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
      grad[i] = 0.0;
    }
  }
}

}  // namespace csifb::tk
