#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csifb/tensor.hpp"

namespace csifb::tk {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<input>#<element>" of the worst entry
  bool passed = false;
};

// Compares backward() gradients of a scalar-valued computation against
// central differences. `f` must rebuild its graph from the current data of
// `inputs` on each call and be deterministic. Per-element error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor) with
// floor = 1e-7 * max(1, max |numeric|), so entries with vanishing gradient
// are compared on an absolute scale.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  double step = 1e-5, double tolerance = 1e-4);

}  // namespace csifb::tk
