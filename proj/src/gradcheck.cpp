#include "csifb/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "csifb/errors.hpp"

namespace csifb::tk {

GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  double step, double tolerance) {
  for (auto& t : inputs) t.zero_grad();
  Tensor out = f();
  if (!std::isfinite(out.item())) throw NumericalError("finite_diff_check: non-finite output");
  out.backward();

  std::vector<std::vector<double>> analytic;
  std::vector<std::vector<double>> numeric;
  double scale = 1.0;
  for (auto& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    std::vector<double> num(t.size());
    auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = f().item();
      data[i] = saved - step;
      const double down = f().item();
      data[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("finite_diff_check: non-finite value while perturbing element " +
                             std::to_string(i));
      }
      num[i] = (up - down) / (2.0 * step);
      scale = std::max(scale, std::abs(num[i]));
    }
    numeric.push_back(std::move(num));
  }

  GradCheckReport report;
  const double floor = 1e-7 * scale;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i], n = numeric[k][i];
      if (!std::isfinite(a)) throw NumericalError("finite_diff_check: non-finite gradient");
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      const double err = std::abs(a - n) / denom;
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = std::to_string(k) + "#" + std::to_string(i);
      }
    }
  }
  for (auto& t : inputs) t.zero_grad();
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace csifb::tk
