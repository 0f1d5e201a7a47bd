#include "csifb/angular.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "csifb/errors.hpp"

namespace csifb::angular {

CMatrix unitary_dft(int n) {
  CMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      // Reduce the exponent first so large n keeps full phase accuracy.
      const int k = (a * b) % n;
      f(a, b) = std::polar(scale, -2.0 * std::numbers::pi * k / n);
    }
  }
  return f;
}

DftPair::DftPair(int N_h, int N_v, int M) {
  if (N_h < 1 || N_v < 1 || M < 1) throw ConfigError("DftPair: dimensions must be positive");
  const CMatrix fh = unitary_dft(N_h);
  const CMatrix fv = unitary_dft(N_v);
  const int half = N_h * N_v;
  CMatrix b(half, half);
  for (int p = 0; p < N_h; ++p)
    for (int q = 0; q < N_v; ++q)
      for (int r = 0; r < N_h; ++r)
        for (int s = 0; s < N_v; ++s) b(p * N_v + q, r * N_v + s) = fh(p, r) * fv(q, s);
  angular_ = CMatrix::Zero(2 * half, 2 * half);
  angular_.topLeftCorner(half, half) = b;
  angular_.bottomRightCorner(half, half) = b;
  delay_ = unitary_dft(M);
}

void DftPair::check(const CMatrix& m) const {
  if (m.rows() != angular_.rows() || m.cols() != delay_.rows()) {
    throw DimensionError("angular-delay transform expects " + std::to_string(angular_.rows()) +
                         "x" + std::to_string(delay_.rows()) + ", got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

CMatrix DftPair::to_angular_delay(const CMatrix& h) const {
  check(h);
  return angular_.adjoint() * h * delay_;
}

CMatrix DftPair::from_angular_delay(const CMatrix& h_tilde) const {
  check(h_tilde);
  return angular_ * h_tilde * delay_.adjoint();
}

}  // namespace csifb::angular
