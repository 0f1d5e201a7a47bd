#pragma once

#include "csifb/channelgen.hpp"

namespace csifb::angular {

// Unitary DFT of size n: F[a, b] = exp(-j 2 pi a b / n) / sqrt(n).
CMatrix unitary_dft(int n);

// Angular basis F_A = diag(B, B) and delay basis F_D for an N_t x M channel.
// B is the unitary 2-D DFT of the N_h x N_v panel (Kronecker product
// F_{N_h} (x) F_{N_v}), which reduces to the plain N_t/2-point DFT when
// N_v = 1. Rows [0, N_t/2) are polarization 0.
class DftPair {
 public:
  DftPair(int N_h, int N_v, int M);

  int N_t() const { return static_cast<int>(angular_.rows()); }
  int M() const { return static_cast<int>(delay_.rows()); }
  const CMatrix& angular() const { return angular_; }
  const CMatrix& delay() const { return delay_; }

  // F_A^H H F_D.
  CMatrix to_angular_delay(const CMatrix& h) const;
  // F_A H~ F_D^H.
  CMatrix from_angular_delay(const CMatrix& h_tilde) const;

 private:
  void check(const CMatrix& m) const;
  CMatrix angular_;
  CMatrix delay_;
};

}  // namespace csifb::angular
