#pragma once

// Reconstruction losses over K UE matrices. Each returns the value and the
// gradient with respect to every output matrix, using the convention
// grad = dL/dRe + j dL/dIm.

#include <vector>

#include "csifb/angular.hpp"

namespace csifb::training {

struct LossValue {
  double value = 0.0;
  std::vector<CMatrix> grad;
  // A subband Gram matrix was ill-conditioned enough for the ZF
  // regularizer to matter.
  bool regularized = false;
};

// (1/K) sum_k ||T_k - O_k||_F^2
LossValue loss_mse(const std::vector<CMatrix>& targets, const std::vector<CMatrix>& outputs);

// -(1/K) sum_k |<T_k, O_k>| / (||T_k|| ||O_k||); zero-norm terms contribute 0.
LossValue loss_ncs(const std::vector<CMatrix>& targets, const std::vector<CMatrix>& outputs);

// -R_SUM / K with ZF precoders built from the spatial-frequency
// reconstructions and rates measured on the true channels.
LossValue loss_nar_spatial(const std::vector<CMatrix>& h_true,
                           const std::vector<CMatrix>& reconstructions, double power_w,
                           double noise_w);

// Same, for angular-delay reconstructions (gradient in the angular-delay domain).
LossValue loss_nar(const std::vector<CMatrix>& h_true, const std::vector<CMatrix>& outputs_ad,
                   const angular::DftPair& dft, double power_w, double noise_w);

// L_MSE + mu L_NAR
LossValue loss_mix(const std::vector<CMatrix>& targets, const std::vector<CMatrix>& outputs_ad,
                   const std::vector<CMatrix>& h_true, const angular::DftPair& dft, double power_w,
                   double noise_w, double mu);

}  // namespace csifb::training
