#pragma once

#include <string>
#include <vector>

#include "csifb/channelgen.hpp"

namespace csifb::mueval {

struct LinkBudget {
  double P_total_dbm = 35.0;
  double noise_figure_db = 5.0;
  int K = 5;
  int M = 16;
  int N_R = 4;

  // P_total split evenly over UEs and subbands, watts.
  double per_ue_power_w() const;
  // Thermal noise over one subband (N_R RBs) plus noise figure, watts.
  double noise_power_w() const;
  void validate() const;
};

// Regularization weight for the ZF Gram inverse, relative to trace / K.
inline constexpr double kZfRegularization = 1e-9;

// Columns of `h_hat` (N_t x K) are the reconstructed channels of one
// subband. Returns V = H (H^H H + lambda I)^-1 with unit-norm columns,
// lambda = 1e-9 trace(H^H H) / K, where H is h_hat with unit-norm columns.
// Normalizing first keeps the directions exactly invariant to per-UE
// scaling; with the raw matrix the trace term would move with the scale.
CMatrix zf_precoder(const CMatrix& h_hat);

// Zero columns stay zero.
CMatrix normalize_columns(const CMatrix& m);
// 1e-9 trace / K of a Gram matrix, or 1e-9 when the trace is zero.
double zf_lambda(const CMatrix& gram);

// Stacks column m of every UE's N_t x M matrix into per-subband N_t x K.
std::vector<CMatrix> per_subband(const std::vector<CMatrix>& per_ue);

std::vector<CMatrix> zf_precoders(const std::vector<CMatrix>& reconstructions);

struct RateDetail {
  double sum_rate = 0.0;
  std::vector<double> ue_rate;              // averaged over subbands
  std::vector<std::vector<double>> sinr;    // [m][k]
};

// (1/M) sum_m sum_k log2(1 + SINR_{m,k}) with the true channels.
RateDetail sum_rate_detail(const std::vector<CMatrix>& h_true, const std::vector<CMatrix>& precoders,
                           double power_w, double noise_w);
double sum_rate(const std::vector<CMatrix>& h_true, const std::vector<CMatrix>& precoders,
                const LinkBudget& budget);

struct SumRateReport {
  std::string scheme;
  std::vector<double> per_scene;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t feedback_bits = 0;
  int N_p = 0;
  int N_R = 0;
  std::string sorting;
  bool regularized_flag = false;
};

// Fills mean and standard error from per_scene.
void summarize(SumRateReport& report);

}  // namespace csifb::mueval
