#include "csifb/mueval.hpp"

#include <cmath>

#include "csifb/errors.hpp"

namespace csifb::mueval {

double LinkBudget::per_ue_power_w() const {
  return std::pow(10.0, (P_total_dbm - 30.0) / 10.0) / (static_cast<double>(K) * M);
}

double LinkBudget::noise_power_w() const {
  const double dbm = -174.0 + 10.0 * std::log10(N_R * channel::kRbBandwidthHz) + noise_figure_db;
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

void LinkBudget::validate() const {
  if (K < 1 || M < 1 || N_R < 1) throw ConfigError("link budget needs K, M, N_R >= 1");
  if (!std::isfinite(P_total_dbm) || !std::isfinite(noise_figure_db)) {
    throw ConfigError("P_total_dbm and noise_figure_db must be finite");
  }
}

CMatrix zf_precoder(const CMatrix& h_hat) {
  const auto n_t = h_hat.rows(), k = h_hat.cols();
  if (k > n_t) {
    throw ConfigError("zero forcing needs K <= N_t (K=" + std::to_string(k) +
                      ", N_t=" + std::to_string(n_t) + ")");
  }
  const CMatrix hn = normalize_columns(h_hat);
  CMatrix gram = hn.adjoint() * hn;
  gram.diagonal().array() += zf_lambda(gram);
  return normalize_columns(hn * gram.inverse());
}

CMatrix normalize_columns(const CMatrix& m) {
  CMatrix out = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (n > 0.0) out.col(j) /= n;
  }
  return out;
}

double zf_lambda(const CMatrix& gram) {
  const double t = gram.trace().real();
  return kZfRegularization * (t > 0.0 ? t / static_cast<double>(gram.cols()) : 1.0);
}

std::vector<CMatrix> per_subband(const std::vector<CMatrix>& per_ue) {
  if (per_ue.empty()) return {};
  const auto n_t = per_ue.front().rows(), m = per_ue.front().cols();
  std::vector<CMatrix> out(m, CMatrix(n_t, per_ue.size()));
  for (std::size_t k = 0; k < per_ue.size(); ++k) {
    if (per_ue[k].rows() != n_t || per_ue[k].cols() != m) {
      throw DimensionError("per_subband: UE matrices differ in shape");
    }
    for (Eigen::Index s = 0; s < m; ++s) out[s].col(k) = per_ue[k].col(s);
  }
  return out;
}

std::vector<CMatrix> zf_precoders(const std::vector<CMatrix>& reconstructions) {
  std::vector<CMatrix> out;
  for (const auto& h : per_subband(reconstructions)) out.push_back(zf_precoder(h));
  return out;
}

RateDetail sum_rate_detail(const std::vector<CMatrix>& h_true, const std::vector<CMatrix>& precoders,
                           double power_w, double noise_w) {
  const auto channels = per_subband(h_true);
  if (channels.size() != precoders.size()) {
    throw DimensionError("sum_rate: " + std::to_string(precoders.size()) +
                         " precoders for " + std::to_string(channels.size()) + " subbands");
  }
  const std::size_t k_count = h_true.size();
  RateDetail out;
  out.ue_rate.assign(k_count, 0.0);
  for (std::size_t m = 0; m < channels.size(); ++m) {
    if (precoders[m].cols() != static_cast<Eigen::Index>(k_count) ||
        precoders[m].rows() != channels[m].rows()) {
      throw DimensionError("sum_rate: precoder shape mismatch on subband " + std::to_string(m));
    }
    // a(k, j) = h_k^H v_j
    const CMatrix a = channels[m].adjoint() * precoders[m];
    std::vector<double> sinr(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      double interference = 0.0;
      for (std::size_t j = 0; j < k_count; ++j) {
        if (j != k) interference += power_w * std::norm(a(k, j));
      }
      sinr[k] = power_w * std::norm(a(k, k)) / (interference + noise_w);
      out.ue_rate[k] += std::log2(1.0 + sinr[k]);
    }
    out.sinr.push_back(std::move(sinr));
  }
  const double inv_m = 1.0 / static_cast<double>(channels.size());
  for (auto& r : out.ue_rate) {
    r *= inv_m;
    out.sum_rate += r;
  }
  return out;
}

double sum_rate(const std::vector<CMatrix>& h_true, const std::vector<CMatrix>& precoders,
                const LinkBudget& budget) {
  return sum_rate_detail(h_true, precoders, budget.per_ue_power_w(), budget.noise_power_w())
      .sum_rate;
}

void summarize(SumRateReport& report) {
  const auto n = static_cast<double>(report.per_scene.size());
  if (n == 0) {
    report.mean = report.stderr_ = 0.0;
    return;
  }
  double s = 0.0;
  for (double v : report.per_scene) s += v;
  report.mean = s / n;
  double ss = 0.0;
  for (double v : report.per_scene) ss += (v - report.mean) * (v - report.mean);
  report.stderr_ = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
}

}  // namespace csifb::mueval
