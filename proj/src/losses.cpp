#include "csifb/losses.hpp"

#include <cmath>
#include <numbers>

#include "csifb/errors.hpp"
#include "csifb/mueval.hpp"

namespace csifb::training {

namespace {

void check_pairs(const std::vector<CMatrix>& a, const std::vector<CMatrix>& b, const char* op) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(a.size()) + " targets vs " +
                         std::to_string(b.size()) + " outputs");
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols()) {
      throw DimensionError(std::string(op) + ": UE " + std::to_string(k) + " shape " +
                           std::to_string(a[k].rows()) + "x" + std::to_string(a[k].cols()) +
                           " vs " + std::to_string(b[k].rows()) + "x" +
                           std::to_string(b[k].cols()));
    }
  }
}

}  // namespace

LossValue loss_mse(const std::vector<CMatrix>& targets, const std::vector<CMatrix>& outputs) {
  check_pairs(targets, outputs, "loss_mse");
  const double inv_k = 1.0 / static_cast<double>(targets.size());
  LossValue out;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const CMatrix diff = outputs[k] - targets[k];
    out.value += diff.squaredNorm() * inv_k;
    out.grad.push_back(2.0 * inv_k * diff);
  }
  return out;
}

LossValue loss_ncs(const std::vector<CMatrix>& targets, const std::vector<CMatrix>& outputs) {
  check_pairs(targets, outputs, "loss_ncs");
  const double inv_k = 1.0 / static_cast<double>(targets.size());
  LossValue out;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const CMatrix& a = targets[k];
    const CMatrix& b = outputs[k];
    const double na = a.norm(), nb = b.norm();
    CMatrix g = CMatrix::Zero(b.rows(), b.cols());
    if (na > 0.0 && nb > 0.0) {
      const std::complex<double> s = (a.array().conjugate() * b.array()).sum();
      const double abs_s = std::abs(s);
      const double t = abs_s / (na * nb);
      out.value -= t * inv_k;
      if (abs_s > 0.0) g += (s / abs_s) * a / (na * nb);
      g -= t * b / (nb * nb);
      g *= -inv_k;
    }
    out.grad.push_back(std::move(g));
  }
  return out;
}

LossValue loss_nar_spatial(const std::vector<CMatrix>& h_true,
                           const std::vector<CMatrix>& reconstructions, double power_w,
                           double noise_w) {
  check_pairs(h_true, reconstructions, "loss_nar");
  const auto k_count = static_cast<Eigen::Index>(h_true.size());
  const Eigen::Index m_count = h_true.front().cols();
  const double rate_scale = 1.0 / (static_cast<double>(m_count) * k_count);
  const auto recon = mueval::per_subband(reconstructions);
  const auto truth = mueval::per_subband(h_true);

  LossValue out;
  out.grad.assign(h_true.size(), CMatrix::Zero(h_true.front().rows(), m_count));
  for (Eigen::Index m = 0; m < m_count; ++m) {
    // ZF acts on unit-norm reconstructions; see mueval::zf_precoder.
    const CMatrix& raw = recon[m];
    Eigen::VectorXd raw_norms(k_count);
    for (Eigen::Index j = 0; j < k_count; ++j) raw_norms(j) = raw.col(j).norm();
    const CMatrix hh = mueval::normalize_columns(raw);
    const CMatrix gram0 = hh.adjoint() * hh;
    const double lambda = mueval::zf_lambda(gram0);
    {
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram0, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < 1e3 * lambda) out.regularized = true;
    }
    CMatrix gram = gram0;
    gram.diagonal().array() += lambda;
    const CMatrix w = gram.inverse();
    const CMatrix u = hh * w;
    Eigen::VectorXd norms(k_count);
    CMatrix v = u;
    for (Eigen::Index j = 0; j < k_count; ++j) {
      norms(j) = u.col(j).norm();
      if (norms(j) > 0.0) v.col(j) /= norms(j);
    }
    const CMatrix a = truth[m].adjoint() * v;  // a(k, j) = h_k^H v_j

    CMatrix ga = CMatrix::Zero(k_count, k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      double total = noise_w;
      for (Eigen::Index j = 0; j < k_count; ++j) total += power_w * std::norm(a(k, j));
      const double interference = total - power_w * std::norm(a(k, k));
      const double rate = std::log2(total) - std::log2(interference);
      out.value -= rate * rate_scale;
      for (Eigen::Index j = 0; j < k_count; ++j) {
        const double d_abs2 =
            -rate_scale * power_w / std::numbers::ln2 * (1.0 / total - (j != k ? 1.0 / interference : 0.0));
        ga(k, j) = 2.0 * d_abs2 * a(k, j);
      }
    }
    const CMatrix gv = truth[m] * ga;
    CMatrix gu(gv.rows(), k_count);
    for (Eigen::Index j = 0; j < k_count; ++j) {
      if (norms(j) == 0.0) {
        gu.col(j).setZero();
        continue;
      }
      const double radial = (v.col(j).adjoint() * gv.col(j))(0, 0).real();
      gu.col(j) = (gv.col(j) - v.col(j) * radial) / norms(j);
    }
    CMatrix gh = gu * w.adjoint();
    const CMatrix gw = hh.adjoint() * gu;
    const CMatrix gg = -w.adjoint() * gw * w.adjoint();
    gh += hh * (gg + gg.adjoint());
    // lambda is constant here: the normalized Gram has a fixed trace.
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (raw_norms(k) == 0.0) continue;
      const double radial = (hh.col(k).adjoint() * gh.col(k))(0, 0).real();
      out.grad[k].col(m) = (gh.col(k) - hh.col(k) * radial) / raw_norms(k);
    }
  }
  return out;
}

LossValue loss_nar(const std::vector<CMatrix>& h_true, const std::vector<CMatrix>& outputs_ad,
                   const angular::DftPair& dft, double power_w, double noise_w) {
  std::vector<CMatrix> spatial;
  spatial.reserve(outputs_ad.size());
  for (const auto& o : outputs_ad) spatial.push_back(dft.from_angular_delay(o));
  LossValue out = loss_nar_spatial(h_true, spatial, power_w, noise_w);
  // Adjoint of H = F_A X F_D^H is F_A^H G F_D.
  for (auto& g : out.grad) g = dft.to_angular_delay(g);
  return out;
}

LossValue loss_mix(const std::vector<CMatrix>& targets, const std::vector<CMatrix>& outputs_ad,
                   const std::vector<CMatrix>& h_true, const angular::DftPair& dft, double power_w,
                   double noise_w, double mu) {
  if (mu < 0) throw ConfigError("loss_mix: mu must be non-negative");
  LossValue mse = loss_mse(targets, outputs_ad);
  if (mu == 0.0) return mse;
  const LossValue nar = loss_nar(h_true, outputs_ad, dft, power_w, noise_w);
  mse.value += mu * nar.value;
  for (std::size_t k = 0; k < mse.grad.size(); ++k) mse.grad[k] += mu * nar.grad[k];
  mse.regularized = nar.regularized;
  return mse;
}

}  // namespace csifb::training
