#include "csifb/evaluate.hpp"

#include <algorithm>

#include "csifb/errors.hpp"

namespace csifb::mueval {

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::typeii_codebook: return "typeii-codebook";
    case Scheme::csinet: return "csinet";
    case Scheme::csinet_nofill: return "csinet-nofill";
    case Scheme::perfect_csi: return "perfect-csi";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "typeii-codebook") return Scheme::typeii_codebook;
  if (name == "csinet") return Scheme::csinet;
  if (name == "csinet-nofill") return Scheme::csinet_nofill;
  if (name == "perfect-csi") return Scheme::perfect_csi;
  throw ConfigError("unknown scheme '" + std::string(name) +
                    "' (expected typeii-codebook, csinet, csinet-nofill or perfect-csi)");
}

bool is_learned(Scheme scheme) {
  return scheme == Scheme::csinet || scheme == Scheme::csinet_nofill;
}

namespace {

bool needs_regularization(const std::vector<CMatrix>& recon) {
  for (const auto& h : per_subband(recon)) {
    const CMatrix hn = normalize_columns(h);
    const CMatrix gram = hn.adjoint() * hn;
    const double lambda = zf_lambda(gram);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < 1e3 * lambda) return true;
  }
  return false;
}

void check_model(Scheme scheme, const EvalConfig& cfg, const angular::DftPair& dft,
                 const csinet::TypeIICsiNet* model) {
  if (model == nullptr) throw ConfigError("scheme " + to_string(scheme) + " needs a checkpoint");
  const auto& mc = model->config();
  if (mc.ablation_no_fill != (scheme == Scheme::csinet_nofill)) {
    throw ConfigError("scheme " + to_string(scheme) + " does not match model ablation_no_fill=" +
                      (mc.ablation_no_fill ? "true" : "false"));
  }
  if (mc.N_p != cfg.N_p || mc.N_t != dft.N_t() || mc.M != dft.M()) {
    throw DimensionError("model (N_p=" + std::to_string(mc.N_p) + ", N_t=" +
                         std::to_string(mc.N_t) + ", M=" + std::to_string(mc.M) +
                         ") vs data (N_p=" + std::to_string(cfg.N_p) + ", N_t=" +
                         std::to_string(dft.N_t()) + ", M=" + std::to_string(dft.M()) + ")");
  }
}

}  // namespace

std::vector<std::vector<CMatrix>> reconstruct(Scheme scheme,
                                              std::span<const training::SceneSamples> scenes,
                                              const EvalConfig& cfg, const angular::DftPair& dft,
                                              csinet::TypeIICsiNet* model) {
  std::vector<std::vector<CMatrix>> out(scenes.size());
  if (scheme == Scheme::perfect_csi) {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (const auto& ue : scenes[i].ues) out[i].push_back(ue.target);
    }
    return out;
  }
  if (scheme == Scheme::typeii_codebook) {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (const auto& ue : scenes[i].ues) {
        const auto bits = typeii::quantize_typeii(ue.coefficients, ue.selection, cfg.quant, dft.N_t());
        const CVector w_hat = typeii::dequantize_typeii(bits, ue.selection, cfg.quant, dft.N_t());
        out[i].push_back(typeii::reconstruct_codebook(w_hat, ue.selection, dft.N_t(), dft.M()));
      }
    }
    return out;
  }
  check_model(scheme, cfg, dft, model);
  tk::NoGradGuard guard;
  std::vector<double> data;
  std::vector<typeii::PortSelection> selections;
  for (const auto& scene : scenes) {
    for (const auto& ue : scene.ues) {
      data.insert(data.end(), ue.input.begin(), ue.input.end());
      selections.push_back(ue.selection);
    }
  }
  const std::size_t width = 2 * static_cast<std::size_t>(cfg.N_p);
  const tk::Tensor input({selections.size(), width}, std::move(data));
  const auto encoded = model->encode(input, tk::Mode::eval);
  const std::size_t latent = static_cast<std::size_t>(model->config().latent_width());
  std::vector<FeedbackBitstream> streams;
  for (std::size_t b = 0; b < selections.size(); ++b) {
    streams.push_back(model->pack_latent(
        std::span<const std::uint32_t>(encoded.indices).subspan(b * latent, latent)));
  }
  const auto outputs =
      model->to_complex(model->decode(model->levels_from_bitstreams(streams), selections, tk::Mode::eval));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (std::size_t k = 0; k < scenes[i].ues.size(); ++k) out[i].push_back(outputs[offset++]);
  }
  return out;
}

SumRateReport evaluate_scheme(Scheme scheme, std::span<const training::SceneSamples> scenes,
                              const EvalConfig& cfg, const angular::DftPair& dft,
                              csinet::TypeIICsiNet* model) {
  cfg.budget.validate();
  if (scenes.empty()) throw ConfigError("evaluate: no scenes");
  if (is_learned(scheme)) check_model(scheme, cfg, dft, model);
  SumRateReport report;
  report.scheme = to_string(scheme);
  report.N_p = cfg.N_p;
  report.N_R = cfg.budget.N_R;
  report.sorting = typeii::to_string(cfg.sorting);
  switch (scheme) {
    case Scheme::typeii_codebook: report.feedback_bits = typeii::feedback_bit_length(cfg.quant, cfg.N_p); break;
    case Scheme::csinet:
    case Scheme::csinet_nofill: report.feedback_bits = model->config().latent_bits(); break;
    case Scheme::perfect_csi: report.feedback_bits = 0; break;
  }
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < scenes.size(); start += kChunk) {
    const auto chunk = scenes.subspan(start, std::min(kChunk, scenes.size() - start));
    const auto recon = reconstruct(scheme, chunk, cfg, dft, model);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto& scene = chunk[i];
      if (static_cast<int>(scene.ues.size()) != cfg.budget.K) {
        throw DimensionError("scene has " + std::to_string(scene.ues.size()) +
                             " UEs, link budget K=" + std::to_string(cfg.budget.K));
      }
      std::vector<CMatrix> spatial;
      for (std::size_t k = 0; k < recon[i].size(); ++k) {
        spatial.push_back(dft.from_angular_delay(recon[i][k] * scene.ues[k].scale));
      }
      if (scheme != Scheme::perfect_csi && needs_regularization(spatial)) report.regularized_flag = true;
      report.per_scene.push_back(sum_rate(scene.h_dl, zf_precoders(spatial), cfg.budget));
    }
  }
  summarize(report);
  return report;
}

}  // namespace csifb::mueval
