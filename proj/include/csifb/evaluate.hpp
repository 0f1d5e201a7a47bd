#pragma once

#include <span>
#include <string>
#include <string_view>

#include "csifb/csinet.hpp"
#include "csifb/mueval.hpp"
#include "csifb/training.hpp"

namespace csifb::mueval {

enum class Scheme { typeii_codebook, csinet, csinet_nofill, perfect_csi };

std::string to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);
bool is_learned(Scheme scheme);

struct EvalConfig {
  typeii::QuantConfig quant;
  LinkBudget budget;
  int N_p = 32;
  typeii::SortMethod sorting = typeii::SortMethod::amplitude;
};

// Learned schemes go through the actual feedback bitstream: encode, pack,
// unpack, decode. `model` must be non-null for them and its ablation flag
// must match the scheme.
SumRateReport evaluate_scheme(Scheme scheme, std::span<const training::SceneSamples> scenes,
                              const EvalConfig& cfg, const angular::DftPair& dft,
                              csinet::TypeIICsiNet* model = nullptr);

// Per-UE normalized angular-delay reconstructions for one batch of scenes.
std::vector<std::vector<CMatrix>> reconstruct(Scheme scheme,
                                              std::span<const training::SceneSamples> scenes,
                                              const EvalConfig& cfg, const angular::DftPair& dft,
                                              csinet::TypeIICsiNet* model);

}  // namespace csifb::mueval
