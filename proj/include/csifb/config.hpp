#pragma once

// Flat-key experiment configuration. Files are JSON objects whose keys are
// the dotted names below; unknown keys are rejected.
//
//   scene.*    K N_h N_v M N_R f_ul_hz f_dl_hz cell_radius_m clusters delay_spread_s seed
//   codebook.* N_p Q_n Q_a Q_p
//   pipeline.* sorting sort_seed
//   model.*    N_p B Q_u hidden_width conv_channels conv_blocks lrelu_enc lrelu_dec
//              dropout surrogate_temperature ablation_no_fill
//   train.*    epochs stage1_epochs batch_size lr mu lr_decay_every lr_decay_factor
//              loss seed val_scenes
//   budget.*   P_total_dbm noise_figure_db
//   data.*     train_scenes test_scenes test_seed
//   sweep.*    schemes seeds
//   output.dir

#include <string>
#include <vector>

#include "csifb/channelgen.hpp"
#include "csifb/csinet.hpp"
#include "csifb/evaluate.hpp"
#include "csifb/mueval.hpp"
#include "csifb/training.hpp"
#include "csifb/typeii.hpp"

namespace csifb::harness {

struct ExperimentConfig {
  channel::SceneConfig scene;
  int codebook_N_p = 32;
  typeii::QuantConfig quant;
  typeii::SortMethod sorting = typeii::SortMethod::amplitude;
  std::uint64_t sort_seed = 1;
  csinet::ModelConfig model;  // N_t and M are derived from the scene
  training::TrainConfig train;
  double P_total_dbm = 35.0;
  double noise_figure_db = 5.0;
  int train_scenes = 8192;
  int test_scenes = 512;
  std::uint64_t test_seed = 2;
  std::vector<mueval::Scheme> sweep_schemes = {
      mueval::Scheme::typeii_codebook, mueval::Scheme::csinet, mueval::Scheme::csinet_nofill,
      mueval::Scheme::perfect_csi};
  int sweep_seeds = 1;
  std::string output_dir = "out";

  // Copies scene dimensions into the model. Call after editing fields.
  void sync();
  // Field-level and cross-field checks; messages name the keys involved.
  void validate() const;

  mueval::LinkBudget budget() const;
  training::PipelineConfig pipeline() const;
  mueval::EvalConfig eval_config() const;
  angular::DftPair dft() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
// Every key, sorted, pretty-printed; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& cfg);

// (Q_a, Q_p) giving exactly B = Q_n + N_p (Q_a + Q_p) bits, preferring the
// most balanced split with Q_p >= Q_a.
typeii::QuantConfig quant_for_bits(int B, int N_p, unsigned Q_n);

}  // namespace csifb::harness
