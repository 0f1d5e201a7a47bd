#pragma once

// Sample preparation and the two-stage trainer.
//
// Each UE's feedback input and target are divided by the largest selected
// DL coefficient magnitude. Stage 1 (and the mse/ncs modes) batch by UE;
// stage 2 (and the nar/mix modes) batch by scene so the rate term sees
// co-scheduled UEs. batch_size counts UEs or scenes accordingly.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csifb/angular.hpp"
#include "csifb/csinet.hpp"
#include "csifb/losses.hpp"
#include "csifb/mueval.hpp"
#include "csifb/typeii.hpp"

namespace csifb::training {

enum class LossMode { mse, ncs, nar, mix, two_stage };

std::string to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view name);

struct TrainConfig {
  int epochs = 200;
  int stage1_epochs = 80;
  int batch_size = 32;
  double lr = 3e-2;
  double mu = 1e-3;
  int lr_decay_every = 50;
  double lr_decay_factor = 0.5;
  LossMode loss = LossMode::two_stage;
  std::uint64_t seed = 1;
  int val_scenes = 512;
  void validate() const;
};

// 1 or 2. Single-loss modes are stage 1 throughout.
int stage_for_epoch(int epoch, const TrainConfig& cfg);
double lr_for_epoch(int epoch, const TrainConfig& cfg);

struct MetricsRecord {
  int epoch = 0;
  int stage = 1;
  double loss_mse = 0.0;       // mean over the epoch's training batches
  double loss_nar = 0.0;       // validation split; NaN without one
  double val_sum_rate = 0.0;   // validation split; NaN without one
  double seconds = 0.0;        // NaN unless timing was requested
  int regularized_batches = 0;
};

struct UeSample {
  typeii::PortSelection selection;
  CVector coefficients;        // normalized DL coefficients at the ports
  std::vector<double> input;   // encoder_input(coefficients)
  CMatrix target;              // normalized DL angular-delay matrix
  double scale = 1.0;          // divisor applied to both
};

struct SceneSamples {
  std::uint64_t index = 0;
  std::vector<UeSample> ues;
  std::vector<CMatrix> h_dl;   // true spatial-frequency DL channels
};

struct PipelineConfig {
  int N_p = 32;
  typeii::SortMethod sorting = typeii::SortMethod::amplitude;
  std::uint64_t sort_seed = 1;  // random sorting only
};

// UL transform -> select -> sort -> gather DL coefficients -> normalize.
SceneSamples prepare_scene(const channel::ChannelScene& scene, std::uint64_t scene_index,
                           const angular::DftPair& dft, const PipelineConfig& cfg);

// Seed for random port ordering of one UE.
std::uint64_t sort_seed_for(std::uint64_t seed, std::uint64_t scene, std::uint64_t ue);

// Normalized angular-delay reconstructions -> rate with the true channels.
double scene_sum_rate(const SceneSamples& scene, const std::vector<CMatrix>& outputs_ad,
                      const angular::DftPair& dft, const mueval::LinkBudget& budget);

struct Validation {
  double loss_nar = 0.0;
  double sum_rate = 0.0;
};

Validation validate_model(csinet::TypeIICsiNet& model, std::span<const SceneSamples> scenes,
                          const angular::DftPair& dft, const mueval::LinkBudget& budget);

struct TrainOptions {
  bool timing = false;
  std::function<void(const MetricsRecord&)> on_epoch;
};

std::vector<MetricsRecord> train(csinet::TypeIICsiNet& model, std::span<const SceneSamples> train_set,
                                 std::span<const SceneSamples> val_set, const TrainConfig& cfg,
                                 const angular::DftPair& dft, const mueval::LinkBudget& budget,
                                 const TrainOptions& options = {});

}  // namespace csifb::training
