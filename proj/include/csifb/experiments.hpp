#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csifb/config.hpp"
#include "csifb/evaluate.hpp"
#include "csifb/formats.hpp"

namespace csifb::harness {

Dataset generate_dataset(const channel::SceneConfig& scene, int count, std::uint64_t seed);

struct DatasetSummary {
  std::size_t scenes = 0;
  double mean_ul_energy = 0.0;  // mean ||H_UL||_F^2 per UE
  double mean_dl_energy = 0.0;
  double port_overlap = 0.0;    // mean |top-N_p UL ports ∩ top-N_p DL ports| / N_p
};

DatasetSummary summarize_dataset(const Dataset& data, const ExperimentConfig& cfg);

// Throws DimensionError naming the config and dataset values on mismatch.
void check_dataset(const Dataset& data, const ExperimentConfig& cfg);

std::vector<training::SceneSamples> prepare_samples(const std::vector<channel::ChannelScene>& scenes,
                                                    const ExperimentConfig& cfg,
                                                    std::size_t first_index = 0);

// Training on prepared samples; the last cfg.train.val_scenes scenes
// are held out for validation metrics.
std::vector<training::MetricsRecord> train_model(csinet::TypeIICsiNet& model,
                                                 const std::vector<training::SceneSamples>& samples,
                                                 const ExperimentConfig& cfg,
                                                 const training::TrainOptions& options = {});

void run_gen(const ExperimentConfig& cfg, int scenes, std::uint64_t seed, const std::string& out_path,
             std::ostream& log);

struct TrainPaths {
  std::string data;
  std::string checkpoint;
  std::string metrics;  // defaults to <checkpoint>.metrics.csv
};

std::vector<training::MetricsRecord> run_train(const ExperimentConfig& cfg, const TrainPaths& paths,
                                               bool timing, std::ostream& log);

mueval::SumRateReport run_eval(const ExperimentConfig& cfg, const std::string& data_path,
                               mueval::Scheme scheme, const std::optional<std::string>& checkpoint,
                               const std::string& results_path, std::ostream& log);

enum class SweepAxis { B, Np, NR, sorting, loss };
SweepAxis parse_axis(std::string_view name);
std::string to_string(SweepAxis axis);

// Copy of cfg with one axis value applied (B also sets the codebook split via
// quant_for_bits; Np sets both the codebook and model N_p).
ExperimentConfig apply_axis(ExperimentConfig cfg, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;  // axis value as given
  ResultRow row;
};

struct SweepOptions {
  int parallel = 1;
  bool write_metrics = true;  // per-run metrics CSVs under output.dir
  std::ostream* log = nullptr;
};

// One row per (value, scheme), in axis order then scheme order. Learned
// schemes pool per-scene rates over sweep.seeds training seeds.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, SweepAxis axis,
                            const std::vector<std::string>& values, const SweepOptions& options);

// Plain-text table ordered by descending mean rate.
std::string summary_table(SweepAxis axis, const std::vector<SweepRow>& rows);

void run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<std::string>& values,
               int parallel, const std::string& results_path, std::ostream& log);

}  // namespace csifb::harness
