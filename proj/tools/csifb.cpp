// Command-line front end: gen, train, eval, sweep.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <sstream>

#include "csifb/errors.hpp"
#include "csifb/experiments.hpp"

using namespace csifb;

namespace {

std::vector<std::string> split(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TypeII-codebook CSI feedback experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (flat-key JSON)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("gen", "generate a channel dataset");
  add_config(gen);
  std::optional<int> gen_scenes;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  gen->add_option("--scenes", gen_scenes, "scene count (default data.train_scenes)");
  gen->add_option("--seed", gen_seed, "generator seed (default scene.seed)");
  gen->add_option("--out", gen_out, "dataset path")->required();

  auto* train = app.add_subcommand("train", "train TypeII-CsiNet");
  add_config(train);
  harness::TrainPaths train_paths;
  std::optional<std::string> train_loss;
  std::optional<std::uint64_t> train_seed;
  bool timing = false;
  bool no_fill = false;
  train->add_option("--data", train_paths.data, "training dataset")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_paths.checkpoint, "checkpoint path")->required();
  train->add_option("--metrics", train_paths.metrics, "metrics CSV (default <out>.metrics.csv)");
  train->add_option("--loss", train_loss, "mse | ncs | nar | mix | two-stage");
  train->add_option("--seed", train_seed, "training seed (default train.seed)");
  train->add_flag("--no-fill", no_fill, "train the variant without position filling");
  train->add_flag("--timing", timing, "record wall-clock seconds per epoch (output is then not reproducible)");

  auto* eval = app.add_subcommand("eval", "evaluate one scheme and append a results row");
  add_config(eval);
  std::string eval_data, eval_scheme, eval_out;
  std::optional<std::string> eval_ckpt;
  std::optional<std::string> eval_loss;
  eval->add_option("--data", eval_data, "test dataset")->required()->check(CLI::ExistingFile);
  eval->add_option("--scheme", eval_scheme, "typeii-codebook | csinet | csinet-nofill | perfect-csi")
      ->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint for learned schemes");
  eval->add_option("--loss", eval_loss, "loss the checkpoint was trained with (results label)");
  eval->add_option("--out", eval_out, "results CSV (default <output.dir>/results.csv)");

  auto* sw = app.add_subcommand("sweep", "train and evaluate along one axis");
  add_config(sw);
  std::string axis, values, sweep_out;
  int parallel = 1;
  sw->add_option("--axis", axis, "B | Np | NR | sorting | loss")->required();
  sw->add_option("--values", values, "comma-separated axis values")->required();
  sw->add_option("--parallel", parallel, "points run concurrently")->check(CLI::PositiveNumber);
  sw->add_option("--out", sweep_out, "results CSV (default <output.dir>/sweep_<axis>.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    harness::ExperimentConfig cfg = harness::load_config(config_path);
    if (gen->parsed()) {
      harness::run_gen(cfg, gen_scenes.value_or(cfg.train_scenes), gen_seed.value_or(cfg.scene.seed),
                       gen_out, std::cout);
    } else if (train->parsed()) {
      if (train_loss) cfg.train.loss = training::parse_loss_mode(*train_loss);
      if (train_seed) cfg.train.seed = *train_seed;
      cfg.model.ablation_no_fill = no_fill;
      harness::run_train(cfg, train_paths, timing, std::cout);
    } else if (eval->parsed()) {
      if (eval_loss) cfg.train.loss = training::parse_loss_mode(*eval_loss);
      const std::string out = eval_out.empty() ? cfg.output_dir + "/results.csv" : eval_out;
      harness::run_eval(cfg, eval_data, mueval::parse_scheme(eval_scheme), eval_ckpt, out, std::cout);
    } else if (sw->parsed()) {
      const auto ax = harness::parse_axis(axis);
      const std::string out =
          sweep_out.empty() ? cfg.output_dir + "/sweep_" + harness::to_string(ax) + ".csv" : sweep_out;
      harness::run_sweep(cfg, ax, split(values), parallel, out, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
