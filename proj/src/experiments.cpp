#include "csifb/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "csifb/errors.hpp"

namespace csifb::harness {

namespace {

namespace fs = std::filesystem;

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string dump_path(const std::string& output) { return output + ".config.json"; }

}  // namespace

Dataset generate_dataset(const channel::SceneConfig& scene, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("scene count must be >= 1 (got " + std::to_string(count) + ")");
  channel::SceneConfig sc = scene;
  sc.seed = seed;
  sc.validate();
  Dataset d;
  d.K = static_cast<std::uint32_t>(sc.K);
  d.N_t = static_cast<std::uint32_t>(sc.N_t());
  d.M = static_cast<std::uint32_t>(sc.M);
  d.seed = seed;
  d.scenes.reserve(count);
  for (int s = 0; s < count; ++s) {
    d.scenes.push_back(channel::generate_scene(sc, static_cast<std::uint64_t>(s)));
    round_to_float(d.scenes.back());
  }
  return d;
}

DatasetSummary summarize_dataset(const Dataset& data, const ExperimentConfig& cfg) {
  DatasetSummary s;
  s.scenes = data.scenes.size();
  const auto dft = cfg.dft();
  std::size_t ues = 0;
  for (const auto& scene : data.scenes) {
    for (const auto& ue : scene.ues) {
      s.mean_ul_energy += ue.ul.squaredNorm();
      s.mean_dl_energy += ue.dl.squaredNorm();
      const auto ul = typeii::select_ports(dft.to_angular_delay(ue.ul), cfg.codebook_N_p);
      const auto dl = typeii::select_ports(dft.to_angular_delay(ue.dl), cfg.codebook_N_p);
      const std::set<typeii::Port> a(ul.ports.begin(), ul.ports.end());
      std::size_t common = 0;
      for (const auto& p : dl.ports) common += a.count(p);
      s.port_overlap += static_cast<double>(common) / cfg.codebook_N_p;
      ++ues;
    }
  }
  if (ues > 0) {
    s.mean_ul_energy /= ues;
    s.mean_dl_energy /= ues;
    s.port_overlap /= ues;
  }
  return s;
}

void check_dataset(const Dataset& data, const ExperimentConfig& cfg) {
  if (data.K != static_cast<std::uint32_t>(cfg.scene.K) ||
      data.N_t != static_cast<std::uint32_t>(cfg.scene.N_t()) ||
      data.M != static_cast<std::uint32_t>(cfg.scene.M)) {
    throw DimensionError("dataset (K=" + std::to_string(data.K) + ", N_t=" + std::to_string(data.N_t) +
                         ", M=" + std::to_string(data.M) + ") does not match config (K=" +
                         std::to_string(cfg.scene.K) + ", N_t=" + std::to_string(cfg.scene.N_t()) +
                         ", M=" + std::to_string(cfg.scene.M) + ")");
  }
  if (data.scenes.empty()) throw ConfigError("dataset has no scenes");
}

std::vector<training::SceneSamples> prepare_samples(const std::vector<channel::ChannelScene>& scenes,
                                                    const ExperimentConfig& cfg,
                                                    std::size_t first_index) {
  const auto dft = cfg.dft();
  const auto pipe = cfg.pipeline();
  std::vector<training::SceneSamples> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out.push_back(training::prepare_scene(scenes[i], first_index + i, dft, pipe));
  }
  return out;
}

std::vector<training::MetricsRecord> train_model(csinet::TypeIICsiNet& model,
                                                 const std::vector<training::SceneSamples>& samples,
                                                 const ExperimentConfig& cfg,
                                                 const training::TrainOptions& options) {
  const auto n_val = static_cast<std::size_t>(cfg.train.val_scenes);
  if (n_val >= samples.size()) {
    throw ConfigError("train.val_scenes=" + std::to_string(n_val) + " leaves no training scenes out of " +
                      std::to_string(samples.size()));
  }
  const std::span<const training::SceneSamples> all(samples);
  return training::train(model, all.first(samples.size() - n_val), all.last(n_val), cfg.train,
                         cfg.dft(), cfg.budget(), options);
}

void run_gen(const ExperimentConfig& cfg, int scenes, std::uint64_t seed, const std::string& out_path,
             std::ostream& log) {
  ExperimentConfig used = cfg;
  used.scene.seed = seed;
  used.validate();
  const Dataset data = generate_dataset(used.scene, scenes, seed);
  ensure_parent(out_path);
  save_dataset(out_path, data);
  write_text_file(dump_path(out_path), dump_config(used));
  const auto s = summarize_dataset(data, used);
  log << "wrote " << out_path << ": " << s.scenes << " scenes, K=" << data.K << ", N_t=" << data.N_t
      << ", M=" << data.M << ", seed=" << seed << "\n"
      << "  mean UE energy  UL " << s.mean_ul_energy << "  DL " << s.mean_dl_energy << "\n"
      << "  UL/DL top-" << used.codebook_N_p << " port overlap " << s.port_overlap << "\n";
}

std::vector<training::MetricsRecord> run_train(const ExperimentConfig& cfg, const TrainPaths& paths,
                                               bool timing, std::ostream& log) {
  cfg.validate();
  const Dataset data = load_dataset(paths.data);
  check_dataset(data, cfg);
  const auto samples = prepare_samples(data.scenes, cfg);
  csinet::TypeIICsiNet model(cfg.model, cfg.train.seed);

  const std::string metrics = paths.metrics.empty() ? paths.checkpoint + ".metrics.csv" : paths.metrics;
  ensure_parent(paths.checkpoint);
  ensure_parent(metrics);
  std::ofstream csv(metrics, std::ios::binary);
  if (!csv) throw FormatError("cannot open '" + metrics + "' for writing");
  csv << metrics_csv_header();
  training::TrainOptions options;
  options.timing = timing;
  options.on_epoch = [&](const training::MetricsRecord& r) {
    csv << metrics_csv_row(r);
    csv.flush();
    log << "epoch " << r.epoch << " stage " << r.stage << " mse " << r.loss_mse << " val_rate "
        << r.val_sum_rate << "\n";
  };
  const auto history = train_model(model, samples, cfg, options);
  save_checkpoint(paths.checkpoint, model);
  write_text_file(dump_path(paths.checkpoint), dump_config(cfg));
  log << "wrote " << paths.checkpoint << " and " << metrics << "\n";
  return history;
}

mueval::SumRateReport run_eval(const ExperimentConfig& cfg, const std::string& data_path,
                               mueval::Scheme scheme, const std::optional<std::string>& checkpoint,
                               const std::string& results_path, std::ostream& log) {
  ExperimentConfig used = cfg;
  used.model.ablation_no_fill = scheme == mueval::Scheme::csinet_nofill;
  used.validate();
  std::unique_ptr<csinet::TypeIICsiNet> model;
  if (mueval::is_learned(scheme)) {
    if (!checkpoint) throw ConfigError("scheme " + mueval::to_string(scheme) + " requires --checkpoint");
    model = std::make_unique<csinet::TypeIICsiNet>(used.model, used.train.seed);
    load_checkpoint(*checkpoint, *model);
  }
  const Dataset data = load_dataset(data_path);
  check_dataset(data, used);
  const auto samples = prepare_samples(data.scenes, used);
  auto report = mueval::evaluate_scheme(scheme, samples, used.eval_config(), used.dft(), model.get());
  ResultRow row{report, mueval::is_learned(scheme) ? training::to_string(used.train.loss) : "",
                mueval::is_learned(scheme) ? 1 : 0};
  ensure_parent(results_path);
  append_results(results_path, {row});
  write_text_file(dump_path(results_path), dump_config(used));
  log << report.scheme << ": mean rate " << report.mean << " +- " << report.stderr_ << " over "
      << report.per_scene.size() << " scenes, " << report.feedback_bits << " feedback bits"
      << (report.regularized_flag ? " (regularized ZF engaged)" : "") << "\n";
  return report;
}

SweepAxis parse_axis(std::string_view name) {
  if (name == "B") return SweepAxis::B;
  if (name == "Np") return SweepAxis::Np;
  if (name == "NR") return SweepAxis::NR;
  if (name == "sorting") return SweepAxis::sorting;
  if (name == "loss") return SweepAxis::loss;
  throw ConfigError("unknown sweep axis '" + std::string(name) + "' (expected B, Np, NR, sorting or loss)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::B: return "B";
    case SweepAxis::Np: return "Np";
    case SweepAxis::NR: return "NR";
    case SweepAxis::sorting: return "sorting";
    case SweepAxis::loss: return "loss";
  }
  return "?";
}

namespace {

int parse_int(const std::string& v, const char* axis) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("sweep value '") + v + "' is not an integer for axis " + axis);
}


struct SceneData {
  std::vector<channel::ChannelScene> train;
  std::vector<channel::ChannelScene> test;
};

std::string sanitize(std::string s) {
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
  }
  return s;
}

struct PointOutput {
  std::vector<SweepRow> rows;
  std::string log;
};

PointOutput run_point(const ExperimentConfig& cfg, SweepAxis axis, const std::string& value,
                      const SceneData& data, bool write_metrics) {
  PointOutput out;
  std::ostringstream log;
  const auto train_samples = prepare_samples(data.train, cfg);
  const auto test_samples = prepare_samples(data.test, cfg, data.train.size());
  const auto dft = cfg.dft();
  for (const auto scheme : cfg.sweep_schemes) {
    ResultRow row;
    if (!mueval::is_learned(scheme)) {
      row.report = mueval::evaluate_scheme(scheme, test_samples, cfg.eval_config(), dft);
    } else {
      ExperimentConfig run = cfg;
      run.model.ablation_no_fill = scheme == mueval::Scheme::csinet_nofill;
      for (int s = 0; s < cfg.sweep_seeds; ++s) {
        run.train.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
        csinet::TypeIICsiNet model(run.model, run.train.seed);
        std::string metrics;
        training::TrainOptions options;
        options.on_epoch = [&](const training::MetricsRecord& r) { metrics += metrics_csv_row(r); };
        const auto history = train_model(model, train_samples, run, options);
        auto rep = mueval::evaluate_scheme(scheme, test_samples, run.eval_config(), dft, &model);
        log << "  " << to_string(axis) << "=" << value << " " << rep.scheme << " seed "
            << run.train.seed << ": final mse " << history.back().loss_mse << ", test rate "
            << rep.mean << "\n";
        if (write_metrics) {
          const fs::path dir(cfg.output_dir);
          fs::create_directories(dir);
          const auto name = "sweep_" + to_string(axis) + "_" + sanitize(value) + "_" + rep.scheme +
                            "_seed" + std::to_string(run.train.seed) + ".metrics.csv";
          write_text_file((dir / name).string(), metrics_csv_header() + metrics);
        }
        if (s == 0) {
          row.report = rep;
        } else {
          row.report.per_scene.insert(row.report.per_scene.end(), rep.per_scene.begin(),
                                      rep.per_scene.end());
          row.report.regularized_flag = row.report.regularized_flag || rep.regularized_flag;
        }
      }
      mueval::summarize(row.report);
      // The scenes column counts test scenes, not scene-seed pairs.
      row.report.per_scene.resize(test_samples.size());
      row.loss = training::to_string(cfg.train.loss);
      row.seeds = cfg.sweep_seeds;
    }
    out.rows.push_back({value, std::move(row)});
  }
  out.log = log.str();
  return out;
}

}  // namespace

ExperimentConfig apply_axis(ExperimentConfig cfg, SweepAxis axis, const std::string& value) {
  switch (axis) {
    case SweepAxis::B: {
      const int b = parse_int(value, "B");
      cfg.model.B = b;
      cfg.quant = quant_for_bits(b, cfg.codebook_N_p, cfg.quant.Q_n);
      break;
    }
    case SweepAxis::Np:
      cfg.codebook_N_p = cfg.model.N_p = parse_int(value, "Np");
      break;
    case SweepAxis::NR:
      cfg.scene.N_R = parse_int(value, "NR");
      break;
    case SweepAxis::sorting:
      cfg.sorting = typeii::parse_sort_method(value);
      break;
    case SweepAxis::loss:
      cfg.train.loss = training::parse_loss_mode(value);
      break;
  }
  cfg.sync();
  cfg.validate();
  return cfg;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis,
                            const std::vector<std::string>& values, const SweepOptions& options) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (options.parallel < 1) throw ConfigError("--parallel must be >= 1");
  base.validate();
  std::vector<ExperimentConfig> points;
  for (const auto& v : values) points.push_back(apply_axis(base, axis, v));

  // Scene sets depend only on the scene config; share them between points.
  std::map<std::string, std::shared_ptr<const SceneData>> cache;
  std::vector<std::shared_ptr<const SceneData>> point_data;
  for (const auto& p : points) {
    const std::string key = dump_config([&] {
      ExperimentConfig k;
      k.scene = p.scene;
      k.train_scenes = p.train_scenes;
      k.test_scenes = p.test_scenes;
      k.test_seed = p.test_seed;
      return k;
    }());
    auto& slot = cache[key];
    if (!slot) {
      auto d = std::make_shared<SceneData>();
      d->train = generate_dataset(p.scene, p.train_scenes, p.scene.seed).scenes;
      d->test = generate_dataset(p.scene, p.test_scenes, p.test_seed).scenes;
      slot = d;
    }
    point_data.push_back(slot);
  }

  std::vector<PointOutput> results(points.size());
  std::size_t next = 0;
  while (next < points.size()) {
    std::vector<std::pair<std::size_t, std::future<PointOutput>>> running;
    for (int w = 0; w < options.parallel && next < points.size(); ++w, ++next) {
      running.emplace_back(next, std::async(std::launch::async, run_point, std::cref(points[next]), axis,
                                            std::cref(values[next]), std::cref(*point_data[next]),
                                            options.write_metrics));
    }
    for (auto& [i, f] : running) {
      results[i] = f.get();
      if (options.log) *options.log << results[i].log << std::flush;
    }
  }
  std::vector<SweepRow> rows;
  for (auto& r : results) {
    for (auto& row : r.rows) rows.push_back(std::move(row));
  }
  return rows;
}

std::string summary_table(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::vector<const SweepRow*> order;
  for (const auto& r : rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const SweepRow* a, const SweepRow* b) {
    return a->row.report.mean > b->row.report.mean;
  });
  std::ostringstream t;
  t << std::left << std::setw(16) << to_string(axis) << std::setw(18) << "scheme" << std::setw(8)
    << "bits" << std::setw(14) << "mean_rate" << "stderr\n";
  t << std::fixed << std::setprecision(4);
  for (const auto* r : order) {
    t << std::setw(16) << r->value << std::setw(18) << r->row.report.scheme << std::setw(8)
      << r->row.report.feedback_bits << std::setw(14) << r->row.report.mean << r->row.report.stderr_
      << "\n";
  }
  return t.str();
}

void run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<std::string>& values,
               int parallel, const std::string& results_path, std::ostream& log) {
  SweepOptions options;
  options.parallel = parallel;
  options.log = &log;
  const auto rows = sweep(cfg, axis, values, options);
  std::vector<ResultRow> plain;
  for (const auto& r : rows) plain.push_back(r.row);
  ensure_parent(results_path);
  append_results(results_path, plain);
  write_text_file(dump_path(results_path), dump_config(cfg));
  const std::string table = summary_table(axis, rows);
  write_text_file(results_path + ".summary.txt", table);
  log << table;
}

}  // namespace csifb::harness
