#include "csifb/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "csifb/errors.hpp"

namespace csifb::training {

using tk::Tensor;

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::mse: return "mse";
    case LossMode::ncs: return "ncs";
    case LossMode::nar: return "nar";
    case LossMode::mix: return "mix";
    case LossMode::two_stage: return "two-stage";
  }
  return "?";
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "mse") return LossMode::mse;
  if (name == "ncs") return LossMode::ncs;
  if (name == "nar") return LossMode::nar;
  if (name == "mix") return LossMode::mix;
  if (name == "two-stage") return LossMode::two_stage;
  throw ConfigError("unknown loss mode '" + std::string(name) +
                    "' (expected mse, ncs, nar, mix or two-stage)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (stage1_epochs < 0 || stage1_epochs > epochs) {
    throw ConfigError("train.stage1_epochs (" + std::to_string(stage1_epochs) +
                      ") must lie in [0, train.epochs=" + std::to_string(epochs) + "]");
  }
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("train.lr must be positive");
  if (!(mu >= 0)) throw ConfigError("train.mu must be >= 0");
  if (lr_decay_every < 1) throw ConfigError("train.lr_decay_every must be >= 1");
  if (!(lr_decay_factor > 0 && lr_decay_factor <= 1)) {
    throw ConfigError("train.lr_decay_factor must lie in (0, 1]");
  }
  if (val_scenes < 0) throw ConfigError("train.val_scenes must be >= 0");
}

int stage_for_epoch(int epoch, const TrainConfig& cfg) {
  if (cfg.loss != LossMode::two_stage) return 1;
  return epoch <= cfg.stage1_epochs ? 1 : 2;
}

double lr_for_epoch(int epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(cfg.lr_decay_factor, (epoch - 1) / cfg.lr_decay_every);
}

std::uint64_t sort_seed_for(std::uint64_t seed, std::uint64_t scene, std::uint64_t ue) {
  return channel::substream(seed, scene, ue, 5)();
}

SceneSamples prepare_scene(const channel::ChannelScene& scene, std::uint64_t scene_index,
                           const angular::DftPair& dft, const PipelineConfig& cfg) {
  SceneSamples out;
  out.index = scene_index;
  for (std::size_t k = 0; k < scene.ues.size(); ++k) {
    const auto& ue = scene.ues[k];
    const CMatrix ul = dft.to_angular_delay(ue.ul);
    const CMatrix dl = dft.to_angular_delay(ue.dl);
    auto sel = typeii::select_ports(ul, cfg.N_p);
    sel = typeii::sort_ports(sel, cfg.sorting, ul, sort_seed_for(cfg.sort_seed, scene_index, k));
    const CVector w = typeii::gather_coefficients(dl, sel);
    double scale = w.cwiseAbs().maxCoeff();
    if (!(scale > 0)) scale = 1.0;
    UeSample s;
    s.selection = std::move(sel);
    s.coefficients = w / scale;
    s.input = csinet::encoder_input(s.coefficients);
    s.target = dl / scale;
    s.scale = scale;
    out.ues.push_back(std::move(s));
    out.h_dl.push_back(ue.dl);
  }
  return out;
}

double scene_sum_rate(const SceneSamples& scene, const std::vector<CMatrix>& outputs_ad,
                      const angular::DftPair& dft, const mueval::LinkBudget& budget) {
  std::vector<CMatrix> recon;
  for (std::size_t k = 0; k < outputs_ad.size(); ++k) {
    recon.push_back(dft.from_angular_delay(outputs_ad[k] * scene.ues[k].scale));
  }
  return mueval::sum_rate(scene.h_dl, mueval::zf_precoders(recon), budget);
}

namespace {

struct Batch {
  Tensor input;
  std::vector<typeii::PortSelection> selections;
};

Batch make_batch(std::span<const UeSample* const> samples) {
  const std::size_t width = samples.front()->input.size();
  std::vector<double> data;
  data.reserve(samples.size() * width);
  Batch b;
  for (const auto* s : samples) {
    data.insert(data.end(), s->input.begin(), s->input.end());
    b.selections.push_back(s->selection);
  }
  b.input = Tensor({samples.size(), width}, std::move(data));
  return b;
}

std::vector<double> seed_from(const std::vector<CMatrix>& grads) {
  const auto n_t = static_cast<std::size_t>(grads.front().rows());
  const auto m = static_cast<std::size_t>(grads.front().cols());
  const std::size_t plane = n_t * m;
  std::vector<double> seed(grads.size() * 2 * plane);
  for (std::size_t b = 0; b < grads.size(); ++b) {
    for (std::size_t r = 0; r < n_t; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        const std::size_t o = b * 2 * plane + r * m + c;
        seed[o] = grads[b](r, c).real();
        seed[o + plane] = grads[b](r, c).imag();
      }
    }
  }
  return seed;
}

void check_finite(double value, int epoch, std::size_t batch, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch));
  }
}

}  // namespace

Validation validate_model(csinet::TypeIICsiNet& model, std::span<const SceneSamples> scenes,
                          const angular::DftPair& dft, const mueval::LinkBudget& budget) {
  Validation v;
  if (scenes.empty()) {
    v.loss_nar = v.sum_rate = std::numeric_limits<double>::quiet_NaN();
    return v;
  }
  tk::NoGradGuard guard;
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < scenes.size(); start += kChunk) {
    const std::size_t stop = std::min(scenes.size(), start + kChunk);
    std::vector<const UeSample*> samples;
    for (std::size_t i = start; i < stop; ++i) {
      for (const auto& ue : scenes[i].ues) samples.push_back(&ue);
    }
    const Batch batch = make_batch(samples);
    const auto outputs = model.to_complex(model.forward(batch.input, batch.selections, tk::Mode::eval));
    std::size_t offset = 0;
    for (std::size_t i = start; i < stop; ++i) {
      const auto& scene = scenes[i];
      const std::vector<CMatrix> mine(outputs.begin() + offset,
                                      outputs.begin() + offset + scene.ues.size());
      offset += scene.ues.size();
      const double rate = scene_sum_rate(scene, mine, dft, budget);
      v.sum_rate += rate;
      v.loss_nar -= rate / static_cast<double>(scene.ues.size());
    }
  }
  v.sum_rate /= static_cast<double>(scenes.size());
  v.loss_nar /= static_cast<double>(scenes.size());
  return v;
}

std::vector<MetricsRecord> train(csinet::TypeIICsiNet& model, std::span<const SceneSamples> train_set,
                                 std::span<const SceneSamples> val_set, const TrainConfig& cfg,
                                 const angular::DftPair& dft, const mueval::LinkBudget& budget,
                                 const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  const double power_w = budget.per_ue_power_w();
  const double noise_w = budget.noise_power_w();

  std::vector<const UeSample*> all_ues;
  for (const auto& scene : train_set) {
    for (const auto& ue : scene.ues) all_ues.push_back(&ue);
  }

  tk::AdamState adam;
  std::vector<MetricsRecord> history;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const int stage = stage_for_epoch(epoch, cfg);
    LossMode mode = cfg.loss;
    if (mode == LossMode::two_stage) mode = stage == 1 ? LossMode::mse : LossMode::mix;
    const bool by_scene = mode == LossMode::nar || mode == LossMode::mix;
    adam.lr = lr_for_epoch(epoch, cfg);

    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    model.reseed_dropout(rng());

    // Groups of UE samples; scene batches keep each scene's UEs contiguous.
    std::vector<std::vector<const UeSample*>> batches;
    std::vector<std::vector<const SceneSamples*>> batch_scenes;
    if (by_scene) {
      std::vector<std::size_t> order(train_set.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        batches.emplace_back();
        batch_scenes.emplace_back();
        for (std::size_t i = s; i < std::min(order.size(), s + cfg.batch_size); ++i) {
          const auto& scene = train_set[order[i]];
          batch_scenes.back().push_back(&scene);
          for (const auto& ue : scene.ues) batches.back().push_back(&ue);
        }
      }
    } else {
      std::vector<const UeSample*> order = all_ues;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        batches.emplace_back(order.begin() + s,
                             order.begin() + std::min(order.size(), s + cfg.batch_size));
      }
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.stage = stage;
    double mse_sum = 0.0;
    std::size_t mse_count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = make_batch(batches[bi]);
      Tensor out = model.forward(batch.input, batch.selections, tk::Mode::train);
      const auto outputs = model.to_complex(out);
      std::vector<CMatrix> targets;
      for (const auto* s : batches[bi]) targets.push_back(s->target);

      const LossValue mse = loss_mse(targets, outputs);
      check_finite(mse.value, epoch, bi, "mse");
      mse_sum += mse.value * static_cast<double>(targets.size());
      mse_count += targets.size();

      std::vector<CMatrix> grad;
      if (mode == LossMode::mse) {
        grad = mse.grad;
      } else if (mode == LossMode::ncs) {
        LossValue l = loss_ncs(targets, outputs);
        check_finite(l.value, epoch, bi, "ncs loss");
        grad = std::move(l.grad);
      } else {
        // Per-scene rate terms; each scene's gradient is scaled so the batch
        // loss is the mean over its scenes.
        const double n_scenes = static_cast<double>(batch_scenes[bi].size());
        grad.reserve(outputs.size());
        std::size_t offset = 0;
        for (const auto* scene : batch_scenes[bi]) {
          const std::size_t k = scene->ues.size();
          const std::vector<CMatrix> mine(outputs.begin() + offset, outputs.begin() + offset + k);
          LossValue nar = loss_nar(scene->h_dl, mine, dft, power_w, noise_w);
          // Outputs are normalized per UE; ZF ignores per-UE scale, so no
          // rescaling is applied.
          check_finite(nar.value, epoch, bi, "rate loss");
          if (nar.regularized) ++rec.regularized_batches;
          const double weight = mode == LossMode::mix ? cfg.mu : 1.0;
          for (std::size_t j = 0; j < k; ++j) {
            CMatrix g = (weight / n_scenes) * nar.grad[j];
            if (mode == LossMode::mix) g += mse.grad[offset + j];
            grad.push_back(std::move(g));
          }
          offset += k;
        }
      }
      const auto seed = seed_from(grad);
      for (double v : seed) check_finite(v, epoch, bi, "gradient");
      out.backward(seed);
      tk::adam_step(model.parameters(), adam);
    }
    rec.loss_mse = mse_sum / static_cast<double>(mse_count);
    const Validation val = validate_model(model, val_set, dft, budget);
    rec.loss_nar = val.loss_nar;
    rec.val_sum_rate = val.sum_rate;
    rec.seconds = options.timing
                      ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                      : std::numeric_limits<double>::quiet_NaN();
    history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return history;
}

}  // namespace csifb::training
