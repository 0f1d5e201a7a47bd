#include "csifb/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "csifb/errors.hpp"

namespace csifb::harness {

using nlohmann::json;

void ExperimentConfig::sync() {
  model.N_t = scene.N_t();
  model.M = scene.M;
}

mueval::LinkBudget ExperimentConfig::budget() const {
  mueval::LinkBudget b;
  b.P_total_dbm = P_total_dbm;
  b.noise_figure_db = noise_figure_db;
  b.K = scene.K;
  b.M = scene.M;
  b.N_R = scene.N_R;
  return b;
}

training::PipelineConfig ExperimentConfig::pipeline() const {
  return {codebook_N_p, sorting, sort_seed};
}

mueval::EvalConfig ExperimentConfig::eval_config() const {
  return {quant, budget(), codebook_N_p, sorting};
}

angular::DftPair ExperimentConfig::dft() const { return {scene.N_h, scene.N_v, scene.M}; }

void ExperimentConfig::validate() const {
  scene.validate();
  quant.validate();
  const int ports = scene.N_t() * scene.M;
  if (codebook_N_p < 1 || codebook_N_p > ports) {
    throw ConfigError("codebook.N_p=" + std::to_string(codebook_N_p) +
                      " must lie in [1, N_t*M=" + std::to_string(ports) + "] (scene.N_h, scene.N_v, scene.M)");
  }
  if (model.N_p != codebook_N_p) {
    throw ConfigError("model.N_p=" + std::to_string(model.N_p) + " differs from codebook.N_p=" +
                      std::to_string(codebook_N_p));
  }
  if (model.N_t != scene.N_t() || model.M != scene.M) {
    throw ConfigError("model dimensions out of sync with scene.N_h/scene.N_v/scene.M");
  }
  if (model.Q_u >= 1 && (model.latent_width() < 1 || static_cast<int>(model.latent_bits()) > model.B)) {
    throw ConfigError("model.B=" + std::to_string(model.B) + " and model.Q_u=" +
                      std::to_string(model.Q_u) + " leave no latent unit within the bit budget");
  }
  if (scene.K > scene.N_t()) {
    throw ConfigError("scene.K=" + std::to_string(scene.K) + " exceeds N_t=" +
                      std::to_string(scene.N_t()) + " (zero forcing needs K <= N_t)");
  }
  model.validate();
  train.validate();
  budget().validate();
  if (train_scenes < 1) throw ConfigError("data.train_scenes must be >= 1");
  if (test_scenes < 1) throw ConfigError("data.test_scenes must be >= 1");
  if (train.val_scenes >= train_scenes) {
    throw ConfigError("train.val_scenes=" + std::to_string(train.val_scenes) +
                      " must be smaller than data.train_scenes=" + std::to_string(train_scenes));
  }
  if (sweep_schemes.empty()) throw ConfigError("sweep.schemes must not be empty");
  if (sweep_seeds < 1) throw ConfigError("sweep.seeds must be >= 1");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T get(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!value.is_string()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (value.is_number_integer() && !value.is_number_unsigned()) throw ConfigError("");
      }
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type (" + value.dump() + ")");
  }
}

std::string scheme_list(const std::vector<mueval::Scheme>& schemes) {
  std::string s;
  for (auto sc : schemes) s += (s.empty() ? "" : ",") + mueval::to_string(sc);
  return s;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["scene.K"] = c.scene.K;
  j["scene.N_h"] = c.scene.N_h;
  j["scene.N_v"] = c.scene.N_v;
  j["scene.M"] = c.scene.M;
  j["scene.N_R"] = c.scene.N_R;
  j["scene.f_ul_hz"] = c.scene.f_ul_hz;
  j["scene.f_dl_hz"] = c.scene.f_dl_hz;
  j["scene.cell_radius_m"] = c.scene.cell_radius_m;
  j["scene.clusters"] = c.scene.clusters;
  j["scene.delay_spread_s"] = c.scene.delay_spread_s;
  j["scene.seed"] = c.scene.seed;
  j["codebook.N_p"] = c.codebook_N_p;
  j["codebook.Q_n"] = c.quant.Q_n;
  j["codebook.Q_a"] = c.quant.Q_a;
  j["codebook.Q_p"] = c.quant.Q_p;
  j["pipeline.sorting"] = typeii::to_string(c.sorting);
  j["pipeline.sort_seed"] = c.sort_seed;
  j["model.N_p"] = c.model.N_p;
  j["model.B"] = c.model.B;
  j["model.Q_u"] = c.model.Q_u;
  j["model.hidden_width"] = c.model.hidden_width;
  j["model.conv_channels"] = c.model.conv_channels;
  j["model.conv_blocks"] = c.model.conv_blocks;
  j["model.lrelu_enc"] = c.model.lrelu_enc;
  j["model.lrelu_dec"] = c.model.lrelu_dec;
  j["model.dropout"] = c.model.dropout_dec;
  j["model.surrogate_temperature"] = c.model.surrogate_temperature;
  j["model.ablation_no_fill"] = c.model.ablation_no_fill;
  j["train.epochs"] = c.train.epochs;
  j["train.stage1_epochs"] = c.train.stage1_epochs;
  j["train.batch_size"] = c.train.batch_size;
  j["train.lr"] = c.train.lr;
  j["train.mu"] = c.train.mu;
  j["train.lr_decay_every"] = c.train.lr_decay_every;
  j["train.lr_decay_factor"] = c.train.lr_decay_factor;
  j["train.loss"] = training::to_string(c.train.loss);
  j["train.seed"] = c.train.seed;
  j["train.val_scenes"] = c.train.val_scenes;
  j["budget.P_total_dbm"] = c.P_total_dbm;
  j["budget.noise_figure_db"] = c.noise_figure_db;
  j["data.train_scenes"] = c.train_scenes;
  j["data.test_scenes"] = c.test_scenes;
  j["data.test_seed"] = c.test_seed;
  j["sweep.schemes"] = scheme_list(c.sweep_schemes);
  j["sweep.seeds"] = c.sweep_seeds;
  j["output.dir"] = c.output_dir;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object of flat keys");
  ExperimentConfig c;
  const json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    auto& s = c.scene;
    if (key == "scene.K") s.K = get<int>(value, key);
    else if (key == "scene.N_h") s.N_h = get<int>(value, key);
    else if (key == "scene.N_v") s.N_v = get<int>(value, key);
    else if (key == "scene.M") s.M = get<int>(value, key);
    else if (key == "scene.N_R") s.N_R = get<int>(value, key);
    else if (key == "scene.f_ul_hz") s.f_ul_hz = get<double>(value, key);
    else if (key == "scene.f_dl_hz") s.f_dl_hz = get<double>(value, key);
    else if (key == "scene.cell_radius_m") s.cell_radius_m = get<double>(value, key);
    else if (key == "scene.clusters") s.clusters = get<int>(value, key);
    else if (key == "scene.delay_spread_s") s.delay_spread_s = get<double>(value, key);
    else if (key == "scene.seed") s.seed = get<std::uint64_t>(value, key);
    else if (key == "codebook.N_p") c.codebook_N_p = get<int>(value, key);
    else if (key == "codebook.Q_n") c.quant.Q_n = get<unsigned>(value, key);
    else if (key == "codebook.Q_a") c.quant.Q_a = get<unsigned>(value, key);
    else if (key == "codebook.Q_p") c.quant.Q_p = get<unsigned>(value, key);
    else if (key == "pipeline.sorting") c.sorting = typeii::parse_sort_method(get<std::string>(value, key));
    else if (key == "pipeline.sort_seed") c.sort_seed = get<std::uint64_t>(value, key);
    else if (key == "model.N_p") c.model.N_p = get<int>(value, key);
    else if (key == "model.B") c.model.B = get<int>(value, key);
    else if (key == "model.Q_u") c.model.Q_u = get<unsigned>(value, key);
    else if (key == "model.hidden_width") c.model.hidden_width = get<int>(value, key);
    else if (key == "model.conv_channels") c.model.conv_channels = get<int>(value, key);
    else if (key == "model.conv_blocks") c.model.conv_blocks = get<int>(value, key);
    else if (key == "model.lrelu_enc") c.model.lrelu_enc = get<double>(value, key);
    else if (key == "model.lrelu_dec") c.model.lrelu_dec = get<double>(value, key);
    else if (key == "model.dropout") c.model.dropout_dec = get<double>(value, key);
    else if (key == "model.surrogate_temperature") c.model.surrogate_temperature = get<double>(value, key);
    else if (key == "model.ablation_no_fill") c.model.ablation_no_fill = get<bool>(value, key);
    else if (key == "train.epochs") c.train.epochs = get<int>(value, key);
    else if (key == "train.stage1_epochs") c.train.stage1_epochs = get<int>(value, key);
    else if (key == "train.batch_size") c.train.batch_size = get<int>(value, key);
    else if (key == "train.lr") c.train.lr = get<double>(value, key);
    else if (key == "train.mu") c.train.mu = get<double>(value, key);
    else if (key == "train.lr_decay_every") c.train.lr_decay_every = get<int>(value, key);
    else if (key == "train.lr_decay_factor") c.train.lr_decay_factor = get<double>(value, key);
    else if (key == "train.loss") c.train.loss = training::parse_loss_mode(get<std::string>(value, key));
    else if (key == "train.seed") c.train.seed = get<std::uint64_t>(value, key);
    else if (key == "train.val_scenes") c.train.val_scenes = get<int>(value, key);
    else if (key == "budget.P_total_dbm") c.P_total_dbm = get<double>(value, key);
    else if (key == "budget.noise_figure_db") c.noise_figure_db = get<double>(value, key);
    else if (key == "data.train_scenes") c.train_scenes = get<int>(value, key);
    else if (key == "data.test_scenes") c.test_scenes = get<int>(value, key);
    else if (key == "data.test_seed") c.test_seed = get<std::uint64_t>(value, key);
    else if (key == "sweep.schemes") {
      c.sweep_schemes.clear();
      for (const auto& name : split_list(get<std::string>(value, key))) {
        c.sweep_schemes.push_back(mueval::parse_scheme(name));
      }
    } else if (key == "sweep.seeds") c.sweep_seeds = get<int>(value, key);
    else if (key == "output.dir") c.output_dir = get<std::string>(value, key);
  }
  c.sync();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

typeii::QuantConfig quant_for_bits(int B, int N_p, unsigned Q_n) {
  typeii::QuantConfig best;
  best.Q_n = Q_n;
  bool found = false;
  for (unsigned total = 2; total <= 16; ++total) {
    if (static_cast<long>(Q_n) + static_cast<long>(N_p) * total != B) continue;
    // Most balanced split, extra bit to phase.
    best.Q_a = total / 2;
    best.Q_p = total - best.Q_a;
    found = true;
  }
  if (!found) {
    throw ConfigError("no (Q_a, Q_p) gives B=" + std::to_string(B) + " bits with N_p=" +
                      std::to_string(N_p) + " and Q_n=" + std::to_string(Q_n));
  }
  best.validate();
  return best;
}

}  // namespace csifb::harness
