#include "csifb/csinet.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "csifb/errors.hpp"

namespace csifb::csinet {

using tk::Tensor;

void ModelConfig::validate() const {
  if (N_p < 1 || N_t < 2 || N_t % 2 != 0 || M < 1) {
    throw ConfigError("model.N_p must be >= 1 and the scene must give an even N_t and M >= 1");
  }
  if (N_p > N_t * M) throw ConfigError("model.N_p exceeds N_t * M (scene.N_h, scene.N_v, scene.M)");
  if (Q_u < 1 || Q_u > 16) throw ConfigError("model.Q_u must lie in [1, 16]");
  if (latent_width() < 1) throw ConfigError("model.B must be at least model.Q_u");
  if (latent_bits() > static_cast<std::size_t>(B)) throw ConfigError("model.B: latent bits exceed the budget");
  if (hidden_width < 1 || conv_channels < 1) throw ConfigError("model.hidden_width and model.conv_channels must be positive");
  if (conv_blocks < 2 || conv_blocks % 2 != 0) {
    throw ConfigError("model.conv_blocks must be even and >= 2");
  }
  if (!(lrelu_enc > 0 && lrelu_enc < 1) || !(lrelu_dec > 0 && lrelu_dec < 1)) {
    throw ConfigError("model.lrelu_enc and model.lrelu_dec must lie in (0, 1)");
  }
  if (!(dropout_dec >= 0 && dropout_dec < 1)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (!(surrogate_temperature > 0)) throw ConfigError("model.surrogate_temperature must be > 0");
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "N_p=" << N_p << ";N_t=" << N_t << ";M=" << M << ";B=" << B << ";Q_u=" << Q_u
     << ";hidden=" << hidden_width << ";conv_channels=" << conv_channels
     << ";conv_blocks=" << conv_blocks << ";lrelu_enc=" << lrelu_enc << ";lrelu_dec=" << lrelu_dec
     << ";dropout=" << dropout_dec << ";no_fill=" << (ablation_no_fill ? 1 : 0);
  return os.str();
}

std::uint64_t ModelConfig::digest() const {
  // FNV-1a 64
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> encoder_input(const CVector& w) {
  std::vector<double> out(2 * w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out[i] = w(i).real();
    out[w.size() + i] = w(i).imag();
  }
  return out;
}

Tensor position_fill(const Tensor& coefficients, std::span<const typeii::PortSelection> selections,
                     int N_t, int M) {
  if (coefficients.rank() != 2 || coefficients.dim(0) != selections.size()) {
    throw DimensionError("position_fill: coefficients " + tk::shape_str(coefficients.shape()) +
                         " for " + std::to_string(selections.size()) + " selections");
  }
  const std::size_t batch = coefficients.dim(0);
  const std::size_t n_p = coefficients.dim(1) / 2;
  const std::size_t plane = static_cast<std::size_t>(N_t) * M;
  // Flat destination offset of coefficient i (real channel) for each sample.
  std::vector<std::size_t> offsets(batch * n_p);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& ports = selections[b].ports;
    if (ports.size() != n_p || coefficients.dim(1) != 2 * n_p) {
      throw DimensionError("position_fill: selection " + std::to_string(b) + " has " +
                           std::to_string(ports.size()) + " ports, expected " +
                           std::to_string(n_p));
    }
    std::set<typeii::Port> seen;
    for (std::size_t i = 0; i < n_p; ++i) {
      const auto& p = ports[i];
      if (p.r < 0 || p.r >= N_t || p.c < 0 || p.c >= M) {
        throw DimensionError("position_fill: port out of range");
      }
      if (!seen.insert(p).second) throw std::logic_error("position_fill: duplicate port");
      offsets[b * n_p + i] = static_cast<std::size_t>(p.r) * M + p.c;
    }
  }
  tk::Buffer out(batch * 2 * plane, 0.0);
  const auto in = coefficients.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n_p; ++i) {
      const std::size_t o = offsets[b * n_p + i];
      out[b * 2 * plane + o] = in[b * 2 * n_p + i];
      out[b * 2 * plane + plane + o] = in[b * 2 * n_p + n_p + i];
    }
  }
  return tk::make_result(
      {batch, 2, static_cast<std::size_t>(N_t), static_cast<std::size_t>(M)}, std::move(out),
      {coefficients}, [batch, n_p, plane, offsets = std::move(offsets)](tk::detail::Node& self) {
        auto& dx = self.parents[0]->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < n_p; ++i) {
            const std::size_t o = offsets[b * n_p + i];
            dx[b * 2 * n_p + i] += self.grad[b * 2 * plane + o];
            dx[b * 2 * n_p + n_p + i] += self.grad[b * 2 * plane + plane + o];
          }
        }
      });
}

TypeIICsiNet::TypeIICsiNet(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ull) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int latent = cfg_.latent_width();
  add_linear("enc.fcb1", 2 * cfg_.N_p, cfg_.hidden_width, true, rng);
  add_linear("enc.fcb2", cfg_.hidden_width, latent, true, rng);
  add_linear("dec.fcb", latent, 2 * cfg_.N_p, false, rng);
  if (!cfg_.ablation_no_fill) {
    const int ch = cfg_.conv_channels;
    add_conv("dec.cb1", 2, ch, true, rng);
    for (int i = 2; i < cfg_.conv_blocks; ++i) add_conv("dec.cb" + std::to_string(i), ch, ch, true, rng);
    add_conv("dec.cb" + std::to_string(cfg_.conv_blocks), ch, 2, false, rng);
  }
}

void TypeIICsiNet::add_linear(const std::string& name, int f_in, int f_out, bool with_bn,
                              std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (f_in + f_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> w(static_cast<std::size_t>(f_in) * f_out);
  for (auto& v : w) v = u(rng);
  const auto fi = static_cast<std::size_t>(f_in), fo = static_cast<std::size_t>(f_out);
  params_.add(name + ".weight", Tensor({fi, fo}, std::move(w)));
  params_.add(name + ".bias", Tensor({fo}, 0.0));
  if (with_bn) {
    params_.add(name + ".bn.gamma", Tensor({fo}, 1.0));
    params_.add(name + ".bn.beta", Tensor({fo}, 0.0));
    bn_.emplace(name + ".bn", tk::BatchNormState(fo));
  }
}

void TypeIICsiNet::add_conv(const std::string& name, int c_in, int c_out, bool with_bn,
                            std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (9.0 * (c_in + c_out)));
  std::uniform_real_distribution<double> u(-bound, bound);
  const auto ci = static_cast<std::size_t>(c_in), co = static_cast<std::size_t>(c_out);
  std::vector<double> k(co * ci * 9);
  for (auto& v : k) v = u(rng);
  params_.add(name + ".weight", Tensor({co, ci, 3, 3}, std::move(k)));
  params_.add(name + ".bias", Tensor({co}, 0.0));
  if (with_bn) {
    params_.add(name + ".bn.gamma", Tensor({co}, 1.0));
    params_.add(name + ".bn.beta", Tensor({co}, 0.0));
    bn_.emplace(name + ".bn", tk::BatchNormState(co));
  }
}

Tensor TypeIICsiNet::linear_bn(const std::string& name, const Tensor& x, tk::Mode mode) {
  Tensor y = tk::fc(x, params_.at(name + ".weight"), params_.at(name + ".bias"));
  return tk::batchnorm(y, params_.at(name + ".bn.gamma"), params_.at(name + ".bn.beta"),
                       bn_.at(name + ".bn"), mode);
}

Tensor TypeIICsiNet::conv_bn(const std::string& name, const Tensor& x, tk::Mode mode) {
  Tensor y = conv_plain(name, x);
  return tk::batchnorm(y, params_.at(name + ".bn.gamma"), params_.at(name + ".bn.beta"),
                       bn_.at(name + ".bn"), mode);
}

Tensor TypeIICsiNet::conv_plain(const std::string& name, const Tensor& x) {
  return tk::conv2d(x, params_.at(name + ".weight"), params_.at(name + ".bias"));
}

EncodeOutput TypeIICsiNet::encode(const Tensor& input, tk::Mode mode,
                                  tk::QuantizerForward quantizer) {
  if (input.rank() != 2 || input.dim(1) != static_cast<std::size_t>(2 * cfg_.N_p)) {
    throw DimensionError("encode: expected [batch, " + std::to_string(2 * cfg_.N_p) + "], got " +
                         tk::shape_str(input.shape()));
  }
  Tensor h = tk::leaky_relu(linear_bn("enc.fcb1", input, mode), cfg_.lrelu_enc);
  Tensor z = tk::tanh(linear_bn("enc.fcb2", h, mode));
  auto q = tk::quantize_uniform_ste(z, cfg_.Q_u, cfg_.surrogate_temperature, quantizer);
  return {std::move(q.levels), std::move(q.indices)};
}

Tensor TypeIICsiNet::decode(const Tensor& levels, std::span<const typeii::PortSelection> selections,
                            tk::Mode mode) {
  if (levels.rank() != 2 || levels.dim(1) != static_cast<std::size_t>(cfg_.latent_width())) {
    throw DimensionError("decode: expected [batch, " + std::to_string(cfg_.latent_width()) +
                         "] latent, got " + tk::shape_str(levels.shape()));
  }
  Tensor coarse = tk::fc(levels, params_.at("dec.fcb.weight"), params_.at("dec.fcb.bias"));
  coarse = tk::dropout(coarse, cfg_.dropout_dec, mode, dropout_rng_);
  Tensor v = position_fill(coarse, selections, cfg_.N_t, cfg_.M);
  if (cfg_.ablation_no_fill) return v;

  const double slope = cfg_.lrelu_dec;
  Tensor y = tk::leaky_relu(conv_bn("dec.cb1", v, mode), slope);
  for (int first = 2; first + 1 < cfg_.conv_blocks; first += 2) {
    Tensor t = tk::leaky_relu(conv_bn("dec.cb" + std::to_string(first), y, mode), slope);
    Tensor u = conv_bn("dec.cb" + std::to_string(first + 1), t, mode);
    y = tk::leaky_relu(tk::add(u, y), slope);
  }
  Tensor out = conv_plain("dec.cb" + std::to_string(cfg_.conv_blocks), y);
  return tk::add(out, v);
}

Tensor TypeIICsiNet::forward(const Tensor& input, std::span<const typeii::PortSelection> selections,
                             tk::Mode mode, tk::QuantizerForward quantizer) {
  return decode(encode(input, mode, quantizer).levels, selections, mode);
}

FeedbackBitstream TypeIICsiNet::pack_latent(std::span<const std::uint32_t> indices) const {
  if (indices.size() != static_cast<std::size_t>(cfg_.latent_width())) {
    throw DimensionError("pack_latent: " + std::to_string(indices.size()) + " indices for width " +
                         std::to_string(cfg_.latent_width()));
  }
  BitWriter w;
  for (auto i : indices) w.write(i, cfg_.Q_u);
  return w.take();
}

std::vector<std::uint32_t> TypeIICsiNet::unpack_latent(const FeedbackBitstream& bits) const {
  if (bits.bit_count != cfg_.latent_bits()) {
    throw FormatError("latent bitstream has " + std::to_string(bits.bit_count) + " bits, model uses " +
                      std::to_string(cfg_.latent_bits()));
  }
  BitReader r(bits);
  std::vector<std::uint32_t> out(cfg_.latent_width());
  for (auto& v : out) v = r.read(cfg_.Q_u);
  return out;
}

Tensor TypeIICsiNet::levels_from_bitstreams(std::span<const FeedbackBitstream> streams) const {
  const auto width = static_cast<std::size_t>(cfg_.latent_width());
  std::vector<double> levels;
  levels.reserve(streams.size() * width);
  for (const auto& s : streams) {
    for (auto i : unpack_latent(s)) levels.push_back(tk::uniform_level(i, cfg_.Q_u));
  }
  return Tensor({streams.size(), width}, std::move(levels));
}

std::vector<CMatrix> TypeIICsiNet::to_complex(const Tensor& output) const {
  const std::size_t n_t = cfg_.N_t, m = cfg_.M, plane = n_t * m;
  if (output.rank() != 4 || output.dim(1) != 2 || output.dim(2) != n_t || output.dim(3) != m) {
    throw DimensionError("to_complex: unexpected output shape " + tk::shape_str(output.shape()));
  }
  std::vector<CMatrix> out;
  const auto d = output.data();
  for (std::size_t b = 0; b < output.dim(0); ++b) {
    CMatrix h(n_t, m);
    for (std::size_t r = 0; r < n_t; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        const std::size_t o = b * 2 * plane + r * m + c;
        h(r, c) = {d[o], d[o + plane]};
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<TypeIICsiNet::StateEntry> TypeIICsiNet::state() const {
  std::vector<StateEntry> out;
  for (const auto& [name, t] : params_) {
    out.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
  }
  for (const auto& [name, s] : bn_) {
    out.push_back({name + ".running_mean", {s.running_mean.size()}, s.running_mean});
    out.push_back({name + ".running_var", {s.running_var.size()}, s.running_var});
  }
  std::sort(out.begin(), out.end(),
            [](const StateEntry& a, const StateEntry& b) { return a.name < b.name; });
  return out;
}

void TypeIICsiNet::load_state(const std::vector<StateEntry>& entries) {
  std::set<std::string> expected;
  for (const auto& e : state()) expected.insert(e.name);
  std::set<std::string> loaded;
  for (const auto& e : entries) {
    if (!expected.count(e.name)) throw FormatError("checkpoint has unknown entry '" + e.name + "'");
    if (!loaded.insert(e.name).second) throw FormatError("duplicate checkpoint entry '" + e.name + "'");
    std::vector<double>* dest = nullptr;
    std::vector<std::size_t> shape;
    std::vector<double> scratch;
    if (params_.contains(e.name)) {
      auto& t = params_.at(e.name);
      shape = t.shape();
      if (e.shape != shape || e.values.size() != t.size()) {
        throw FormatError("checkpoint entry '" + e.name + "' has shape " + tk::shape_str(e.shape) +
                          ", model expects " + tk::shape_str(shape));
      }
      std::copy(e.values.begin(), e.values.end(), t.data().begin());
      continue;
    }
    const auto dot = e.name.rfind('.');
    auto& s = bn_.at(e.name.substr(0, dot));
    dest = e.name.substr(dot + 1) == "running_mean" ? &s.running_mean : &s.running_var;
    if (e.values.size() != dest->size()) {
      throw FormatError("checkpoint entry '" + e.name + "' has wrong length");
    }
    *dest = e.values;
  }
  if (loaded.size() != expected.size()) throw FormatError("checkpoint is missing entries");
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t np2 = 2 * static_cast<std::size_t>(cfg.N_p);
  const std::size_t hid = cfg.hidden_width, lat = cfg.latent_width(), ch = cfg.conv_channels;
  std::size_t n = 0;
  n += np2 * hid + hid + 2 * hid;  // enc.fcb1 + BN
  n += hid * lat + lat + 2 * lat;  // enc.fcb2 + BN
  n += lat * np2 + np2;            // dec.fcb
  if (!cfg.ablation_no_fill) {
    n += 2 * ch * 9 + ch + 2 * ch;                                         // cb1
    n += static_cast<std::size_t>(cfg.conv_blocks - 2) * (ch * ch * 9 + ch + 2 * ch);  // cb2..
    n += ch * 2 * 9 + 2;                                                   // last
  }
  return n;
}

}  // namespace csifb::csinet
