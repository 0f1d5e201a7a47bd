#include "csifb/typeii.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "csifb/errors.hpp"

namespace csifb::typeii {

namespace {

// Steps of the (1/sqrt2)^q ladder: -2 log2(x).
double ladder_position(double x) { return -2.0 * std::log2(x); }

void check_port(const Port& p, Eigen::Index rows, Eigen::Index cols) {
  if (p.r < 0 || p.r >= rows || p.c < 0 || p.c >= cols) {
    throw DimensionError("port (" + std::to_string(p.r) + "," + std::to_string(p.c) +
                         ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

std::string to_string(SortMethod method) {
  switch (method) {
    case SortMethod::power: return "power";
    case SortMethod::angular_delay: return "angular-delay";
    case SortMethod::delay_angular: return "delay-angular";
    case SortMethod::amplitude: return "amplitude";
    case SortMethod::random: return "random";
  }
  return "unknown";
}

SortMethod parse_sort_method(std::string_view name) {
  for (auto m : {SortMethod::power, SortMethod::angular_delay, SortMethod::delay_angular,
                 SortMethod::amplitude, SortMethod::random}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown sorting method '" + std::string(name) +
                    "' (expected angular-delay, delay-angular, amplitude, random)");
}

void QuantConfig::validate() const {
  if (Q_n < 1 || Q_a < 1 || Q_p < 1) throw ConfigError("Q_n, Q_a and Q_p must all be >= 1");
  if (Q_n > 16 || Q_a > 16 || Q_p > 16) throw ConfigError("Q_n, Q_a and Q_p must be <= 16");
}

PortSelection select_ports(const CMatrix& ul, int N_p) {
  const auto total = ul.rows() * ul.cols();
  if (N_p < 1 || N_p > total) {
    throw ConfigError("N_p must lie in [1, " + std::to_string(total) + "], got " +
                      std::to_string(N_p));
  }
  std::vector<Port> all;
  all.reserve(total);
  for (int r = 0; r < ul.rows(); ++r)
    for (int c = 0; c < ul.cols(); ++c) all.push_back({r, c});
  auto power = [&](const Port& p) { return std::norm(ul(p.r, p.c)); };
  std::partial_sort(all.begin(), all.begin() + N_p, all.end(), [&](const Port& a, const Port& b) {
    const double pa = power(a), pb = power(b);
    if (pa != pb) return pa > pb;
    return a < b;
  });
  PortSelection sel;
  sel.method = SortMethod::power;
  sel.ports.assign(all.begin(), all.begin() + N_p);
  for (const auto& p : sel.ports) sel.source_powers.push_back(power(p));
  return sel;
}

PortSelection sort_ports(const PortSelection& selection, SortMethod method, const CMatrix& ul,
                         std::uint64_t random_seed) {
  std::vector<std::size_t> order(selection.ports.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& ports = selection.ports;
  switch (method) {
    case SortMethod::power:
    case SortMethod::amplitude:
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double pa = std::abs(ul(ports[a].r, ports[a].c));
        const double pb = std::abs(ul(ports[b].r, ports[b].c));
        if (pa != pb) return pa > pb;
        return ports[a] < ports[b];
      });
      break;
    case SortMethod::angular_delay:
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return ports[a] < ports[b]; });
      break;
    case SortMethod::delay_angular:
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(ports[a].c, ports[a].r) < std::tie(ports[b].c, ports[b].r);
      });
      break;
    case SortMethod::random: {
      std::mt19937_64 rng(random_seed);
      std::shuffle(order.begin(), order.end(), rng);
      break;
    }
    default:
      throw ConfigError("unknown sorting method");
  }
  PortSelection out;
  out.method = method;
  for (auto i : order) {
    out.ports.push_back(ports[i]);
    out.source_powers.push_back(i < selection.source_powers.size()
                                    ? selection.source_powers[i]
                                    : std::norm(ul(ports[i].r, ports[i].c)));
  }
  return out;
}

CVector gather_coefficients(const CMatrix& dl, const PortSelection& selection) {
  CVector w(selection.ports.size());
  for (std::size_t i = 0; i < selection.ports.size(); ++i) {
    const auto& p = selection.ports[i];
    check_port(p, dl.rows(), dl.cols());
    w(i) = dl(p.r, p.c);
  }
  return w;
}

std::size_t feedback_bit_length(const QuantConfig& cfg, int N_p) {
  return cfg.Q_n + static_cast<std::size_t>(N_p) * (cfg.Q_a + cfg.Q_p);
}

double ratio_level(std::uint32_t index) { return std::pow(std::numbers::sqrt2 / 2.0, index); }

std::uint32_t ratio_index(double ratio, unsigned ratio_bits) {
  const double top = std::ldexp(1.0, static_cast<int>(ratio_bits)) - 1.0;
  if (!(ratio > 0.0)) return static_cast<std::uint32_t>(top);
  const double q = std::round(ladder_position(std::min(ratio, 1.0)));
  return static_cast<std::uint32_t>(std::clamp(q, 0.0, top));
}

double amplitude_level(std::uint32_t index, unsigned Q_a) {
  const std::uint32_t zero = (1u << Q_a) - 1u;
  return index >= zero ? 0.0 : std::pow(std::numbers::sqrt2 / 2.0, index);
}

std::uint32_t amplitude_index(double ratio, unsigned Q_a) {
  const std::uint32_t zero = (1u << Q_a) - 1u;
  if (!(ratio > 0.0)) return zero;
  const double pos = ladder_position(std::min(ratio, 1.0));
  const double smallest = static_cast<double>(zero) - 1.0;
  if (pos > smallest + 0.5) return zero;
  return static_cast<std::uint32_t>(std::clamp(std::round(pos), 0.0, smallest));
}

double phase_level(std::uint32_t index, unsigned Q_p) {
  return 2.0 * std::numbers::pi * index / std::ldexp(1.0, static_cast<int>(Q_p));
}

std::uint32_t phase_index(double angle, unsigned Q_p) {
  const double n = std::ldexp(1.0, static_cast<int>(Q_p));
  double k = std::round(angle / (2.0 * std::numbers::pi) * n);
  k = std::fmod(k, n);
  if (k < 0) k += n;
  return static_cast<std::uint32_t>(k);
}

FeedbackBitstream quantize_typeii(const CVector& w, const PortSelection& selection,
                                  const QuantConfig& cfg, int N_t) {
  cfg.validate();
  if (static_cast<std::size_t>(w.size()) != selection.ports.size()) {
    throw DimensionError("quantize_typeii: " + std::to_string(w.size()) + " coefficients for " +
                         std::to_string(selection.ports.size()) + " ports");
  }
  const int half = N_t / 2;
  double pol_max[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const int pol = selection.ports[i].r >= half ? 1 : 0;
    pol_max[pol] = std::max(pol_max[pol], std::abs(w(i)));
  }
  const int strong = pol_max[1] > pol_max[0] ? 1 : 0;
  const double ratio = pol_max[strong] > 0.0 ? pol_max[1 - strong] / pol_max[strong] : 0.0;
  const unsigned ratio_bits = cfg.Q_n - 1;

  BitWriter out;
  std::uint32_t field = static_cast<std::uint32_t>(strong) << ratio_bits;
  if (ratio_bits > 0) field |= ratio_index(ratio, ratio_bits);
  out.write(field, cfg.Q_n);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const int pol = selection.ports[i].r >= half ? 1 : 0;
    const double rel = pol_max[pol] > 0.0 ? std::abs(w(i)) / pol_max[pol] : 0.0;
    out.write(amplitude_index(rel, cfg.Q_a), cfg.Q_a);
    out.write(phase_index(std::arg(w(i)), cfg.Q_p), cfg.Q_p);
  }
  return out.take();
}

CVector dequantize_typeii(const FeedbackBitstream& bits, const PortSelection& selection,
                          const QuantConfig& cfg, int N_t) {
  cfg.validate();
  const auto N_p = static_cast<int>(selection.ports.size());
  if (bits.bit_count < feedback_bit_length(cfg, N_p)) {
    throw FormatError("TypeII bitstream truncated: " + std::to_string(bits.bit_count) + " of " +
                      std::to_string(feedback_bit_length(cfg, N_p)) + " bits");
  }
  BitReader in(bits);
  const unsigned ratio_bits = cfg.Q_n - 1;
  const std::uint32_t field = in.read(cfg.Q_n);
  const int strong = static_cast<int>(field >> ratio_bits);
  const double ratio = ratio_bits > 0 ? ratio_level(field & ((1u << ratio_bits) - 1u)) : 1.0;
  const int half = N_t / 2;
  CVector w(N_p);
  for (int i = 0; i < N_p; ++i) {
    const int pol = selection.ports[i].r >= half ? 1 : 0;
    const double amp = amplitude_level(in.read(cfg.Q_a), cfg.Q_a);
    const double phase = phase_level(in.read(cfg.Q_p), cfg.Q_p);
    w(i) = std::polar((pol == strong ? 1.0 : ratio) * amp, phase);
  }
  return w;
}

CMatrix reconstruct_codebook(const CVector& w_hat, const PortSelection& selection, int N_t, int M) {
  if (static_cast<std::size_t>(w_hat.size()) != selection.ports.size()) {
    throw DimensionError("reconstruct_codebook: " + std::to_string(w_hat.size()) +
                         " coefficients for " + std::to_string(selection.ports.size()) + " ports");
  }
  CMatrix h = CMatrix::Zero(N_t, M);
  std::set<Port> seen;
  for (std::size_t i = 0; i < selection.ports.size(); ++i) {
    const auto& p = selection.ports[i];
    check_port(p, N_t, M);
    if (!seen.insert(p).second) {
      throw std::logic_error("reconstruct_codebook: duplicate port (" + std::to_string(p.r) + "," +
                             std::to_string(p.c) + ")");
    }
    h(p.r, p.c) = w_hat(i);
  }
  return h;
}

}  // namespace csifb::typeii
