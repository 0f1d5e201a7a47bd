#include "csifb/channelgen.hpp"

#include <cmath>
#include <numbers>

#include "csifb/errors.hpp"

namespace csifb::channel {

namespace {

constexpr std::uint64_t kStreamDrop = 1;
constexpr std::uint64_t kStreamClusters = 2;
constexpr std::uint64_t kStreamUplink = 3;
constexpr std::uint64_t kStreamDownlink = 4;

}  // namespace

void SceneConfig::validate() const {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (N_h < 1 || N_v < 1) throw ConfigError("N_h and N_v must be >= 1");
  if (M < 1) throw ConfigError("M must be >= 1");
  if (N_R < 1) throw ConfigError("N_R must be >= 1");
  if (clusters < 1) throw ConfigError("clusters (L) must be >= 1");
  if (!(f_ul_hz > 0) || !(f_dl_hz > 0)) throw ConfigError("carrier frequencies must be positive");
  if (f_ul_hz == f_dl_hz) throw ConfigError("f_UL and f_DL must differ");
  if (!(cell_radius_m > kMinDistanceM)) throw ConfigError("cell_radius must exceed 10 m");
  if (!(delay_spread_s > 0)) throw ConfigError("delay_spread must be positive");
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t scene, std::uint64_t ue,
                          std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(scene), static_cast<std::uint32_t>(scene >> 32),
                    static_cast<std::uint32_t>(ue), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

CVector steering_vector(double azimuth, double zenith, int N_h, int N_v) {
  CVector a(N_h * N_v);
  const double u = std::sin(zenith) * std::sin(azimuth);
  const double v = std::cos(zenith);
  for (int p = 0; p < N_h; ++p) {
    for (int q = 0; q < N_v; ++q) {
      a(p * N_v + q) = std::polar(1.0, std::numbers::pi * (p * u + q * v));
    }
  }
  return a;
}

ClusterSet generate_cluster_set(const SceneConfig& cfg, std::mt19937_64& rng) {
  using std::numbers::pi;
  std::uniform_real_distribution<double> az(-pi / 3, pi / 3);
  std::uniform_real_distribution<double> zen(pi / 2 - pi / 6, pi / 2 + pi / 6);
  std::exponential_distribution<double> delay(1.0 / cfg.delay_spread_s);
  ClusterSet set(cfg.clusters);
  double total = 0.0;
  for (auto& c : set) {
    c.azimuth = az(rng);
    c.zenith = zen(rng);
    c.delay = std::min(delay(rng), 4.0 * cfg.delay_spread_s);
    c.power = std::exp(-c.delay / cfg.delay_spread_s);
    total += c.power;
  }
  for (auto& c : set) c.power /= total;
  return set;
}

CMatrix synthesize_channel(const ClusterSet& clusters, const SceneConfig& cfg, Link link,
                           std::mt19937_64& rng) {
  const int half = cfg.N_h * cfg.N_v;
  const double carrier = link == Link::uplink ? cfg.f_ul_hz : cfg.f_dl_hz;
  const double spacing = cfg.N_R * kRbBandwidthHz;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  CMatrix h = CMatrix::Zero(2 * half, cfg.M);
  for (const auto& c : clusters) {
    // Unit total energy per matrix: E|h_ij|^2 = 1 / M.
    const double mag = std::sqrt(c.power / cfg.M);
    const std::complex<double> g0 = std::polar(mag, phase(rng));
    const std::complex<double> g1 = std::polar(mag, phase(rng));
    const CVector a = steering_vector(c.azimuth, c.zenith, cfg.N_h, cfg.N_v);
    for (int m = 0; m < cfg.M; ++m) {
      const double fm = carrier + (m - 0.5 * (cfg.M - 1)) * spacing;
      const std::complex<double> d = std::polar(1.0, -2.0 * std::numbers::pi * fm * c.delay);
      h.col(m).head(half) += g0 * d * a;
      h.col(m).tail(half) += g1 * d * a;
    }
  }
  return h;
}

double pathloss_db(double distance_m, double f_ghz) {
  return 28.0 + 22.0 * std::log10(distance_m) + 20.0 * std::log10(f_ghz);
}

ChannelScene generate_scene(const SceneConfig& cfg, std::uint64_t scene_index) {
  cfg.validate();
  ChannelScene scene;
  scene.ues.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    auto drop_rng = substream(cfg.seed, scene_index, k, kStreamDrop);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double d = 0.0;
    do {
      d = cfg.cell_radius_m * std::sqrt(unit(drop_rng));
    } while (d < kMinDistanceM);

    auto cluster_rng = substream(cfg.seed, scene_index, k, kStreamClusters);
    const ClusterSet clusters = generate_cluster_set(cfg, cluster_rng);
    auto ul_rng = substream(cfg.seed, scene_index, k, kStreamUplink);
    auto dl_rng = substream(cfg.seed, scene_index, k, kStreamDownlink);

    UeChannel ue;
    ue.distance_m = d;
    ue.pathloss_db = pathloss_db(d, cfg.f_dl_hz / 1e9);
    const double ul_amp = std::pow(10.0, -pathloss_db(d, cfg.f_ul_hz / 1e9) / 20.0);
    const double dl_amp = std::pow(10.0, -ue.pathloss_db / 20.0);
    ue.ul = synthesize_channel(clusters, cfg, Link::uplink, ul_rng) * ul_amp;
    ue.dl = synthesize_channel(clusters, cfg, Link::downlink, dl_rng) * dl_amp;
    scene.ues.push_back(std::move(ue));
  }
  return scene;
}

}  // namespace csifb::channel
