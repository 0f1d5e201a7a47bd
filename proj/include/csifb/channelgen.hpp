#pragma once

// Clustered geometric channel synthesis for a dual-polarized UPA base
// station serving single-antenna UEs. Each UE gets one set of clusters
// (angles, delays, powers) shared by its UL and DL channels; per-link
// complex gains are drawn independently, which gives angular-delay partial
// reciprocity between the two carriers.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace csifb {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

}  // namespace csifb

namespace csifb::channel {

struct SceneConfig {
  int K = 5;
  int N_h = 4;
  int N_v = 4;
  int M = 16;
  int N_R = 4;
  double f_ul_hz = 3.4e9;
  double f_dl_hz = 3.5e9;
  double cell_radius_m = 250.0;
  int clusters = 6;
  double delay_spread_s = 300e-9;
  std::uint64_t seed = 1;

  int N_t() const { return 2 * N_h * N_v; }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct Cluster {
  double azimuth = 0.0;  // radians
  double zenith = 0.0;   // radians
  double delay = 0.0;    // seconds
  double power = 0.0;    // linear, cluster powers sum to 1
};

using ClusterSet = std::vector<Cluster>;

enum class Link { uplink, downlink };

struct UeChannel {
  CMatrix ul;  // N_t x M spatial-frequency
  CMatrix dl;
  double distance_m = 0.0;
  double pathloss_db = 0.0;  // downlink carrier
};

struct ChannelScene {
  std::vector<UeChannel> ues;
};

inline constexpr double kMinDistanceM = 10.0;
inline constexpr double kRbBandwidthHz = 180e3;

// Unit-modulus half-wavelength UPA response, element p * N_v + q.
CVector steering_vector(double azimuth, double zenith, int N_h, int N_v);

ClusterSet generate_cluster_set(const SceneConfig& cfg, std::mt19937_64& rng);

// Column m is the channel at the centre of subband m around the link carrier.
// Rows [0, N_t/2) are polarization 0, the rest polarization 1.
CMatrix synthesize_channel(const ClusterSet& clusters, const SceneConfig& cfg, Link link,
                           std::mt19937_64& rng);

double pathloss_db(double distance_m, double f_ghz);

// Deterministic in (cfg.seed, scene_index).
ChannelScene generate_scene(const SceneConfig& cfg, std::uint64_t scene_index);

// Independent generator for one (seed, scene, ue, stream) tuple.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t scene, std::uint64_t ue,
                          std::uint64_t stream);

}  // namespace csifb::channel
