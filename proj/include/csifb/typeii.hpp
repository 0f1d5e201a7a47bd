#pragma once

// Port-selection TypeII codebook: strongest-port selection on the UL
// angular-delay matrix, port ordering, per-port amplitude/phase quantization
// with a polarization normalization field, and codebook reconstruction.
//
// Feedback layout (MSB first, no padding):
//   [polarization field: Q_n bits][amp_0: Q_a][phase_0: Q_p] ... [amp_{N_p-1}][phase_{N_p-1}]
// The polarization field's top bit names the stronger polarization; the
// remaining Q_n - 1 bits index the weak/strong max-amplitude ratio on the
// ladder (1/sqrt2)^q. Amplitudes are relative to their own polarization's
// max on (1/sqrt2)^q, q = 0..2^Q_a - 2, with index 2^Q_a - 1 meaning zero.
// Phases use 2^Q_p uniform points anchored at 0.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csifb/bitstream.hpp"
#include "csifb/channelgen.hpp"

namespace csifb::typeii {

struct Port {
  int r = 0;  // angular row
  int c = 0;  // delay column
  auto operator<=>(const Port&) const = default;
};

enum class SortMethod { power, angular_delay, delay_angular, amplitude, random };

std::string to_string(SortMethod method);
SortMethod parse_sort_method(std::string_view name);

struct PortSelection {
  std::vector<Port> ports;
  SortMethod method = SortMethod::power;
  std::vector<double> source_powers;  // |H~_UL[r, c]|^2, aligned with ports
};

struct QuantConfig {
  unsigned Q_n = 5;
  unsigned Q_a = 2;
  unsigned Q_p = 3;
  void validate() const;
};

// The N_p largest-power entries of the UL angular-delay matrix, in
// descending power; ties go to the smaller (r, c).
PortSelection select_ports(const CMatrix& ul_angular_delay, int N_p);

// `random_seed` is only consulted by SortMethod::random.
PortSelection sort_ports(const PortSelection& selection, SortMethod method,
                         const CMatrix& ul_angular_delay, std::uint64_t random_seed = 0);

CVector gather_coefficients(const CMatrix& dl_angular_delay, const PortSelection& selection);

std::size_t feedback_bit_length(const QuantConfig& cfg, int N_p);

FeedbackBitstream quantize_typeii(const CVector& w, const PortSelection& selection,
                                  const QuantConfig& cfg, int N_t);

// Strong-polarization max amplitude comes back as 1; the global scale is
// not part of the feedback.
CVector dequantize_typeii(const FeedbackBitstream& bits, const PortSelection& selection,
                          const QuantConfig& cfg, int N_t);

CMatrix reconstruct_codebook(const CVector& w_hat, const PortSelection& selection, int N_t, int M);

// Codebooks, exposed for conformance tests.
double ratio_level(std::uint32_t index);
std::uint32_t ratio_index(double ratio, unsigned ratio_bits);
double amplitude_level(std::uint32_t index, unsigned Q_a);
std::uint32_t amplitude_index(double ratio, unsigned Q_a);
double phase_level(std::uint32_t index, unsigned Q_p);
std::uint32_t phase_index(double angle, unsigned Q_p);

}  // namespace csifb::typeii
