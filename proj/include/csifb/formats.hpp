#pragma once

// Binary and CSV artifacts. All binary integers and floats are little-endian.
//
// Dataset ("CSID", 32-byte header):
//   magic[4] version:u32 count:u32 K:u32 N_t:u32 M:u32 seed:u64
//   then per scene, per UE: H_UL then H_DL, row-major, (re, im) f32 pairs.
// Checkpoint ("CSIW"):
//   magic[4] version:u32 digest:u64 entries:u32
//   per entry: name_len:u32 name rank:u32 dims:u64[rank] data:f64[prod(dims)]

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "csifb/channelgen.hpp"
#include "csifb/csinet.hpp"
#include "csifb/mueval.hpp"
#include "csifb/training.hpp"

namespace csifb::harness {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 32;

struct Dataset {
  std::uint32_t K = 0;
  std::uint32_t N_t = 0;
  std::uint32_t M = 0;
  std::uint64_t seed = 0;
  std::vector<channel::ChannelScene> scenes;
};

std::size_t dataset_byte_length(std::size_t count, std::size_t K, std::size_t N_t, std::size_t M);

// Rounds every entry to float precision, as the file stores it.
void round_to_float(channel::ChannelScene& scene);

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

struct Checkpoint {
  std::uint64_t digest = 0;
  std::vector<csinet::TypeIICsiNet::StateEntry> entries;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const csinet::TypeIICsiNet& model);
// Rejects a checkpoint whose digest differs from the model's config.
void load_checkpoint(const std::string& path, csinet::TypeIICsiNet& model);

inline constexpr const char* kMetricsVersionLine = "# csifb-metrics v1";
inline constexpr const char* kMetricsHeader =
    "epoch,stage,loss_mse,loss_nar,val_sum_rate,seconds,regularized_batches";
inline constexpr const char* kResultsVersionLine = "# csifb-results v1";
inline constexpr const char* kResultsHeader =
    "scheme,B_bits,N_p,N_R,sorting,mean_rate,stderr,scenes,loss,seeds";

// Round-trip exact decimal form; NaN becomes an empty field.
std::string format_number(double v);

std::string metrics_csv_header();
std::string metrics_csv_row(const training::MetricsRecord& rec);

struct ResultRow {
  mueval::SumRateReport report;
  std::string loss;  // empty for schemes without training
  int seeds = 0;
};

std::string results_csv_header();
std::string results_csv_row(const ResultRow& row);
// Appends rows, writing the header first when the file is new or empty.
// An existing file with a different header is rejected.
void append_results(const std::string& path, const std::vector<ResultRow>& rows);

// Text helpers.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace csifb::harness
