#include "csifb/formats.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "csifb/errors.hpp"

namespace csifb::harness {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(out, u);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(out, u);
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  std::array<unsigned char, 8> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in, const char* what) {
  const std::uint32_t u = get_u32(in, what);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

double get_f64(std::istream& in, const char* what) {
  const std::uint64_t u = get_u64(in, what);
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

void expect_magic(std::istream& in, const char* magic) {
  char got[4];
  read_exact(in, got, 4, "magic");
  if (std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

void expect_end(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after payload");
}

void write_matrix(std::ostream& out, const CMatrix& h) {
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      put_f32(out, static_cast<float>(h(r, c).real()));
      put_f32(out, static_cast<float>(h(r, c).imag()));
    }
  }
}

CMatrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  CMatrix h(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const float re = get_f32(in, "dataset body");
      const float im = get_f32(in, "dataset body");
      h(r, c) = {re, im};
    }
  }
  return h;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::binary) {
  std::ofstream out(path, mode);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

std::size_t dataset_byte_length(std::size_t count, std::size_t K, std::size_t N_t, std::size_t M) {
  return kDatasetHeaderBytes + count * K * 2 * N_t * M * 8;
}

void round_to_float(channel::ChannelScene& scene) {
  auto round = [](CMatrix& h) {
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      h(i) = {static_cast<float>(h(i).real()), static_cast<float>(h(i).imag())};
    }
  };
  for (auto& ue : scene.ues) {
    round(ue.ul);
    round(ue.dl);
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out.write("CSID", 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(data.scenes.size()));
  put_u32(out, data.K);
  put_u32(out, data.N_t);
  put_u32(out, data.M);
  put_u64(out, data.seed);
  for (std::size_t s = 0; s < data.scenes.size(); ++s) {
    const auto& scene = data.scenes[s];
    if (scene.ues.size() != data.K) {
      throw DimensionError("scene " + std::to_string(s) + " has " +
                           std::to_string(scene.ues.size()) + " UEs, header K=" +
                           std::to_string(data.K));
    }
    for (const auto& ue : scene.ues) {
      for (const CMatrix* h : {&ue.ul, &ue.dl}) {
        if (h->rows() != data.N_t || h->cols() != data.M) {
          throw DimensionError("scene " + std::to_string(s) + " matrix is " +
                               std::to_string(h->rows()) + "x" + std::to_string(h->cols()) +
                               ", header N_t x M = " + std::to_string(data.N_t) + "x" +
                               std::to_string(data.M));
        }
        write_matrix(out, *h);
      }
    }
  }
  if (!out) throw FormatError("write failed");
}

Dataset read_dataset(std::istream& in) {
  expect_magic(in, "CSID");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  Dataset d;
  const std::uint32_t count = get_u32(in, "count");
  d.K = get_u32(in, "K");
  d.N_t = get_u32(in, "N_t");
  d.M = get_u32(in, "M");
  d.seed = get_u64(in, "seed");
  if (d.K == 0 || d.N_t == 0 || d.M == 0) throw FormatError("dataset header has a zero dimension");
  d.scenes.resize(count);
  for (auto& scene : d.scenes) {
    scene.ues.resize(d.K);
    for (auto& ue : scene.ues) {
      ue.ul = read_matrix(in, d.N_t, d.M);
      ue.dl = read_matrix(in, d.N_t, d.M);
    }
  }
  expect_end(in);
  return d;
}

void save_dataset(const std::string& path, const Dataset& data) {
  auto out = open_out(path);
  write_dataset(out, data);
}

Dataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write("CSIW", 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, ckpt.digest);
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    std::size_t n = 1;
    for (auto d : e.shape) {
      put_u64(out, d);
      n *= d;
    }
    if (n != e.values.size()) throw DimensionError("checkpoint entry " + e.name + " size mismatch");
    for (double v : e.values) put_f64(out, v);
  }
  if (!out) throw FormatError("write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  expect_magic(in, "CSIW");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.digest = get_u64(in, "digest");
  const std::uint32_t count = get_u32(in, "entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    csinet::TypeIICsiNet::StateEntry e;
    const std::uint32_t len = get_u32(in, "name length");
    if (len > 4096) throw FormatError("implausible entry name length");
    e.name.resize(len);
    read_exact(in, e.name.data(), len, "entry name");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank > 8) throw FormatError("implausible rank for " + e.name);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.shape.push_back(get_u64(in, "dims"));
      n *= e.shape.back();
    }
    if (n > (std::size_t{1} << 32)) throw FormatError("implausible size for " + e.name);
    e.values.resize(n);
    for (auto& v : e.values) v = get_f64(in, "entry data");
    for (const auto& prev : c.entries) {
      if (prev.name == e.name) throw FormatError("duplicate checkpoint entry " + e.name);
    }
    c.entries.push_back(std::move(e));
  }
  expect_end(in);
  return c;
}

void save_checkpoint(const std::string& path, const csinet::TypeIICsiNet& model) {
  auto out = open_out(path);
  write_checkpoint(out, {model.config().digest(), model.state()});
}

void load_checkpoint(const std::string& path, csinet::TypeIICsiNet& model) {
  auto in = open_in(path);
  const Checkpoint c = read_checkpoint(in);
  if (c.digest != model.config().digest()) {
    throw ConfigError("checkpoint '" + path + "' was written for a different model config");
  }
  model.load_state(c.entries);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv_header() {
  return std::string(kMetricsVersionLine) + "\n" + kMetricsHeader + "\n";
}

std::string metrics_csv_row(const training::MetricsRecord& rec) {
  return std::to_string(rec.epoch) + "," + std::to_string(rec.stage) + "," +
         format_number(rec.loss_mse) + "," + format_number(rec.loss_nar) + "," +
         format_number(rec.val_sum_rate) + "," + format_number(rec.seconds) + "," +
         std::to_string(rec.regularized_batches) + "\n";
}

std::string results_csv_header() {
  return std::string(kResultsVersionLine) + "\n" + kResultsHeader + "\n";
}

std::string results_csv_row(const ResultRow& row) {
  const auto& r = row.report;
  return r.scheme + "," + std::to_string(r.feedback_bits) + "," + std::to_string(r.N_p) + "," +
         std::to_string(r.N_R) + "," + r.sorting + "," + format_number(r.mean) + "," +
         format_number(r.stderr_) + "," + std::to_string(r.per_scene.size()) + "," + row.loss +
         "," + std::to_string(row.seeds) + "\n";
}

void append_results(const std::string& path, const std::vector<ResultRow>& rows) {
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (!fresh) {
    const std::string text = read_text_file(path);
    if (text.rfind(results_csv_header(), 0) != 0) {
      throw FormatError("'" + path + "' is not a results CSV with header " + kResultsHeader);
    }
  }
  auto out = open_out(path, std::ios::binary | std::ios::app);
  if (fresh) out << results_csv_header();
  for (const auto& row : rows) out << results_csv_row(row);
}

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw FormatError("write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace csifb::harness
