#pragma once

#include <cstdint>
#include <vector>

namespace csifb {

// Packed feedback bits. Fields are written most-significant-bit first and
// concatenated without padding; `field_widths` records the layout.
struct FeedbackBitstream {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;
  std::vector<unsigned> field_widths;

  bool bit(std::size_t i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1u; }
  bool operator==(const FeedbackBitstream&) const = default;
};

class BitWriter {
 public:
  void write(std::uint32_t value, unsigned width);
  const FeedbackBitstream& stream() const { return stream_; }
  FeedbackBitstream take() { return std::move(stream_); }

 private:
  FeedbackBitstream stream_;
};

class BitReader {
 public:
  explicit BitReader(const FeedbackBitstream& stream) : stream_(stream) {}
  // Throws FormatError when fewer than `width` bits remain.
  std::uint32_t read(unsigned width);
  std::size_t remaining() const { return stream_.bit_count - pos_; }

 private:
  const FeedbackBitstream& stream_;
  std::size_t pos_ = 0;
};

}  // namespace csifb
