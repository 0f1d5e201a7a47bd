#include "csifb/bitstream.hpp"

#include <string>

#include "csifb/errors.hpp"

namespace csifb {

void BitWriter::write(std::uint32_t value, unsigned width) {
  if (width == 0 || width > 32) throw ConfigError("bit field width must be in [1, 32]");
  if (width < 32 && (value >> width) != 0) {
    throw ConfigError("value " + std::to_string(value) + " does not fit in " +
                      std::to_string(width) + " bits");
  }
  for (unsigned b = width; b-- > 0;) {
    const std::size_t i = stream_.bit_count++;
    if (i / 8 >= stream_.bytes.size()) stream_.bytes.push_back(0);
    if ((value >> b) & 1u) stream_.bytes[i / 8] |= static_cast<std::uint8_t>(1u << (7 - i % 8));
  }
  stream_.field_widths.push_back(width);
}

std::uint32_t BitReader::read(unsigned width) {
  if (width > remaining()) {
    throw FormatError("bitstream truncated: need " + std::to_string(width) + " bits, " +
                      std::to_string(remaining()) + " remain");
  }
  std::uint32_t v = 0;
  for (unsigned b = 0; b < width; ++b) v = (v << 1) | (stream_.bit(pos_++) ? 1u : 0u);
  return v;
}

}  // namespace csifb
