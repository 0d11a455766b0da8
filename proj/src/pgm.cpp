#include "ragseg/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "ragseg/error.hpp"
#include "ragseg/tensor_io.hpp"

namespace ragseg {

namespace {

class HeaderParser {
 public:
  HeaderParser(std::span<const std::byte> bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::size_t number() {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(ch())) {
      value = value * 10 + static_cast<std::size_t>(ch() - '0');
      ++pos_;
      if (++digits > 9) fail("header number too large");
    }
    if (digits == 0) fail("malformed header");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(ch())) fail("malformed header");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const char* what) const {
    throw FormatError(fmt::format("PGM '{}': {}", path_.string(), what));
  }

 private:
  int ch() const { return static_cast<unsigned char>(bytes_[pos_]); }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(ch())) {
        ++pos_;
      } else if (ch() == '#') {
        while (pos_ < bytes_.size() && ch() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::byte> bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 2;
};

}  // namespace

Map2d read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  HeaderParser parser(bytes, path);
  if (bytes.size() < 2 || static_cast<char>(bytes[0]) != 'P' || static_cast<char>(bytes[1]) != '5') {
    parser.fail("not a binary (P5) PGM");
  }
  const std::size_t width = parser.number();
  const std::size_t height = parser.number();
  const std::size_t maxval = parser.number();
  if (width == 0 || height == 0) parser.fail("zero dimension");
  if (maxval == 0 || maxval > 255) parser.fail("only 8-bit PGM is supported");
  const std::size_t start = parser.raster_start();
  if (bytes.size() < start + width * height) parser.fail("truncated raster");

  Map2d out(height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < width * height; ++i) {
    out.values()[i] = std::min(1.0, static_cast<double>(static_cast<unsigned char>(bytes[start + i])) * scale);
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Map2d& map) {
  if (map.empty()) throw DataError("write_pgm: empty map");
  const std::string header = fmt::format("P5\n{} {}\n255\n", map.cols(), map.rows());
  std::vector<std::byte> bytes;
  bytes.reserve(header.size() + map.size());
  for (char c : header) bytes.push_back(static_cast<std::byte>(c));
  for (double v : map.values()) {
    const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    bytes.push_back(static_cast<std::byte>(static_cast<unsigned char>(scaled)));
  }
  write_file(path, bytes);
}

}  // namespace ragseg
