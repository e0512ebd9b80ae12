#include "sarpn/raster_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "sarpn/errors.hpp"

namespace sarpn {
namespace {

constexpr std::string_view kMagic = "RGBD1";
constexpr std::string_view kByteOrder = "little-endian";

void put_float_le(std::string& out, float f) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float get_float_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

class LineReader {
 public:
  LineReader(std::string_view bytes, std::uint64_t base) : bytes_(bytes), base_(base) {}

  std::string_view next(const char* what) {
    const std::size_t end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) {
      throw FormatError(std::string("unterminated ") + what + " line", base_ + pos_);
    }
    std::string_view line = bytes_.substr(pos_, end - pos_);
    line_start_ = pos_;
    pos_ = end + 1;
    return line;
  }
  std::size_t pos() const { return pos_; }
  std::uint64_t line_offset() const { return base_ + line_start_; }

 private:
  std::string_view bytes_;
  std::uint64_t base_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

}  // namespace

std::string encode_raster(const FeatureMap& map) {
  std::ostringstream header;
  header << kMagic << '\n'
         << map.width() << ' ' << map.height() << ' ' << map.channels() << '\n'
         << kByteOrder << '\n';
  std::string out = header.str();
  out.reserve(out.size() + map.size() * 4);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      for (int c = 0; c < map.channels(); ++c) {
        put_float_le(out, static_cast<float>(map(c, y, x)));
      }
    }
  }
  return out;
}

FeatureMap decode_raster(std::string_view bytes, std::size_t* consumed,
                         std::uint64_t base_offset) {
  LineReader lines(bytes, base_offset);
  if (lines.next("magic") != kMagic) {
    throw FormatError("bad raster magic, expected RGBD1", lines.line_offset());
  }
  const std::string_view dims = lines.next("dimension");
  long long values[3] = {0, 0, 0};
  {
    const char* p = dims.data();
    const char* end = dims.data() + dims.size();
    for (int i = 0; i < 3; ++i) {
      if (i > 0) {
        if (p == end || *p != ' ') {
          throw FormatError("raster dimensions must be 'W H C'",
                            lines.line_offset() + (p - dims.data()));
        }
        ++p;
      }
      auto [next, ec] = std::from_chars(p, end, values[i]);
      if (ec == std::errc::result_out_of_range) {
        throw FormatError("raster dimension overflows", lines.line_offset() + (p - dims.data()));
      }
      if (ec != std::errc() || next == p) {
        throw FormatError("raster dimensions must be decimal integers",
                          lines.line_offset() + (p - dims.data()));
      }
      if (values[i] <= 0) {
        throw FormatError("raster dimensions must be positive",
                          lines.line_offset() + (p - dims.data()));
      }
      p = next;
    }
    if (p != end) {
      throw FormatError("trailing characters after raster dimensions",
                        lines.line_offset() + (p - dims.data()));
    }
  }
  if (lines.next("byte order") != kByteOrder) {
    throw FormatError("unsupported byte order, expected little-endian", lines.line_offset());
  }
  const long long width = values[0];
  const long long height = values[1];
  const long long channels = values[2];
  constexpr long long kIntMax = std::numeric_limits<int>::max();
  if (width > kIntMax || height > kIntMax || channels > kIntMax ||
      width > kIntMax / height || width * height > kIntMax / channels ||
      width * height * channels > std::numeric_limits<long long>::max() / 4) {
    throw FormatError("raster size overflows", base_offset + lines.pos());
  }
  const std::size_t count = static_cast<std::size_t>(width * height * channels);
  const std::size_t payload = lines.pos();
  if (bytes.size() - payload < count * 4) {
    throw FormatError("raster payload truncated: need " + std::to_string(count * 4) +
                          " bytes, have " + std::to_string(bytes.size() - payload),
                      base_offset + bytes.size());
  }
  if (consumed == nullptr && bytes.size() - payload != count * 4) {
    throw FormatError("trailing bytes after raster payload", base_offset + payload + count * 4);
  }
  FeatureMap map(static_cast<int>(channels), static_cast<int>(height),
                 static_cast<int>(width));
  const char* p = bytes.data() + payload;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      for (int c = 0; c < map.channels(); ++c) {
        map(c, y, x) = get_float_le(p);
        p += 4;
      }
    }
  }
  if (consumed != nullptr) *consumed = payload + count * 4;
  return map;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed", path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

void write_raster(const std::filesystem::path& path, const FeatureMap& map) {
  write_file(path, encode_raster(map));
}

FeatureMap read_raster(const std::filesystem::path& path) {
  return decode_raster(read_file(path));
}

}  // namespace sarpn
