#include "relstab/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"

namespace relstab {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::string& buf, std::size_t& pos,
                         const std::filesystem::path& path) {
  while (pos < buf.size()) {
    if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])))
    ++pos;
  if (start == pos)
    throw FormatError(FormatFault::kMalformedHeader,
                      path.string() + ": incomplete PGM header");
  return buf.substr(start, pos - start);
}

std::size_t header_number(const std::string& token,
                          const std::filesystem::path& path) {
  if (token.empty() || token.size() > 9 ||
      !std::all_of(token.begin(), token.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw FormatError(FormatFault::kMalformedHeader,
                      path.string() + ": bad PGM header field '" + token + "'");
  return std::stoul(token);
}

}  // namespace

Pgm16 read_pgm16(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
    throw FormatError(FormatFault::kBadMagic,
                      path.string() + ": not a binary PGM (P5) file");
  std::size_t pos = 2;
  Pgm16 img;
  img.width = header_number(header_token(buf, pos, path), path);
  img.height = header_number(header_token(buf, pos, path), path);
  const std::size_t maxval = header_number(header_token(buf, pos, path), path);
  if (img.width == 0 || img.height == 0)
    throw FormatError(FormatFault::kMalformedHeader,
                      path.string() + ": zero image dimension");
  if (maxval != 65535)
    throw FormatError(FormatFault::kUnsupportedDepth,
                      path.string() + ": unsupported depth, maxval " +
                          std::to_string(maxval) + " (expected 65535)");
  if (pos >= buf.size() ||
      !std::isspace(static_cast<unsigned char>(buf[pos])))
    throw FormatError(FormatFault::kMalformedHeader,
                      path.string() + ": missing separator after header");
  ++pos;
  const std::size_t count = img.width * img.height;
  if (buf.size() - pos < 2 * count)
    throw FormatError(FormatFault::kTruncated,
                      path.string() + ": truncated payload, expected " +
                          std::to_string(2 * count) + " bytes");
  img.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto hi = static_cast<unsigned char>(buf[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(buf[pos + 2 * i + 1]);
    img.samples[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

void write_pgm16(const std::filesystem::path& path, const Pgm16& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + 2 * image.samples.size());
  for (std::uint16_t v : image.samples) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  write_file_atomic(path, out);
}

void save_pgm(const std::filesystem::path& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1)))
    throw InputError("save_pgm expects [H,W] or [1,H,W], got " +
                     shape_string(s));
  Pgm16 img;
  img.height = s[s.size() - 2];
  img.width = s[s.size() - 1];
  img.samples.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double x = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    img.samples[i] = static_cast<std::uint16_t>(std::lround(x * 65535.0));
  }
  write_pgm16(path, img);
}

Tensor load_pgm(const std::filesystem::path& path) {
  const Pgm16 img = read_pgm16(path);
  Tensor t({1, img.height, img.width});
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    t[i] = static_cast<float>(img.samples[i] / 65535.0);
  return t;
}

}  // namespace relstab
