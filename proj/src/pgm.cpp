#include "hypelift/pgm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "hypelift/errors.hpp"

namespace hypelift {

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.maxval < 1 || image.maxval > 65535) throw FormatError("PGM maxval out of range");
  if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width) {
    throw FormatError("PGM pixel count does not match its size");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open for writing: " + path.string());
  f << "P5\n" << image.width << " " << image.height << "\n" << image.maxval << "\n";
  std::string payload;
  const bool wide = image.maxval > 255;
  payload.reserve(image.pixels.size() * (wide ? 2 : 1));
  for (std::uint16_t p : image.pixels) {
    if (p > image.maxval) throw FormatError("PGM sample exceeds maxval");
    if (wide) payload.push_back(static_cast<char>(p >> 8));
    payload.push_back(static_cast<char>(p & 0xff));
  }
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) throw FormatError("write failed: " + path.string());
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
int header_int(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw FormatError("malformed PGM header: " + path.string());
  return std::stoi(bytes.substr(start, pos - start));
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open PGM file: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("not a binary PGM (P5): " + path.string());
  }
  std::size_t pos = 2;
  GrayImage img;
  img.width = header_int(bytes, pos, path);
  img.height = header_int(bytes, pos, path);
  img.maxval = header_int(bytes, pos, path);
  if (img.maxval < 1 || img.maxval > 65535) throw FormatError("PGM maxval out of range");
  ++pos;  // single whitespace before the raster
  const bool wide = img.maxval > 255;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() < pos + n * (wide ? 2 : 1)) throw FormatError("truncated PGM: " + path.string());
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (wide) {
      img.pixels[i] = static_cast<std::uint16_t>(
          (static_cast<unsigned char>(bytes[pos]) << 8) | static_cast<unsigned char>(bytes[pos + 1]));
      pos += 2;
    } else {
      img.pixels[i] = static_cast<unsigned char>(bytes[pos++]);
    }
  }
  return img;
}

}  // namespace hypelift
