// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace dutrack {

std::string to_string(const Box& b) {
  std::ostringstream os;
  os << b.x << ',' << b.y << ',' << b.w << ',' << b.h;
  return os.str();
}

Image::Image(int width, int height, std::array<std::uint8_t, 3> fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("image: negative size");
  pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill[0];
    pixels_[i + 1] = fill[1];
    pixels_[i + 2] = fill[2];
  }
}

void Image::set(int x, int y, std::array<std::uint8_t, 3> rgb) {
  const std::size_t i = index(x, y);
  pixels_[i] = rgb[0];
  pixels_[i + 1] = rgb[1];
  pixels_[i + 2] = rgb[2];
}

Rgb Image::mean_color() const {
  Rgb sum{0.0, 0.0, 0.0};
  if (pixels_.empty()) return sum;
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    sum[0] += pixels_[i];
    sum[1] += pixels_[i + 1];
    sum[2] += pixels_[i + 2];
  }
  const double n = static_cast<double>(pixels_.size() / 3);
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

Image Image::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width_ || y + h > height_) {
    throw std::out_of_range("image crop outside raster");
  }
  Image out(w, h);
  for (int r = 0; r < h; ++r) {
    const auto* src = pixels_.data() + index(x, y + r);
    std::copy(src, src + static_cast<std::size_t>(w) * 3, out.pixels_.data() + out.index(0, r));
  }
  return out;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.bytes().data()),
            static_cast<std::streamsize>(img.bytes().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
int next_header_int(const std::string& buf, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) ++pos;
  if (start == pos) {
    throw IoError(path.string() + ": malformed PPM header at byte offset " + std::to_string(start));
  }
  return std::stoi(buf.substr(start, pos - start));
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') {
    throw IoError(path.string() + ": not a binary PPM (P6) file");
  }
  std::size_t pos = 2;
  const int w = next_header_int(buf, pos, path);
  const int h = next_header_int(buf, pos, path);
  const int maxval = next_header_int(buf, pos, path);
  if (maxval != 255) {
    throw IoError(path.string() + ": unsupported maxval " + std::to_string(maxval));
  }
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw IoError(path.string() + ": malformed PPM header at byte offset " + std::to_string(pos));
  }
  ++pos;
  Image img(w, h);
  const std::size_t need = img.bytes().size();
  if (buf.size() - pos < need) {
    throw IoError(path.string() + ": truncated raster, expected " + std::to_string(need) +
                  " bytes from offset " + std::to_string(pos) + ", file ends at byte offset " +
                  std::to_string(buf.size()));
  }
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(pos),
            buf.begin() + static_cast<std::ptrdiff_t>(pos + need), img.bytes().begin());
  return img;
}

}  // namespace dutrack
