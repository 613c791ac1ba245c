// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dutrack {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<double, 3>;

/// Axis-aligned box in pixels: top-left corner plus extents.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, w, h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

std::string to_string(const Box& b);

/// Interleaved 8-bit RGB raster.
class Image {
 public:
  Image() = default;
  Image(int width, int height, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t& at(int x, int y, int c) { return pixels_[index(x, y) + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels_[index(x, y) + c]; }
  void set(int x, int y, std::array<std::uint8_t, 3> rgb);

  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& bytes() { return pixels_; }

  Rgb mean_color() const;

  /// Copy of the integer rectangle [x, x+w)×[y, y+h); must lie inside the image.
  Image crop(int x, int y, int w, int h) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary PPM (P6, maxval 255).
void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace dutrack
