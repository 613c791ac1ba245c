// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dutrack/image.hpp"

namespace dutrack {

/// Annotated video: frames with ground-truth boxes, category and initial description.
struct Sequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<Box> gt;
  std::string category;
  std::string description;

  std::size_t size() const { return frames.size(); }
};

enum class Shape { Rectangle, Ellipse };

/// Center path: c(t) = c0 + v·t + amplitude ⊙ (sin(ωt + φ), cos(ωt + φ)), ω = 2π/period.
/// A zero amplitude gives a linear path.
struct Trajectory {
  double cx0 = 128.0;
  double cy0 = 128.0;
  double vx = 0.0;
  double vy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  double period = 100.0;
  double phase = 0.0;

  std::array<double, 2> at(double t) const;
};

struct ObjectSpec {
  Shape shape = Shape::Rectangle;
  Rgb color_start{255, 0, 0};
  Rgb color_end{255, 0, 0};
  /// Fraction of the start→end colour change applied per frame (saturates at 1).
  double drift_rate = 0.0;
  double w_start = 32.0;
  double h_start = 32.0;
  double w_end = 32.0;
  double h_end = 32.0;
  Trajectory path;

  Rgb color_at(std::size_t t) const;
  std::array<double, 2> extents_at(std::size_t t, std::size_t length) const;
};

struct SynthSpec {
  std::string name = "seq";
  int width = 256;
  int height = 256;
  std::size_t length = 100;
  ObjectSpec target;
  std::vector<ObjectSpec> distractors;
  std::array<std::uint8_t, 3> background{40, 40, 40};
  int noise = 0;  // uniform per-channel noise amplitude
  std::uint64_t seed = 0;
  std::string category;  // empty: derived from the target shape
};

/// Renders the sequence. The target is drawn last with hard edges, so its
/// ground-truth box is the exact bounding box of its pixels. Throws
/// std::invalid_argument when the target leaves the frame by more than half
/// or an extent drops below 8 px.
Sequence generate_sequence(const SynthSpec& spec);

std::string category_for(Shape shape);

/// <dir>/img/%08d.ppm (numbered from 1), groundtruth.txt, nlp.txt, category.txt.
void write_sequence(const Sequence& seq, const std::filesystem::path& dir);
Sequence read_sequence(const std::filesystem::path& dir);

/// Every sequence directory (one containing groundtruth.txt) under `root`, sorted by name.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root);

std::vector<Box> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::vector<Box>& boxes, const std::filesystem::path& path);

/// A family of randomized sequences: static, drift-color, scale-ramp, fast-motion, distractor.
struct SuiteSpec {
  std::string family = "static";
  std::size_t count = 10;
  std::uint64_t seed = 1;
  std::size_t length = 100;
  int width = 256;
  int height = 256;
  int noise = 6;
};

const std::vector<std::string>& suite_families();

std::vector<SynthSpec> make_suite(const SuiteSpec& suite);

}  // namespace dutrack
