// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "dutrack/image.hpp"

namespace dutrack {

/// Snapshot of the target at the last language update.
struct ObjectStamp {
  Box box;
  Rgb mean_rgb{0.0, 0.0, 0.0};
  std::size_t frame_index = 0;
  std::string description;
  std::string category;
};

struct UpdateDeltas {
  double dS = 1.0;  // stamp area / current area
  double dD = 0.0;  // center displacement, pixels
  double dC = 0.0;  // RGB-mean distance
};

struct UpdatePolicy {
  static constexpr int kStride = 16;

  double tau_s = 0.8;
  double tau_d_strides = 1.0;
  double tau_c = 25.0;
  /// Also trigger when the target grows past 1/tau_s.
  bool symmetric_scale = false;

  double tau_d() const { return tau_d_strides * kStride; }
};

double scale_ratio(const Box& stamp, const Box& current);

/// Distance between box centers; with `corners` the literal top-left distance.
double center_displacement(const Box& stamp, const Box& current, bool corners = false);

/// Per-channel mean over integer pixels (px, py) with x ≤ px < x+w, y ≤ py < y+h,
/// clipped to the frame. Throws std::invalid_argument if nothing remains.
Rgb mean_rgb(const Image& frame, const Box& box);

double color_shift(const Rgb& a, const Rgb& b);

/// (dS < tau_s) or (dD > tau_d) or (dC > tau_c).
bool should_update(const UpdateDeltas& d, const UpdatePolicy& p);

UpdateDeltas compute_deltas(const ObjectStamp& stamp, const Image& frame, const Box& current,
                            bool corner_displacement = false);

/// Nearest of the eight canonical colour names.
std::string nearest_color_name(const Rgb& rgb);

/// "<color> <category> <size> at the <position> of the frame".
std::string generate_description(const Image& frame, const Box& box, const std::string& category);

/// Every word the rule-based grammar can emit for the given categories.
std::vector<std::string> description_vocabulary(const std::vector<std::string>& categories);

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string describe(const Image& frame, const Box& box,
                               const std::string& category) const = 0;
};

class RuleCaptioner final : public Captioner {
 public:
  std::string describe(const Image& frame, const Box& box,
                       const std::string& category) const override {
    return generate_description(frame, box, category);
  }
};

/// Runs `command <image.ppm> <x,y,w,h> <category>` and reads one line from its
/// stdout. Timeouts, non-zero exits and empty output fall back to the rule grammar.
class ExternalCaptioner final : public Captioner {
 public:
  explicit ExternalCaptioner(std::string command,
                             std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  std::string describe(const Image& frame, const Box& box,
                       const std::string& category) const override;

  const std::string& command() const { return command_; }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  RuleCaptioner fallback_;
};

/// Fresh stamp for `box` in `frame` with a regenerated description.
ObjectStamp commit_update(const ObjectStamp& state, const Image& frame, const Box& box,
                          const std::string& category, std::size_t frame_index,
                          const Captioner& captioner);

/// Stamp taken from the first-frame annotation.
ObjectStamp initial_stamp(const Image& frame0, const Box& gt_box, std::string description,
                          std::string category);

}  // namespace dutrack
