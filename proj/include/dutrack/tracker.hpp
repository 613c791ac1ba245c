// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dutrack/dlum.hpp"
#include "dutrack/dtcm.hpp"
#include "dutrack/model.hpp"

namespace dutrack {

/// frame = origin + crop · scale, per axis.
struct CropMapping {
  double x0 = 0.0;
  double y0 = 0.0;
  double scale = 1.0;

  Box to_frame(const Box& b) const { return {x0 + b.x * scale, y0 + b.y * scale, b.w * scale, b.h * scale}; }
  Box to_crop(const Box& b) const {
    return {(b.x - x0) / scale, (b.y - y0) / scale, b.w / scale, b.h / scale};
  }
};

struct CropResult {
  Image crop;
  CropMapping mapping;
};

/// Square region of side factor·√(w·h) centred on `prev`, bilinearly resampled to
/// out_size × out_size. Pixels outside the frame take the frame's mean colour.
CropResult crop_search_region(const Image& frame, const Box& prev, double factor, int out_size);

struct TrackerConfig {
  std::size_t topk = 3;
  double template_factor = 2.0;
  double search_factor = 4.0;
  double window_weight = 0.3;
  UpdatePolicy policy;
  bool corner_displacement = false;
  /// Refresh the dynamic template only on frames where the language update fires.
  bool gate_dtcm = false;
  /// When false the language segment stays [CLS] + [PAD] and is never regenerated.
  bool use_language = true;
};

struct TrackerState {
  std::vector<int> lang_ids;
  Matrix lang_tokens;
  Matrix initial_template;
  DynamicTemplate dynamic;
  ObjectStamp stamp;
  Box previous;
  std::size_t frame_index = 0;
  std::string category;
};

struct FrameDiagnostics {
  std::size_t frame_index = 0;
  SegmentLayout layout;
  Box box;
  UpdateDeltas deltas;
  bool updated = false;
  std::string description;
  DynamicTemplate captured;
};

/// Single-sequence tracker. The model is shared read-only; the state is owned.
class Tracker {
 public:
  Tracker(std::shared_ptr<const Model> model, Vocabulary vocab, TrackerConfig config,
          std::shared_ptr<const Captioner> captioner = nullptr);

  /// An empty description is replaced by the captioner's description of frame 0.
  void init(const Image& frame0, const Box& gt_box, std::string description, std::string category);

  /// Crop, encode, decode, capture, update. Returns the box in frame coordinates.
  Box track(const Image& frame, FrameDiagnostics* diagnostics = nullptr);

  const TrackerState& state() const { return state_; }
  const TrackerConfig& config() const { return config_; }

 private:
  void set_language(const std::string& description);

  std::shared_ptr<const Model> model_;
  Vocabulary vocab_;
  TrackerConfig config_;
  std::shared_ptr<const Captioner> captioner_;
  TrackerState state_;
  bool initialized_ = false;
};

}  // namespace dutrack
