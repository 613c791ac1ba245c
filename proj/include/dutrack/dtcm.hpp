// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dutrack/encoder.hpp"

namespace dutrack {

/// Head-averaged attention of the [CLS] token (language row 0) on each search token.
struct Cls2SearchScores {
  std::vector<double> scores;
  SegmentLayout layout;
};

Cls2SearchScores cls_to_search_attention(const AttentionRecord& attn);

/// Indices of the k largest scores, descending; equal scores keep the smaller index first.
std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k);

/// Pixel block of search token `idx` for a crop `search_w` × `search_h` pixels.
Box index_to_patch_box(std::size_t idx, int search_w, int search_h);
inline Box index_to_patch_box(std::size_t idx, int search_w) {
  return index_to_patch_box(idx, search_w, search_w);
}

struct CapturedPatch {
  std::size_t index = 0;
  Box box;
  double score = 0.0;
};

struct DynamicTemplate {
  std::vector<CapturedPatch> patches;
  std::vector<Image> pixels;  // 16×16 crops, one per patch
  Matrix tokens;              // k × D, template positions first_position + i
  std::size_t source_frame = 0;

  std::size_t size() const { return patches.size(); }
};

/// Crops the k most-attended 16×16 patches of the search crop and embeds each
/// as a single template token at template positions [first_position, first_position + k).
DynamicTemplate capture_dynamic_template(const Image& search_crop, const Cls2SearchScores& scores,
                                         std::size_t k, const PatchEmbedParams& embed,
                                         std::size_t first_position, std::size_t frame_index = 0);

/// Sidecar lines `frame_idx,idx,x,y,w,h,score`, one per captured patch.
std::string format_capture_lines(std::size_t frame_index, const DynamicTemplate& dyn);

}  // namespace dutrack
