// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/dtcm.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace dutrack {

Cls2SearchScores cls_to_search_attention(const AttentionRecord& attn) {
  const SegmentLayout& layout = attn.layout;
  if (layout.n_lang < 1) throw ShapeError("cls_to_search_attention: no language tokens");
  if (layout.n_search == 0) throw ShapeError("cls_to_search_attention: empty search segment");
  if (attn.probs.empty()) throw ShapeError("cls_to_search_attention: no attention heads");

  Cls2SearchScores out;
  out.layout = layout;
  out.scores.assign(layout.n_search, 0.0);
  for (const Matrix& head : attn.probs) {
    if (head.rows() != layout.total() || head.cols() != layout.total()) {
      throw ShapeError("cls_to_search_attention: head " + shape_string(head) +
                       " does not match layout");
    }
    for (std::size_t j = 0; j < layout.n_search; ++j) {
      out.scores[j] += head(0, layout.search_begin() + j);
    }
  }
  const double inv = 1.0 / static_cast<double>(attn.probs.size());
  for (double& s : out.scores) s *= inv;
  return out;
}

std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k) {
  if (k > scores.size()) {
    throw std::invalid_argument("topk_indices: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(scores.size()) + " scores");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

Box index_to_patch_box(std::size_t idx, int search_w, int search_h) {
  if (search_w <= 0 || search_h <= 0 || search_w % kPatchStride != 0 ||
      search_h % kPatchStride != 0) {
    throw ShapeError("index_to_patch_box: search size must be a positive multiple of 16");
  }
  const std::size_t cols = static_cast<std::size_t>(search_w / kPatchStride);
  const std::size_t rows = static_cast<std::size_t>(search_h / kPatchStride);
  if (idx >= cols * rows) {
    throw std::out_of_range("index_to_patch_box: token " + std::to_string(idx) + " outside " +
                            std::to_string(cols * rows) + " search tokens");
  }
  return {static_cast<double>(kPatchStride * (idx % cols)),
          static_cast<double>(kPatchStride * (idx / cols)), kPatchStride, kPatchStride};
}

DynamicTemplate capture_dynamic_template(const Image& search_crop, const Cls2SearchScores& scores,
                                         std::size_t k, const PatchEmbedParams& embed,
                                         std::size_t first_position, std::size_t frame_index) {
  const std::size_t grid =
      static_cast<std::size_t>((search_crop.width() / kPatchStride) * (search_crop.height() / kPatchStride));
  if (scores.scores.size() != grid) {
    throw ShapeError("capture_dynamic_template: " + std::to_string(scores.scores.size()) +
                     " scores for a grid of " + std::to_string(grid) + " tokens");
  }
  DynamicTemplate dyn;
  dyn.source_frame = frame_index;
  dyn.tokens = Matrix(k, embed.dim());
  const auto picked = topk_indices(scores.scores, k);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const Box box = index_to_patch_box(picked[i], search_crop.width(), search_crop.height());
    Image patch = search_crop.crop(static_cast<int>(box.x), static_cast<int>(box.y), kPatchStride,
                                   kPatchStride);
    const Matrix token = embed_image(patch, embed, embed.template_pos, first_position + i);
    std::copy(token.row(0).begin(), token.row(0).end(), dyn.tokens.row(i).begin());
    dyn.patches.push_back({picked[i], box, scores.scores[picked[i]]});
    dyn.pixels.push_back(std::move(patch));
  }
  return dyn;
}

std::string format_capture_lines(std::size_t frame_index, const DynamicTemplate& dyn) {
  std::ostringstream os;
  for (const auto& p : dyn.patches) {
    os << frame_index << ',' << p.index << ',' << p.box.x << ',' << p.box.y << ',' << p.box.w
       << ',' << p.box.h << ',' << p.score << '\n';
  }
  return os.str();
}

}  // namespace dutrack
