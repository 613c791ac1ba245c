// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dutrack/image.hpp"
#include "dutrack/tensor.hpp"

namespace dutrack {

/// Center-score / offset / size branches, each a linear map from the search features.
struct HeadParams {
  Linear score;   // D → 1
  Linear offset;  // D → 2
  Linear size;    // D → 2

  HeadParams() = default;
  explicit HeadParams(std::size_t dim) : score(dim, 1), offset(dim, 2), size(dim, 2) {}
};

/// Maps over the search token grid, row-major. All three pass through a logistic.
struct HeadOutputs {
  std::size_t grid = 0;  // tokens per side
  Matrix score;          // N_S × 1, in (0, 1)
  Matrix offset;         // N_S × 2, sub-patch center offset in stride units
  Matrix size;           // N_S × 2, extents as a fraction of the crop side

  int crop_size() const { return static_cast<int>(grid) * 16; }
};

/// Rejects a non-square search grid.
HeadOutputs head_forward(const Matrix& search_features, const HeadParams& params);

struct HeadGrad {
  Matrix dscore;   // dL/d(score probability)
  Matrix doffset;
  Matrix dsize;
};

/// Backprop from gradients on the squashed head outputs to the search features.
Matrix head_backward(const Matrix& search_features, const HeadParams& params, const HeadOutputs& out,
                     const HeadGrad& g, HeadParams& grad);

/// 1-D raised-cosine window of length n (peak in the middle, zero-free).
std::vector<double> cosine_window(std::size_t n);

/// Arg-max cell of (1−w)·score + w·window⊗window (ties to the smaller index).
std::size_t penalized_argmax(const HeadOutputs& h, double window_weight);

/// Box in crop pixels decoded at the penalized arg-max cell, clamped to the crop.
Box decode_box(const HeadOutputs& h, double window_weight);

}  // namespace dutrack
