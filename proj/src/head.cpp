// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dutrack {

namespace {

Matrix squash(Matrix m) {
  for (double& v : m.data()) v = sigmoid(v);
  return m;
}

// dL/dz for z = logit, given dL/dp and p = σ(z).
Matrix unsquash_grad(const Matrix& p, const Matrix& dp) {
  Matrix dz(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = dp[i] * p[i] * (1.0 - p[i]);
  return dz;
}

}  // namespace

HeadOutputs head_forward(const Matrix& search_features, const HeadParams& params) {
  const std::size_t n = search_features.rows();
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (n == 0 || side * side != n) {
    throw ShapeError("head_forward: " + std::to_string(n) + " search tokens is not a square grid");
  }
  HeadOutputs out;
  out.grid = side;
  out.score = squash(params.score.forward(search_features));
  out.offset = squash(params.offset.forward(search_features));
  out.size = squash(params.size.forward(search_features));
  return out;
}

Matrix head_backward(const Matrix& search_features, const HeadParams& params, const HeadOutputs& out,
                     const HeadGrad& g, HeadParams& grad) {
  Matrix dx = linear_backward(params.score, search_features, unsquash_grad(out.score, g.dscore),
                              grad.score);
  add_inplace(dx, linear_backward(params.offset, search_features,
                                  unsquash_grad(out.offset, g.doffset), grad.offset));
  add_inplace(dx, linear_backward(params.size, search_features, unsquash_grad(out.size, g.dsize),
                                  grad.size));
  return dx;
}

std::vector<double> cosine_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                                static_cast<double>(n + 1));
  }
  return w;
}

std::size_t penalized_argmax(const HeadOutputs& h, double window_weight) {
  const auto win = cosine_window(h.grid);
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t r = 0; r < h.grid; ++r) {
    for (std::size_t c = 0; c < h.grid; ++c) {
      const std::size_t i = r * h.grid + c;
      const double v = (1.0 - window_weight) * h.score[i] + window_weight * win[r] * win[c];
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
  }
  return best;
}

Box decode_box(const HeadOutputs& h, double window_weight) {
  if (!(window_weight >= 0.0 && window_weight < 1.0)) {
    throw std::invalid_argument("decode_box: window weight must be in [0, 1)");
  }
  const std::size_t cell = penalized_argmax(h, window_weight);
  const double crop = h.crop_size();
  const double cx = 16.0 * static_cast<double>(cell % h.grid) + 16.0 * h.offset(cell, 0);
  const double cy = 16.0 * static_cast<double>(cell / h.grid) + 16.0 * h.offset(cell, 1);
  const double w = h.size(cell, 0) * crop;
  const double hh = h.size(cell, 1) * crop;

  const double x0 = std::clamp(cx - w / 2.0, 0.0, crop - 1.0);
  const double y0 = std::clamp(cy - hh / 2.0, 0.0, crop - 1.0);
  const double x1 = std::clamp(cx + w / 2.0, x0 + 1.0, crop);
  const double y1 = std::clamp(cy + hh / 2.0, y0 + 1.0, crop);
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace dutrack
