// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dutrack/tensor.hpp"

namespace dutrack {

/// Multi-head self-attention weights. Head h owns feature columns
/// [h·head_dim, (h+1)·head_dim) of the query/key/value projections.
struct MhsaParams {
  std::size_t num_heads = 1;
  Linear query;
  Linear key;  // bias kept at zero by the model: it shifts each logit row by a constant
  Linear value;
  Linear output;

  MhsaParams() = default;
  MhsaParams(std::size_t model_dim, std::size_t heads);

  std::size_t model_dim() const { return query.in_features(); }
  std::size_t head_dim() const { return model_dim() / num_heads; }

  /// Throws ShapeError unless num_heads · head_dim = D and all projections are D×D.
  void validate() const;
};

struct MhsaResult {
  Matrix feat;              // N×D, output-projected head concatenation
  std::vector<Matrix> attn;  // num_heads × (N×N), softmax(QKᵀ/√d) per head
};

struct MhsaCache {
  Matrix input;
  Matrix q;
  Matrix k;
  Matrix v;
  Matrix concat;
  std::vector<Matrix> probs;
};

MhsaResult mhsa_forward(const Matrix& x, const MhsaParams& params, MhsaCache* cache = nullptr);

/// Backward pass. `dattn`, when non-null, is an extra upstream gradient on the
/// per-head attention probabilities. Parameter gradients accumulate into `grad`.
Matrix mhsa_backward(const MhsaParams& params, const MhsaCache& cache, const Matrix& dfeat,
                     const std::vector<Matrix>* dattn, MhsaParams& grad);

Matrix slice_cols(const Matrix& m, std::size_t start, std::size_t count);
void assign_cols(Matrix& dst, std::size_t start, const Matrix& src);
Matrix slice_rows(const Matrix& m, std::size_t start, std::size_t count);

}  // namespace dutrack
