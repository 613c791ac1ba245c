// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "dutrack/attention.hpp"
#include "dutrack/tokenize.hpp"

namespace dutrack {

/// One unified vision-language block:
///   feat, attn = MHSA(x)
///   f   = x + LN1(λ1·feat)
///   out = f + LN2(λ2·MLP(f))        MLP: D → 4D → D with GELU
struct EncoderBlockParams {
  MhsaParams attn;
  Linear fc1;
  Linear fc2;
  LayerNorm ln1;
  LayerNorm ln2;
  Matrix lambda1{1, 1, 1.0};
  Matrix lambda2{1, 1, 1.0};

  EncoderBlockParams() = default;
  EncoderBlockParams(std::size_t dim, std::size_t heads);
};

/// Per-head attention probabilities of one block over the full token sequence.
struct AttentionRecord {
  std::vector<Matrix> probs;  // num_heads × (N×N)
  SegmentLayout layout;
};

struct EncodeOutput {
  Matrix lang;
  Matrix tmpl;
  Matrix search;
  AttentionRecord final_attention;
};

/// Stacks [lang; tmpl; search] row-wise and records the segment boundaries.
std::pair<Matrix, SegmentLayout> concat_layout(const Matrix& lang, const Matrix& tmpl,
                                               const Matrix& search);

struct BlockTrace {
  MhsaCache mhsa;
  Matrix feat;
  LayerNormCache ln1;
  Matrix f;
  Matrix pre_act;
  Matrix act;
  Matrix mlp;
  LayerNormCache ln2;
};

struct EncodeTrace {
  std::vector<BlockTrace> blocks;
};

/// Runs one block; `trace` is filled when non-null.
Matrix encoder_block_forward(const Matrix& x, const EncoderBlockParams& p,
                             std::vector<Matrix>* attn_out, BlockTrace* trace);

Matrix encoder_block_backward(const EncoderBlockParams& p, const BlockTrace& trace,
                              const Matrix& dout, const std::vector<Matrix>* dattn,
                              EncoderBlockParams& grad);

/// Applies every block in order and keeps the last block's attention.
/// Throws NumericError naming the block if an intermediate becomes non-finite.
EncodeOutput encode(const Matrix& tokens, const SegmentLayout& layout,
                    const std::vector<EncoderBlockParams>& blocks, EncodeTrace* trace = nullptr);

/// Backpropagates gradients on the encoder output (N×D) and, optionally, on
/// the final block's attention probabilities. Returns dL/dtokens.
Matrix encode_backward(const std::vector<EncoderBlockParams>& blocks, const EncodeTrace& trace,
                       const Matrix& doutput, const std::vector<Matrix>* dfinal_attention,
                       std::vector<EncoderBlockParams>& grads);

}  // namespace dutrack
