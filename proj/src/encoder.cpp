// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/encoder.hpp"

namespace dutrack {

EncoderBlockParams::EncoderBlockParams(std::size_t dim, std::size_t heads)
    : attn(dim, heads), fc1(dim, 4 * dim), fc2(4 * dim, dim), ln1(dim), ln2(dim) {}

std::pair<Matrix, SegmentLayout> concat_layout(const Matrix& lang, const Matrix& tmpl,
                                               const Matrix& search) {
  const std::size_t d = lang.cols();
  if (tmpl.cols() != d || search.cols() != d) {
    throw ShapeError("concat_layout: widths " + std::to_string(lang.cols()) + ", " +
                     std::to_string(tmpl.cols()) + ", " + std::to_string(search.cols()));
  }
  SegmentLayout layout{lang.rows(), tmpl.rows(), search.rows(), d};
  Matrix out(layout.total(), d);
  std::size_t r = 0;
  for (const Matrix* seg : {&lang, &tmpl, &search}) {
    for (std::size_t i = 0; i < seg->rows(); ++i, ++r) {
      auto src = seg->row(i);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
  }
  return {std::move(out), layout};
}

namespace {

Matrix scaled(const Matrix& m, double s) {
  Matrix out = m;
  scale_inplace(out, s);
  return out;
}

double dot_all(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Matrix encoder_block_forward(const Matrix& x, const EncoderBlockParams& p,
                             std::vector<Matrix>* attn_out, BlockTrace* trace) {
  MhsaResult mh = mhsa_forward(x, p.attn, trace ? &trace->mhsa : nullptr);
  Matrix f = x;
  add_inplace(f, layer_norm_rows(scaled(mh.feat, p.lambda1[0]), p.ln1, trace ? &trace->ln1 : nullptr));

  Matrix pre_act = p.fc1.forward(f);
  Matrix act(pre_act.rows(), pre_act.cols());
  for (std::size_t i = 0; i < pre_act.size(); ++i) act[i] = gelu(pre_act[i]);
  Matrix mlp = p.fc2.forward(act);

  Matrix out = f;
  add_inplace(out, layer_norm_rows(scaled(mlp, p.lambda2[0]), p.ln2, trace ? &trace->ln2 : nullptr));

  if (attn_out) *attn_out = std::move(mh.attn);
  if (trace) {
    trace->feat = std::move(mh.feat);
    trace->f = std::move(f);
    trace->pre_act = std::move(pre_act);
    trace->act = std::move(act);
    trace->mlp = std::move(mlp);
  }
  return out;
}

Matrix encoder_block_backward(const EncoderBlockParams& p, const BlockTrace& trace,
                              const Matrix& dout, const std::vector<Matrix>* dattn,
                              EncoderBlockParams& grad) {
  // MLP branch.
  const Matrix dscaled_mlp = layer_norm_rows_backward(p.ln2, trace.ln2, dout, grad.ln2);
  grad.lambda2[0] += dot_all(dscaled_mlp, trace.mlp);
  const Matrix dmlp = scaled(dscaled_mlp, p.lambda2[0]);
  Matrix dpre = linear_backward(p.fc2, trace.act, dmlp, grad.fc2);
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= gelu_derivative(trace.pre_act[i]);
  Matrix df = dout;
  add_inplace(df, linear_backward(p.fc1, trace.f, dpre, grad.fc1));

  // Attention branch.
  const Matrix dscaled_feat = layer_norm_rows_backward(p.ln1, trace.ln1, df, grad.ln1);
  grad.lambda1[0] += dot_all(dscaled_feat, trace.feat);
  const Matrix dfeat = scaled(dscaled_feat, p.lambda1[0]);
  Matrix dx = df;
  add_inplace(dx, mhsa_backward(p.attn, trace.mhsa, dfeat, dattn, grad.attn));
  return dx;
}

EncodeOutput encode(const Matrix& tokens, const SegmentLayout& layout,
                    const std::vector<EncoderBlockParams>& blocks, EncodeTrace* trace) {
  if (blocks.empty()) throw std::invalid_argument("encode: no encoder blocks");
  if (tokens.rows() != layout.total() || tokens.cols() != layout.dim) {
    throw ShapeError("encode: tokens " + shape_string(tokens) + " do not match layout of " +
                     std::to_string(layout.total()) + " rows");
  }
  if (!tokens.all_finite()) throw NumericError("encode: non-finite input tokens");
  if (trace) trace->blocks.assign(blocks.size(), {});

  Matrix x = tokens;
  std::vector<Matrix> attn;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    x = encoder_block_forward(x, blocks[b], &attn, trace ? &trace->blocks[b] : nullptr);
    if (!x.all_finite()) {
      throw NumericError("encode: non-finite activations after block " + std::to_string(b));
    }
  }

  EncodeOutput out;
  out.lang = slice_rows(x, 0, layout.n_lang);
  out.tmpl = slice_rows(x, layout.tmpl_begin(), layout.n_tmpl);
  out.search = slice_rows(x, layout.search_begin(), layout.n_search);
  out.final_attention = {std::move(attn), layout};
  return out;
}

Matrix encode_backward(const std::vector<EncoderBlockParams>& blocks, const EncodeTrace& trace,
                       const Matrix& doutput, const std::vector<Matrix>* dfinal_attention,
                       std::vector<EncoderBlockParams>& grads) {
  Matrix d = doutput;
  for (std::size_t b = blocks.size(); b-- > 0;) {
    const std::vector<Matrix>* dattn = (b + 1 == blocks.size()) ? dfinal_attention : nullptr;
    d = encoder_block_backward(blocks[b], trace.blocks[b], d, dattn, grads[b]);
  }
  return d;
}

}  // namespace dutrack
