// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/attention.hpp"

#include <cmath>

namespace dutrack {

MhsaParams::MhsaParams(std::size_t model_dim, std::size_t heads)
    : num_heads(heads),
      query(model_dim, model_dim),
      key(model_dim, model_dim),
      value(model_dim, model_dim),
      output(model_dim, model_dim) {}

void MhsaParams::validate() const {
  const std::size_t d = model_dim();
  if (num_heads == 0 || d == 0 || d % num_heads != 0) {
    throw ShapeError("mhsa: model width " + std::to_string(d) + " not divisible into " +
                     std::to_string(num_heads) + " heads");
  }
  for (const Linear* l : {&query, &key, &value, &output}) {
    if (l->weight.rows() != d || l->weight.cols() != d || l->bias.cols() != d) {
      throw ShapeError("mhsa: projection " + shape_string(l->weight) + " for width " +
                       std::to_string(d));
    }
  }
}

Matrix slice_cols(const Matrix& m, std::size_t start, std::size_t count) {
  if (start + count > m.cols()) throw ShapeError("slice_cols out of range");
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, start + c);
  return out;
}

void assign_cols(Matrix& dst, std::size_t start, const Matrix& src) {
  if (src.rows() != dst.rows() || start + src.cols() > dst.cols()) {
    throw ShapeError("assign_cols out of range");
  }
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, start + c) = src(r, c);
}

Matrix slice_rows(const Matrix& m, std::size_t start, std::size_t count) {
  if (start + count > m.rows()) throw ShapeError("slice_rows out of range");
  Matrix out(count, m.cols());
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(start + r, c);
  return out;
}

MhsaResult mhsa_forward(const Matrix& x, const MhsaParams& params, MhsaCache* cache) {
  params.validate();
  if (x.cols() != params.model_dim()) {
    throw ShapeError("mhsa: input " + shape_string(x) + " for width " +
                     std::to_string(params.model_dim()));
  }
  if (x.rows() == 0) throw ShapeError("mhsa: no tokens");

  const std::size_t hd = params.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Matrix q = params.query.forward(x);
  Matrix k = params.key.forward(x);
  Matrix v = params.value.forward(x);
  Matrix concat(x.rows(), params.model_dim());

  MhsaResult result;
  result.attn.reserve(params.num_heads);
  for (std::size_t h = 0; h < params.num_heads; ++h) {
    const Matrix qh = slice_cols(q, h * hd, hd);
    const Matrix kh = slice_cols(k, h * hd, hd);
    const Matrix vh = slice_cols(v, h * hd, hd);
    Matrix logits = matmul_nt(qh, kh);
    scale_inplace(logits, scale);
    Matrix probs = softmax_rows(logits);
    assign_cols(concat, h * hd, matmul(probs, vh));
    result.attn.push_back(std::move(probs));
  }
  result.feat = params.output.forward(concat);

  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->probs = result.attn;
  }
  return result;
}

Matrix mhsa_backward(const MhsaParams& params, const MhsaCache& cache, const Matrix& dfeat,
                     const std::vector<Matrix>* dattn, MhsaParams& grad) {
  const std::size_t hd = params.head_dim();
  const std::size_t n = cache.input.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  const Matrix dconcat = linear_backward(params.output, cache.concat, dfeat, grad.output);
  Matrix dq(n, params.model_dim());
  Matrix dk(n, params.model_dim());
  Matrix dv(n, params.model_dim());
  for (std::size_t h = 0; h < params.num_heads; ++h) {
    const Matrix qh = slice_cols(cache.q, h * hd, hd);
    const Matrix kh = slice_cols(cache.k, h * hd, hd);
    const Matrix vh = slice_cols(cache.v, h * hd, hd);
    const Matrix doh = slice_cols(dconcat, h * hd, hd);
    const Matrix& probs = cache.probs[h];

    Matrix dprobs = matmul_nt(doh, vh);
    if (dattn) add_inplace(dprobs, (*dattn)[h]);
    assign_cols(dv, h * hd, matmul_tn(probs, doh));
    Matrix dlogits = softmax_rows_backward(probs, dprobs);
    scale_inplace(dlogits, scale);
    assign_cols(dq, h * hd, matmul(dlogits, kh));
    assign_cols(dk, h * hd, matmul_tn(dlogits, qh));
  }

  Matrix dx = linear_backward(params.query, cache.input, dq, grad.query);
  add_inplace(dx, linear_backward(params.key, cache.input, dk, grad.key));
  add_inplace(dx, linear_backward(params.value, cache.input, dv, grad.value));
  return dx;
}

}  // namespace dutrack
