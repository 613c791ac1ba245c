// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dutrack {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

namespace {

// out[i, :] += Σ_p a[i, p] · b[p, :], p ascending. The inner loop runs over
// contiguous columns so it vectorizes without reordering any per-element sum.
void gemm_accumulate(const double* a, std::size_t a_row_stride, std::size_t a_col_stride,
                     const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * a_row_stride + p * a_col_stride];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a) + " x " + shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  gemm_accumulate(a.data().data(), a.cols(), 1, b.data().data(), out.data().data(), a.rows(),
                  a.cols(), b.cols());
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a) + " x " + shape_string(b) + "^T");
  }
  return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_string(a) + "^T x " + shape_string(b));
  }
  Matrix out(a.cols(), b.cols());
  gemm_accumulate(a.data().data(), 1, a.cols(), b.data().data(), out.data().data(), a.cols(),
                  a.rows(), b.cols());
  return out;
}

void add_inplace(Matrix& dst, const Matrix& src) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols()) {
    throw ShapeError("add: " + shape_string(dst) + " + " + shape_string(src));
  }
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void scale_inplace(Matrix& m, double s) {
  for (double& v : m.data()) v *= s;
}

void add_row_broadcast(Matrix& m, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw ShapeError("row broadcast: " + shape_string(m) + " + " + shape_string(row));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto dst = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] += row[c];
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += src[c];
  }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  if (!m.all_finite()) throw NumericError("softmax_rows: non-finite input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    auto dst = out.row(r);
    if (src.empty()) continue;
    const double mx = *std::max_element(src.begin(), src.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = std::exp(src[c] - mx);
      sum += dst[c];
    }
    const double inv = 1.0 / sum;
    for (double& v : dst) v *= inv;
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  if (y.rows() != dy.rows() || y.cols() != dy.cols()) {
    throw ShapeError("softmax backward: " + shape_string(y) + " vs " + shape_string(dy));
  }
  Matrix dx(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto gr = dy.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
    auto out = dx.row(r);
    for (std::size_t c = 0; c < yr.size(); ++c) out[c] = yr[c] * (gr[c] - dot);
  }
  return dx;
}

namespace {

struct Moments {
  double mean;
  double inv_std;
};

Moments row_moments(std::span<const double> x, double eps) {
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / static_cast<double>(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(x.size());
  return {mean, 1.0 / std::sqrt(var + eps)};
}

}  // namespace

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  if (x.empty()) throw ShapeError("layer_norm: empty vector");
  if (gain.size() != x.size() || bias.size() != x.size()) {
    throw ShapeError("layer_norm: gain/bias width does not match input");
  }
  const Moments mo = row_moments(x, eps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = gain[i] * ((x[i] - mo.mean) * mo.inv_std) + bias[i];
  }
  return out;
}

Matrix layer_norm_rows(const Matrix& x, const LayerNorm& ln, LayerNormCache* cache) {
  if (x.cols() == 0) throw ShapeError("layer_norm_rows: zero-width rows");
  if (ln.gain.cols() != x.cols()) {
    throw ShapeError("layer_norm_rows: " + shape_string(x) + " with gain " + shape_string(ln.gain));
  }
  Matrix out(x.rows(), x.cols());
  if (cache) {
    cache->normalized = Matrix(x.rows(), x.cols());
    cache->inv_std.assign(x.rows(), 0.0);
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    const Moments mo = row_moments(src, ln.eps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) {
      const double xhat = (src[c] - mo.mean) * mo.inv_std;
      dst[c] = ln.gain[c] * xhat + ln.bias[c];
      if (cache) cache->normalized(r, c) = xhat;
    }
    if (cache) cache->inv_std[r] = mo.inv_std;
  }
  return out;
}

Matrix layer_norm_rows_backward(const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy,
                                LayerNorm& grad) {
  const std::size_t n = dy.rows();
  const std::size_t d = dy.cols();
  Matrix dx(n, d);
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < n; ++r) {
    auto g = dy.row(r);
    auto xhat = cache.normalized.row(r);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      grad.gain[c] += g[c] * xhat[c];
      grad.bias[c] += g[c];
      dxhat[c] = g[c] * ln.gain[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat[c];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    auto out = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = cache.inv_std[r] * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
    }
  }
  return dx;
}

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi * kInvSqrt2);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols() != weight.rows()) {
    throw ShapeError("linear: input " + shape_string(x) + " with weight " + shape_string(weight));
  }
  Matrix y = matmul(x, weight);
  add_row_broadcast(y, bias);
  return y;
}

Matrix linear_backward(const Linear& l, const Matrix& x, const Matrix& dy, Linear& grad) {
  add_inplace(grad.weight, matmul_tn(x, dy));
  add_inplace(grad.bias, column_sums(dy));
  return matmul_nt(dy, l.weight);
}

}  // namespace dutrack
