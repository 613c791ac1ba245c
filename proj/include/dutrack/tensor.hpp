// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dutrack {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Vectors are 1×n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

Matrix transpose(const Matrix& m);

/// a·b. Accumulates over the inner dimension in increasing index order.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a·bᵀ, same accumulation order as matmul(a, transpose(b)).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ·b, same accumulation order as matmul(transpose(a), b).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

void add_inplace(Matrix& dst, const Matrix& src);
void scale_inplace(Matrix& m, double s);
/// Adds a 1×cols row vector to every row.
void add_row_broadcast(Matrix& m, const Matrix& row);
/// Column sums as a 1×cols matrix.
Matrix column_sums(const Matrix& m);

/// Row-wise softmax with row-max subtraction. Rejects non-finite input.
Matrix softmax_rows(const Matrix& m);
/// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

/// gain ⊙ (x − mean)/√(var + eps) + bias over a single vector.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps);

double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

/// Affine map y = x·weight + bias, weight is in×out.
struct Linear {
  Matrix weight;
  Matrix bias;  // 1×out

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight(in, out), bias(1, out) {}

  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }

  Matrix forward(const Matrix& x) const;
};

/// Accumulates parameter gradients into `grad` (same layout as `l`) and returns dL/dx.
Matrix linear_backward(const Linear& l, const Matrix& x, const Matrix& dy, Linear& grad);

/// Row-wise layer normalization with learnable gain and bias.
struct LayerNorm {
  Matrix gain;  // 1×D
  Matrix bias;  // 1×D
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim) : gain(1, dim, 1.0), bias(1, dim, 0.0) {}
};

struct LayerNormCache {
  Matrix normalized;             // (x − mean)·inv_std, before gain/bias
  std::vector<double> inv_std;   // per row
};

Matrix layer_norm_rows(const Matrix& x, const LayerNorm& ln, LayerNormCache* cache = nullptr);

Matrix layer_norm_rows_backward(const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy,
                                LayerNorm& grad);

}  // namespace dutrack
