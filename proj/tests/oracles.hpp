// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations used by the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dutrack/attention.hpp"
#include "dutrack/dtcm.hpp"
#include "dutrack/encoder.hpp"
#include "dutrack/eval.hpp"
#include "dutrack/gradcheck.hpp"
#include "dutrack/head.hpp"
#include "dutrack/image.hpp"
#include "dutrack/trainer.hpp"

namespace oracle {

using dutrack::Box;
using dutrack::Matrix;

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0);
dutrack::Image random_image(std::mt19937_64& rng, int w, int h);
Box random_box(std::mt19937_64& rng, double extent = 100.0);
/// Every projection, norm and λ drawn at random; the key bias stays zero as in the model.
dutrack::MhsaParams random_mhsa(std::mt19937_64& rng, std::size_t dim, std::size_t heads,
                                double scale = 0.5);
dutrack::EncoderBlockParams random_block(std::mt19937_64& rng, std::size_t dim, std::size_t heads,
                                         double scale = 0.5);

/// Hand-built embedding plus one attention block whose [CLS] logits are
/// proportional to mean patch brightness. Width 8, one head.
struct BrightnessFixture {
  dutrack::PatchEmbedParams embed;
  std::vector<dutrack::EncoderBlockParams> blocks;
  double sharpness = 0.0;
};
BrightnessFixture brightness_fixture(std::size_t search_tokens, double sharpness = 50.0);
/// [CLS] row plus a 1-token template, then the crop's tokens, through the fixture block.
dutrack::Cls2SearchScores brightness_scores(const BrightnessFixture& f, const dutrack::Image& crop);

/// Token whose embedding changes when the single pixel (x, y) of a dark crop is lit;
/// returns the token count if none or several change.
std::size_t token_of_pixel(int x, int y, int size, const dutrack::PatchEmbedParams& p);

/// Width 8, 2 heads, 1 block, 2 language tokens, a 16 px template (1 token) and a
/// 32 px search crop (4 tokens). Biases are randomized; the attention output and
/// fc2 branches are scaled by `branch_scale` so the λ gradients stay well above
/// finite-difference noise (a layer norm of λ·x only sees λ through eps).
dutrack::Model micro_model(std::uint64_t seed, double branch_scale = 0.01);
/// Random crops and language for micro_model with `dynamic` extra template patches.
dutrack::TrainSample micro_sample(std::mt19937_64& rng, std::size_t vocab_size, std::size_t dynamic);
/// Pairs every named parameter of `m` with the same-named array of `grad`.
std::vector<dutrack::ParamSlot> param_slots(dutrack::Model& m, dutrack::Model& grad);

/// Triple loop, k ascending.
Matrix matmul(const Matrix& a, const Matrix& b);
/// exp / sum in long double.
Matrix softmax(const Matrix& m);
/// Scalar loops in long double.
std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<double>& gain,
                               const std::vector<double>& bias, double eps);

/// Dense per-head composition from weight slices, oracle::matmul and softmax_rows.
dutrack::MhsaResult mhsa(const Matrix& x, const dutrack::MhsaParams& p);

/// Block-by-block composition from the pieces above.
dutrack::EncodeOutput encode(const Matrix& tokens, const dutrack::SegmentLayout& layout,
                             const std::vector<dutrack::EncoderBlockParams>& blocks);

/// Per-cell dot products through a logistic.
dutrack::HeadOutputs head(const Matrix& features, const dutrack::HeadParams& p);

/// Exhaustive scan of the penalized score map.
Box decode(const dutrack::HeadOutputs& h, double window_weight);

/// Per-scalar AdamW on flat vectors.
struct ScalarAdamW {
  std::vector<double> m, v;
  void step(std::vector<double>& p, const std::vector<double>& g, double lr, double wd, double b1,
            double b2, double eps, int t);
};

double iou(const Box& a, const Box& b);
double success_auc(const std::vector<Box>& pred, const std::vector<Box>& gt);
double precision(const std::vector<Box>& pred, const std::vector<Box>& gt);
double norm_precision(const std::vector<Box>& pred, const std::vector<Box>& gt);

/// Indices sorted by descending score, ties by index.
std::vector<std::size_t> topk(const std::vector<double>& scores, std::size_t k);

/// Largest |a-b| / max(|b|, floor) over all entries.
double max_rel_diff(const Matrix& a, const Matrix& b, double floor = 1e-300);

}  // namespace oracle
