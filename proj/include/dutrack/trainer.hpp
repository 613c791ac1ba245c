// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dutrack/head.hpp"
#include "dutrack/model.hpp"
#include "dutrack/synth.hpp"

namespace dutrack {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One decoupled-weight-decay Adam update at 1-based `step`:
///   p ← p·(1 − lr·wd);  p ← p − lr·m̂/(√v̂ + eps).
/// Moments are created on first use. A non-finite gradient throws NumericError
/// before anything is modified.
void adamw_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                AdamMoments& moments, const AdamWConfig& config, std::size_t step);

struct LossWeights {
  double center = 1.0;     // BCE on the score map
  double box = 1.0;        // L1 on offset and size at the target cell
  double attention = 0.0;  // -log of the [CLS] attention mass on target cells
};

struct TrackingLoss {
  double total = 0.0;
  double bce = 0.0;
  double l1 = 0.0;
  std::size_t target_cell = 0;
  HeadGrad grad;
};

/// Target cell = the cell containing the box center; offset target = center
/// position inside that cell in stride units; size target = extents / crop side.
/// Throws std::invalid_argument when the box center is outside the crop.
TrackingLoss tracking_loss(const HeadOutputs& h, const Box& gt_crop, const LossWeights& weights = {});

/// Search cells whose pixel-block center lies inside `gt_crop`, plus the center cell.
std::vector<std::size_t> target_cells(const Box& gt_crop, std::size_t grid);

/// One training example, already cropped.
struct TrainSample {
  std::vector<int> lang_ids;
  Image template_crop;
  std::vector<Image> dynamic;  // 16×16 patches
  Image search_crop;
  Box target;  // search-crop coordinates
};

struct SampleLoss {
  double total = 0.0;
  double bce = 0.0;
  double l1 = 0.0;
  double attention = 0.0;
};

/// Forward pass and loss for one sample; when `grad` is non-null the parameter
/// gradients are accumulated into it (same shapes as `model`).
SampleLoss sample_loss(const Model& model, const TrainSample& sample, const LossWeights& weights,
                       Model* grad);

enum class Stage { VisionOnly, VisionLanguage };

struct TrainConfig {
  AdamWConfig optimizer;
  LossWeights loss{1.0, 1.0, 0.1};
  std::size_t stage1_epochs = 50;
  std::size_t stage2_epochs = 20;
  std::size_t samples_per_epoch = 200;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::size_t max_gap = 20;
  double template_factor = 2.0;
  double search_factor = 4.0;
  double center_jitter = 0.6;  // fraction of sqrt(w·h)
  double scale_jitter = 0.25;  // log-uniform half-range
  std::size_t max_topk = 3;
  double empty_language_prob = 0.25;
  double first_template_prob = 0.5;
  // Stage 2 only: when the target's mean colour has moved at least
  // decoy_min_shift from the template frame, paste a decoy of the template
  // colour into the search crop with this probability.
  double decoy_prob = 0.0;
  double decoy_min_shift = 40.0;

  void validate() const;
};

/// Draws one sample. Stage 1: empty language, no dynamic patches. Stage 2:
/// language describing the previous frame, 0..max_topk dynamic patches taken
/// from the previous frame where the target covers the most area, and
/// optionally a template-coloured decoy (see TrainConfig::decoy_prob).
TrainSample draw_sample(const std::vector<Sequence>& data, const TrainConfig& config, Stage stage,
                        const Model& model, const Vocabulary& vocab, std::mt19937_64& rng);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based, counted across stages
  double loss = 0.0;      // mean sample loss
};

struct TrainState {
  AdamMoments moments;
  std::size_t step = 0;
  std::size_t rejected_steps = 0;
  std::vector<EpochStats> curve;
};

using EpochCallback = std::function<void(Stage, const EpochStats&)>;

/// Runs `epochs` epochs of the given stage, continuing `state`.
void train_stage(const std::vector<Sequence>& data, const TrainConfig& config, Stage stage,
                 std::size_t epochs, Model& model, const Vocabulary& vocab, TrainState& state,
                 const EpochCallback& on_epoch = {});

/// Vocabulary covering the description grammar for every category plus all words
/// of the dataset descriptions, in first-seen order.
Vocabulary build_vocabulary(const std::vector<Sequence>& data);

/// `epoch,loss` with a header line.
void write_loss_csv(const std::vector<EpochStats>& curve, const std::filesystem::path& path);

}  // namespace dutrack
