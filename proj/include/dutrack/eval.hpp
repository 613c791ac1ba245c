// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dutrack/image.hpp"

namespace dutrack {

struct Metrics {
  double auc = 0.0;
  double precision = 0.0;
  double norm_precision = 0.0;
};

double iou(const Box& a, const Box& b);

/// 21 IoU thresholds 0.00, 0.05, ..., 1.00. `inclusive` counts iou >= t instead of iou > t.
std::vector<double> success_thresholds();
double success_auc(const std::vector<Box>& pred, const std::vector<Box>& gt, bool inclusive = false);

/// Fraction of frames whose center error is at most `radius` pixels.
double precision(const std::vector<Box>& pred, const std::vector<Box>& gt, double radius = 20.0);

/// 21 thresholds 0, 0.025, ..., 0.5 on center error / sqrt(gt.w * gt.h).
std::vector<double> norm_precision_thresholds();
double norm_precision(const std::vector<Box>& pred, const std::vector<Box>& gt);

Metrics evaluate(const std::vector<Box>& pred, const std::vector<Box>& gt, bool inclusive = false);

struct SequenceMetrics {
  std::string sequence;
  Metrics metrics;
};

/// Unweighted mean over sequences.
Metrics aggregate(const std::vector<SequenceMetrics>& rows);

/// `sequence,auc,precision,norm_precision` rows then an `all` row with the mean.
std::string metrics_csv(const std::vector<SequenceMetrics>& rows);

/// Scores `<results>/<name>.txt` against every sequence under `data_root`.
std::vector<SequenceMetrics> evaluate_results(const std::filesystem::path& data_root,
                                              const std::filesystem::path& results_dir,
                                              bool inclusive = false);

}  // namespace dutrack
