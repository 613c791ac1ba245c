// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dutrack/synth.hpp"

namespace dutrack {

namespace {

void check_lengths(const std::vector<Box>& pred, const std::vector<Box>& gt, const char* what) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(pred.size()) +
                                " predictions for " + std::to_string(gt.size()) + " ground-truth boxes");
  }
  if (gt.empty()) throw std::invalid_argument(std::string(what) + ": empty sequence");
}

double center_error(const Box& a, const Box& b) { return std::hypot(a.cx() - b.cx(), a.cy() - b.cy()); }

}  // namespace

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  // (x + w) - x can round above w, so identical boxes may land a hair over 1.
  return std::min(1.0, inter / (a.area() + b.area() - inter));
}

std::vector<double> success_thresholds() {
  std::vector<double> t(21);
  for (int i = 0; i <= 20; ++i) t[i] = i / 20.0;
  return t;
}

std::vector<double> norm_precision_thresholds() {
  std::vector<double> t(21);
  for (int i = 0; i <= 20; ++i) t[i] = i / 40.0;
  return t;
}

double success_auc(const std::vector<Box>& pred, const std::vector<Box>& gt, bool inclusive) {
  check_lengths(pred, gt, "success_auc");
  std::vector<double> overlaps(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) overlaps[i] = iou(pred[i], gt[i]);
  const auto thresholds = success_thresholds();
  double sum = 0.0;
  for (double t : thresholds) {
    std::size_t hits = 0;
    for (double o : overlaps) hits += inclusive ? (o >= t) : (o > t);
    sum += static_cast<double>(hits) / static_cast<double>(gt.size());
  }
  return sum / static_cast<double>(thresholds.size());
}

double precision(const std::vector<Box>& pred, const std::vector<Box>& gt, double radius) {
  check_lengths(pred, gt, "precision");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) hits += center_error(pred[i], gt[i]) <= radius;
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

double norm_precision(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  check_lengths(pred, gt, "norm_precision");
  std::vector<double> dist(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    dist[i] = center_error(pred[i], gt[i]) / std::sqrt(gt[i].w * gt[i].h);
  }
  const auto thresholds = norm_precision_thresholds();
  double sum = 0.0;
  for (double t : thresholds) {
    std::size_t hits = 0;
    for (double d : dist) hits += d <= t;
    sum += static_cast<double>(hits) / static_cast<double>(gt.size());
  }
  return sum / static_cast<double>(thresholds.size());
}

Metrics evaluate(const std::vector<Box>& pred, const std::vector<Box>& gt, bool inclusive) {
  return {success_auc(pred, gt, inclusive), precision(pred, gt), norm_precision(pred, gt)};
}

Metrics aggregate(const std::vector<SequenceMetrics>& rows) {
  Metrics m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.auc += r.metrics.auc;
    m.precision += r.metrics.precision;
    m.norm_precision += r.metrics.norm_precision;
  }
  const double n = static_cast<double>(rows.size());
  m.auc /= n;
  m.precision /= n;
  m.norm_precision /= n;
  return m;
}

std::string metrics_csv(const std::vector<SequenceMetrics>& rows) {
  std::string out = "sequence,auc,precision,norm_precision\n";
  char buf[96];
  auto line = [&](const std::string& name, const Metrics& m) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", m.auc, m.precision, m.norm_precision);
    out += name + buf;
  };
  for (const auto& r : rows) line(r.sequence, r.metrics);
  line("all", aggregate(rows));
  return out;
}

std::vector<SequenceMetrics> evaluate_results(const std::filesystem::path& data_root,
                                              const std::filesystem::path& results_dir, bool inclusive) {
  if (!std::filesystem::is_directory(results_dir)) {
    throw IoError("results directory not found: " + results_dir.string());
  }
  std::vector<SequenceMetrics> rows;
  for (const auto& dir : list_sequences(data_root)) {
    const std::string name = dir.filename().string();
    const auto result = results_dir / (name + ".txt");
    if (!std::filesystem::exists(result)) throw IoError("missing result file " + result.string());
    const auto gt = read_boxes(dir / "groundtruth.txt");
    const auto pred = read_boxes(result);
    rows.push_back({name, evaluate(pred, gt, inclusive)});
  }
  return rows;
}

}  // namespace dutrack
