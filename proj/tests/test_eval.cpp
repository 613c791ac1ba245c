// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "dutrack/eval.hpp"
#include "dutrack/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dutrack;

namespace {

std::vector<Box> jitter(std::mt19937_64& rng, const std::vector<Box>& gt, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  std::vector<Box> out;
  for (const Box& b : gt) out.push_back({b.x + u(rng), b.y + u(rng), std::max(1.0, b.w + u(rng)), std::max(1.0, b.h + u(rng))});
  return out;
}

std::vector<Box> random_track(std::mt19937_64& rng, std::size_t n) {
  std::vector<Box> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_box(rng, 100));
  return out;
}

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 0, 10, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("success examples") {
  const std::vector<Box> gt{{0, 0, 10, 10}, {5, 5, 20, 30}, {1, 2, 3, 4}};
  CHECK(success_auc(gt, gt) == 20.0 / 21.0);
  CHECK(success_auc(gt, gt, true) == 1.0);
  const std::vector<Box> far{{100, 100, 1, 1}, {200, 0, 4, 4}, {50, 50, 1, 1}};
  CHECK(success_auc(far, gt) == 0.0);
  CHECK(success_thresholds().size() == 21);
  std::mt19937_64 rng(9);
  const auto noisy = random_track(rng, 200);
  for (const Box& b : noisy) REQUIRE(iou(b, b) <= 1.0);
  CHECK(success_auc(noisy, noisy) == 20.0 / 21.0);
  CHECK(norm_precision_thresholds().size() == 21);
  CHECK_THROWS_AS(success_auc(gt, {gt[0]}), std::invalid_argument);
  CHECK_THROWS_AS(success_auc({}, {}), std::invalid_argument);
}

TEST_CASE("precision examples") {
  const std::vector<Box> gt{{0, 0, 10, 10}, {50, 50, 20, 20}};
  CHECK(precision(gt, gt) == 1.0);
  CHECK(norm_precision(gt, gt) == 1.0);
  std::vector<Box> shifted = gt;
  for (Box& b : shifted) b.x += 21.0;
  CHECK(precision(shifted, gt) == 0.0);
  for (Box& b : shifted) b.x -= 1.0;
  CHECK(precision(shifted, gt) == 1.0);
  CHECK_THROWS_AS(precision(gt, {gt[0]}), std::invalid_argument);
  CHECK_THROWS_AS(norm_precision(gt, {gt[0]}), std::invalid_argument);
}

TEST_CASE("metrics match the double-loop oracles") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const auto gt = random_track(rng, n);
    const auto pred = trial % 2 ? jitter(rng, gt, 8.0) : random_track(rng, n);
    REQUIRE(success_auc(pred, gt) == doctest::Approx(oracle::success_auc(pred, gt)).epsilon(1e-12));
    REQUIRE(precision(pred, gt) == doctest::Approx(oracle::precision(pred, gt)).epsilon(1e-12));
    REQUIRE(norm_precision(pred, gt) == doctest::Approx(oracle::norm_precision(pred, gt)).epsilon(1e-12));
    for (std::size_t i = 0; i < n; ++i) REQUIRE(iou(pred[i], gt[i]) == doctest::Approx(oracle::iou(pred[i], gt[i])));
    const Metrics m = evaluate(pred, gt);
    REQUIRE(m.auc >= 0.0);
    REQUIRE(m.auc <= 1.0);
  }
}

TEST_CASE("metrics ignore joint translation") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_track(rng, 12);
    const auto pred = jitter(rng, gt, 10.0);
    auto tg = gt, tp = pred;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      tg[i].x += 32.0;
      tp[i].x += 32.0;
      tg[i].y -= 16.0;
      tp[i].y -= 16.0;
    }
    REQUIRE(success_auc(tp, tg) == doctest::Approx(success_auc(pred, gt)).epsilon(1e-12));
    REQUIRE(precision(tp, tg) == precision(pred, gt));
    REQUIRE(norm_precision(tp, tg) == doctest::Approx(norm_precision(pred, gt)).epsilon(1e-12));
  }
}

TEST_CASE("success falls as noise grows") {
  std::mt19937_64 rng(3);
  int monotone = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const auto gt = random_track(rng, 40);
    const double small = success_auc(jitter(rng, gt, 2.0), gt);
    const double large = success_auc(jitter(rng, gt, 12.0), gt);
    monotone += small >= large;
  }
  CHECK(monotone >= 95);
}

TEST_CASE("aggregation and result files") {
  const std::vector<SequenceMetrics> rows{{"b", {0.5, 1.0, 0.25}}, {"a", {0.25, 0.0, 0.75}}};
  const Metrics mean = aggregate(rows);
  CHECK(mean.auc == 0.375);
  CHECK(mean.precision == 0.5);
  CHECK(mean.norm_precision == 0.5);
  auto swapped = rows;
  std::swap(swapped[0], swapped[1]);
  CHECK(aggregate(swapped).auc == mean.auc);
  const std::string csv = metrics_csv(rows);
  CHECK(csv.starts_with("sequence,auc,precision,norm_precision\n"));
  CHECK(csv.find("b,0.500000,1.000000,0.250000\n") != std::string::npos);
  CHECK(csv.find("all,0.375000,0.500000,0.500000\n") != std::string::npos);

  testutil::TempDir dir("eval");
  SynthSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.length = 5;
  spec.target.path.cx0 = 30;
  spec.target.path.cy0 = 30;
  Sequence seq = generate_sequence(spec);
  seq.name = "s1";
  write_sequence(seq, dir / "data" / "s1");
  std::filesystem::create_directories(dir / "res");
  write_boxes(seq.gt, dir / "res" / "s1.txt");
  const auto got = evaluate_results(dir / "data", dir / "res");
  REQUIRE(got.size() == 1);
  CHECK(got[0].sequence == "s1");
  CHECK(got[0].metrics.auc == 20.0 / 21.0);

  write_boxes({seq.gt[0]}, dir / "res" / "s1.txt");
  CHECK_THROWS_AS(evaluate_results(dir / "data", dir / "res"), std::invalid_argument);
}
