// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "dutrack/gradcheck.hpp"
#include "dutrack/head.hpp"
#include "oracles.hpp"

using namespace dutrack;

namespace {

HeadParams random_head(std::mt19937_64& rng, std::size_t dim) {
  HeadParams p(dim);
  for (Linear* l : {&p.score, &p.offset, &p.size}) {
    l->weight = oracle::random_matrix(rng, dim, l->out_features());
    l->bias = oracle::random_matrix(rng, 1, l->out_features());
  }
  return p;
}

HeadOutputs maps(std::size_t grid, double score, double offset, double size) {
  HeadOutputs h;
  h.grid = grid;
  h.score = Matrix(grid * grid, 1, score);
  h.offset = Matrix(grid * grid, 2, offset);
  h.size = Matrix(grid * grid, 2, size);
  return h;
}

}  // namespace

TEST_CASE("head shapes and zero weights") {
  std::mt19937_64 rng(1);
  const HeadOutputs h = head_forward(oracle::random_matrix(rng, 64, 8), HeadParams(8));
  CHECK(h.grid == 8);
  CHECK(h.crop_size() == 128);
  CHECK(h.score.rows() == 64);
  CHECK(h.offset.cols() == 2);
  for (double v : h.score.data()) CHECK(v == 0.5);
  CHECK_THROWS_AS(head_forward(Matrix(63, 8), HeadParams(8)), ShapeError);
  CHECK_THROWS_AS(head_forward(Matrix(0, 8), HeadParams(8)), ShapeError);
}

TEST_CASE("head matches the per-cell oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t grid = 1 + rng() % 5, dim = 1 + rng() % 16;
    const HeadParams p = random_head(rng, dim);
    const Matrix f = oracle::random_matrix(rng, grid * grid, dim);
    const HeadOutputs got = head_forward(f, p), want = oracle::head(f, p);
    REQUIRE(got.grid == want.grid);
    REQUIRE(oracle::max_rel_diff(got.score, want.score, 1e-300) < 1e-9);
    REQUIRE(oracle::max_rel_diff(got.offset, want.offset, 1e-300) < 1e-9);
    REQUIRE(oracle::max_rel_diff(got.size, want.size, 1e-300) < 1e-9);
  }
}

TEST_CASE("decode examples") {
  HeadOutputs peak = maps(8, 0.1, 0.5, 0.25);
  peak.score[2 * 8 + 5] = 0.9;
  const Box b = decode_box(peak, 0.0);
  CHECK(b.cx() == doctest::Approx(5 * 16 + 8));
  CHECK(b.cy() == doctest::Approx(2 * 16 + 8));
  CHECK(b.w == doctest::Approx(32.0));

  CHECK(penalized_argmax(maps(5, 0.5, 0.5, 0.2), 0.3) == 12);
  // Even grids have two equal window peaks per axis; the smaller index wins.
  CHECK(penalized_argmax(maps(8, 0.5, 0.5, 0.2), 0.3) == 27);
  CHECK(penalized_argmax(maps(4, 0.5, 0.5, 0.2), 0.0) == 0);

  const Box clamped = decode_box(maps(2, 0.5, 0.0, 0.999), 0.0);
  CHECK(clamped.x == 0.0);
  CHECK(clamped.y == 0.0);
  CHECK(clamped.x + clamped.w <= 32.0);
  CHECK(clamped.w > 0.0);

  CHECK_THROWS_AS(decode_box(peak, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(decode_box(peak, -0.1), std::invalid_argument);
}

TEST_CASE("decode matches the exhaustive oracle and ignores constant shifts") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t grid = 1 + rng() % 8;
    HeadOutputs h = maps(grid, 0.0, 0.0, 0.0);
    for (double& v : h.score.data()) v = std::floor(u(rng) * 6.0) / 6.0;
    for (double& v : h.offset.data()) v = u(rng);
    for (double& v : h.size.data()) v = u(rng);
    const double w = trial % 2 ? 0.0 : u(rng) * 0.9;
    REQUIRE(decode_box(h, w) == oracle::decode(h, w));
    if (w == 0.0) {
      HeadOutputs shifted = h;
      for (double& v : shifted.score.data()) v += 0.37;
      REQUIRE(penalized_argmax(shifted, 0.0) == penalized_argmax(h, 0.0));
    }
  }
}

TEST_CASE("cosine window") {
  const auto w = cosine_window(5);
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(w[4]));
  for (double v : w) CHECK(v > 0.0);
}

TEST_CASE("head backward matches finite differences") {
  std::mt19937_64 rng(4);
  HeadParams p = random_head(rng, 5);
  Matrix f = oracle::random_matrix(rng, 9, 5);
  const Matrix cs = oracle::random_matrix(rng, 9, 1), co = oracle::random_matrix(rng, 9, 2),
               cz = oracle::random_matrix(rng, 9, 2);
  auto dot = [](const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto loss = [&] {
    const HeadOutputs h = head_forward(f, p);
    return dot(h.score, cs) + dot(h.offset, co) + dot(h.size, cz);
  };
  HeadParams grad(5);
  const Matrix dx = head_backward(f, p, head_forward(f, p), {cs, co, cz}, grad);
  const ParamSlot slots[] = {{"f", &f, &dx},
                             {"score.w", &p.score.weight, &grad.score.weight},
                             {"score.b", &p.score.bias, &grad.score.bias},
                             {"offset.w", &p.offset.weight, &grad.offset.weight},
                             {"offset.b", &p.offset.bias, &grad.offset.bias},
                             {"size.w", &p.size.weight, &grad.size.weight},
                             {"size.b", &p.size.bias, &grad.size.bias}};
  CHECK(finite_diff_check(loss, slots, 1e-5).max_relative_error < 1e-4);
}
