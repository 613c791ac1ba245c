// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <random>

#include "dutrack/dlum.hpp"
#include "dutrack/synth.hpp"
#include "test_util.hpp"

using namespace dutrack;

namespace {

SynthSpec plain(std::size_t length) {
  SynthSpec s;
  s.width = 96;
  s.height = 80;
  s.length = length;
  s.background = {10, 10, 10};
  s.target.w_start = s.target.w_end = 20;
  s.target.h_start = s.target.h_end = 14;
  s.target.path.cx0 = 40;
  s.target.path.cy0 = 30;
  return s;
}

bool is_object(const Image& img, int x, int y) {
  return !(img.at(x, y, 0) == 10 && img.at(x, y, 1) == 10 && img.at(x, y, 2) == 10);
}

}  // namespace

TEST_CASE("static sequences repeat the first frame") {
  const Sequence seq = generate_sequence(plain(6));
  REQUIRE(seq.size() == 6);
  for (const Image& f : seq.frames) CHECK(f == seq.frames[0]);
  CHECK(seq.gt[0] == Box{30, 23, 20, 14});
  CHECK(seq.category == "box");
  CHECK(seq.description == generate_description(seq.frames[0], seq.gt[0], "box"));
}

TEST_CASE("linear motion displaces the center exactly") {
  SynthSpec s = plain(11);
  s.target.path.vx = 2.0;
  const Sequence seq = generate_sequence(s);
  CHECK(seq.gt[10].cx() - seq.gt[0].cx() == 20.0);
  CHECK(seq.gt[10].cy() == seq.gt[0].cy());
}

TEST_CASE("colour drift ends nearer the end colour") {
  SynthSpec s = plain(101);
  s.target.color_start = {255, 0, 0};
  s.target.color_end = {0, 0, 255};
  s.target.drift_rate = 0.01;
  const Sequence seq = generate_sequence(s);
  const Rgb m = mean_rgb(seq.frames[100], seq.gt[100]);
  CHECK(color_shift(m, {0, 0, 255}) < color_shift(m, {255, 0, 0}));
  CHECK(nearest_color_name(mean_rgb(seq.frames[0], seq.gt[0])) == "red");
}

TEST_CASE("ground truth is tight") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    SynthSpec s = plain(5);
    s.target.shape = trial % 2 ? Shape::Ellipse : Shape::Rectangle;
    s.target.w_start = 8 + u(rng) * 30;
    s.target.h_start = 8 + u(rng) * 30;
    s.target.w_end = 8 + u(rng) * 30;
    s.target.h_end = 8 + u(rng) * 30;
    s.target.path = {20 + u(rng) * 56, 20 + u(rng) * 40, u(rng) * 2 - 1, u(rng) * 2 - 1, 5, 5, 30, 0};
    s.target.color_start = s.target.color_end = {200, 180, 20};
    const Sequence seq = generate_sequence(s);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const Image& img = seq.frames[t];
      const Box& g = seq.gt[t];
      bool top = false, bottom = false, left = false, right = false;
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          if (!is_object(img, x, y)) continue;
          REQUIRE(x >= g.x);
          REQUIRE(x < g.x + g.w);
          REQUIRE(y >= g.y);
          REQUIRE(y < g.y + g.h);
          top = top || y == g.y;
          bottom = bottom || y == g.y + g.h - 1;
          left = left || x == g.x;
          right = right || x == g.x + g.w - 1;
        }
      }
      REQUIRE((top && bottom && left && right));
    }
  }
}

TEST_CASE("generation is seed-deterministic and rejects bad specs") {
  SynthSpec s = plain(4);
  s.noise = 8;
  s.seed = 5;
  CHECK(generate_sequence(s).frames == generate_sequence(s).frames);
  SynthSpec other = s;
  other.seed = 6;
  CHECK_FALSE(generate_sequence(other).frames == generate_sequence(s).frames);

  SynthSpec small = plain(3);
  small.target.w_end = 6;
  CHECK_THROWS_AS(generate_sequence(small), std::invalid_argument);
  SynthSpec outside = plain(3);
  outside.target.path.cx0 = -5;
  CHECK_THROWS_AS(generate_sequence(outside), std::invalid_argument);
  SynthSpec empty = plain(0);
  CHECK_THROWS_AS(generate_sequence(empty), std::invalid_argument);
}

TEST_CASE("dataset round trip and errors") {
  testutil::TempDir dir("seq");
  SynthSpec s = plain(4);
  s.noise = 5;
  s.target.path.vx = 1.5;
  Sequence seq = generate_sequence(s);
  seq.name = "one";
  write_sequence(seq, dir / "one");
  CHECK(std::filesystem::exists(dir / "one" / "img" / "00000001.ppm"));
  const Sequence back = read_sequence(dir / "one");
  CHECK(back.frames == seq.frames);
  CHECK(back.gt == seq.gt);
  CHECK(back.category == seq.category);
  CHECK(back.description == seq.description);
  CHECK(back.name == "one");

  write_sequence(seq, dir / "nested" / "two");
  const auto listed = list_sequences(dir.path());
  REQUIRE(listed.size() == 2);
  CHECK(listed[0].filename() == "two");
  CHECK(listed[1].filename() == "one");

  std::filesystem::remove(dir / "one" / "groundtruth.txt");
  CHECK_THROWS_WITH_AS(read_sequence(dir / "one"), doctest::Contains("groundtruth.txt"), IoError);

  std::ofstream(dir / "boxes.txt") << "1,2,3,4\n5\t6\t7\t8\n1,2,x,4\n";
  CHECK_THROWS_WITH_AS(read_boxes(dir / "boxes.txt"), doctest::Contains("boxes.txt:3"), IoError);
  std::ofstream(dir / "ok.txt") << "1,2,3,4\n5\t6\t7\t8\n";
  CHECK(read_boxes(dir / "ok.txt") == std::vector<Box>{{1, 2, 3, 4}, {5, 6, 7, 8}});

  write_ppm(seq.frames[0], dir / "full.ppm");
  std::ifstream in(dir / "full.ppm", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir / "cut.ppm", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  CHECK_THROWS_WITH_AS(read_ppm(dir / "cut.ppm"), doctest::Contains("byte offset"), IoError);
}

TEST_CASE("suites") {
  for (const auto& family : suite_families()) {
    SuiteSpec suite;
    suite.family = family;
    suite.count = 2;
    suite.length = 30;
    const auto specs = make_suite(suite);
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].name == family + "-000");
    for (const auto& spec : specs) {
      const Sequence seq = generate_sequence(spec);
      CHECK(seq.size() == 30);
    }
  }
  SuiteSpec bad;
  bad.family = "nope";
  CHECK_THROWS_AS(make_suite(bad), std::invalid_argument);
}
