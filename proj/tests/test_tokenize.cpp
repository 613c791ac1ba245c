// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <random>

#include "dutrack/tokenize.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dutrack;

namespace {

PatchEmbedParams random_embed(std::mt19937_64& rng, std::size_t dim, bool zero_bias) {
  PatchEmbedParams p(dim, 20, 256);
  for (Linear* l : {&p.stage1, &p.stage2, &p.stage3}) {
    l->weight = oracle::random_matrix(rng, l->in_features(), l->out_features(), 0.3);
    l->bias = zero_bias ? Matrix(1, l->out_features()) : oracle::random_matrix(rng, 1, l->out_features());
  }
  p.template_pos = oracle::random_matrix(rng, p.template_pos.rows(), dim);
  p.search_pos = oracle::random_matrix(rng, p.search_pos.rows(), dim);
  return p;
}

}  // namespace

TEST_CASE("token counts") {
  std::mt19937_64 rng(1);
  const auto p = random_embed(rng, 16, false);
  CHECK(patch_tokens(Image(256, 256), p).rows() == 256);
  CHECK(patch_tokens(Image(16, 16), p).rows() == 1);
  CHECK(patch_tokens(Image(64, 32), p).rows() == 8);
  CHECK_THROWS_AS(patch_tokens(Image(20, 16), p), ShapeError);
  CHECK_THROWS_AS(patch_tokens(Image(16, 24), p), ShapeError);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 16 * (1 + static_cast<int>(rng() % 6));
    const int h = 16 * (1 + static_cast<int>(rng() % 6));
    REQUIRE(patch_tokens(Image(w, h), p).rows() == static_cast<std::size_t>((w / 16) * (h / 16)));
  }
}

TEST_CASE("zero image with zero biases leaves only positions") {
  std::mt19937_64 rng(2);
  const auto p = random_embed(rng, 8, true);
  const Matrix t = embed_image(Image(32, 32), p, p.search_pos, 0);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(t(r, c) == p.search_pos(r, c));
  }
  const Matrix u = embed_image(Image(16, 16), p, p.template_pos, 7);
  for (std::size_t c = 0; c < 8; ++c) CHECK(u(0, c) == p.template_pos(7, c));
  CHECK_THROWS_AS(embed_image(Image(16, 16), p, p.template_pos, 20), ShapeError);
}

TEST_CASE("token (r, c) depends only on its pixel block") {
  std::mt19937_64 rng(3);
  const auto p = random_embed(rng, 8, false);
  const Image base = oracle::random_image(rng, 64, 48);
  const Matrix t0 = patch_tokens(base, p);
  for (int trial = 0; trial < 30; ++trial) {
    Image img = base;
    const int x = static_cast<int>(rng() % 64), y = static_cast<int>(rng() % 48);
    img.at(x, y, static_cast<int>(rng() % 3)) ^= 0x55;
    const Matrix t1 = patch_tokens(img, p);
    const std::size_t changed = static_cast<std::size_t>((y / 16) * 4 + x / 16);
    for (std::size_t r = 0; r < t0.rows(); ++r) {
      bool same = true;
      for (std::size_t c = 0; c < 8; ++c) same = same && t0(r, c) == t1(r, c);
      REQUIRE(same == (r != changed));
    }
  }
}

TEST_CASE("embedding is linear in pixels when biases are zero") {
  std::mt19937_64 rng(4);
  const auto p = random_embed(rng, 16, true);
  for (int trial = 0; trial < 20; ++trial) {
    Image a(32, 32), b(32, 32), sum(32, 32);
    for (std::size_t i = 0; i < a.bytes().size(); ++i) {
      a.bytes()[i] = static_cast<std::uint8_t>(rng() % 128);
      b.bytes()[i] = static_cast<std::uint8_t>(rng() % 128);
      sum.bytes()[i] = static_cast<std::uint8_t>(a.bytes()[i] + b.bytes()[i]);
    }
    const Matrix ta = patch_tokens(a, p), tb = patch_tokens(b, p), ts = patch_tokens(sum, p);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      REQUIRE(std::abs(ts[i] - (ta[i] + tb[i])) < 1e-12 * (1.0 + std::abs(ts[i])));
    }
  }
}

TEST_CASE("tokenize_text rules") {
  const Vocabulary v({"red", "car"});
  const auto empty = tokenize_text("", v, 16);
  REQUIRE(empty.size() == 16);
  CHECK(empty[0] == Vocabulary::kCls);
  for (std::size_t i = 1; i < 16; ++i) CHECK(empty[i] == Vocabulary::kPad);

  const auto rc = tokenize_text("Red  CAR", v, 16);
  CHECK(rc[0] == Vocabulary::kCls);
  CHECK(rc[1] == v.id("red"));
  CHECK(rc[2] == v.id("car"));
  for (std::size_t i = 3; i < 16; ++i) CHECK(rc[i] == Vocabulary::kPad);

  std::string long_text;
  for (int i = 0; i < 40; ++i) long_text += (i % 2 ? "car " : "red ");
  const auto lt = tokenize_text(long_text, v, 16);
  REQUIRE(lt.size() == 16);
  for (std::size_t i = 1; i < 16; ++i) CHECK(lt[i] == (i % 2 ? v.id("red") : v.id("car")));

  CHECK(tokenize_text("blue car", v, 4)[1] == Vocabulary::kUnk);
  CHECK_THROWS_AS(tokenize_text("red", v, 1), std::invalid_argument);
}

TEST_CASE("tokenize_text always emits n ids led by [CLS]") {
  std::mt19937_64 rng(5);
  const Vocabulary v({"a", "b", "c"});
  const std::string alphabet = "abc d\t\nXYZ";
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const std::size_t len = rng() % 60;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    const std::size_t n = 2 + rng() % 20;
    const auto ids = tokenize_text(s, v, n);
    REQUIRE(ids.size() == n);
    REQUIRE(ids[0] == Vocabulary::kCls);
    REQUIRE(ids == tokenize_text(s, v, n));
  }
}

TEST_CASE("embed_text lookups") {
  std::mt19937_64 rng(6);
  Matrix table = oracle::random_matrix(rng, 6, 4);
  const Matrix pos = oracle::random_matrix(rng, 5, 4);
  table.row(Vocabulary::kPad)[0] = 0.0;
  for (double& v : table.row(Vocabulary::kPad)) v = 0.0;
  const Matrix pads = embed_text(std::vector<int>(5, Vocabulary::kPad), table, pos);
  CHECK(pads == pos);

  const Matrix one = embed_text({4}, table, Matrix(1, 4));
  for (std::size_t c = 0; c < 4; ++c) CHECK(one(0, c) == table(4, c));

  const std::vector<int> ids{0, 5, 3, 3, 1};
  const Matrix got = embed_text(ids, table, pos);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(got(i, c) == table(ids[i], c) + pos(i, c));
  }
  CHECK_THROWS_AS(embed_text({6}, table, pos), std::out_of_range);
  CHECK_THROWS_AS(embed_text({-1}, table, pos), std::out_of_range);
}

TEST_CASE("vocabulary file round trip and validation") {
  testutil::TempDir dir("vocab");
  const Vocabulary v({"red", "ball", "top-left"});
  CHECK(v.id("[CLS]") == Vocabulary::kCls);
  CHECK(v.id("[PAD]") == Vocabulary::kPad);
  CHECK(v.id("[UNK]") == Vocabulary::kUnk);
  CHECK(v.id("red") == 3);
  v.save(dir / "v.txt");
  CHECK(Vocabulary::load(dir / "v.txt") == v);

  std::ofstream(dir / "bad.txt") << "[CLS]\n[UNK]\n[PAD]\nred\n";
  CHECK_THROWS_AS(Vocabulary::load(dir / "bad.txt"), IoError);
  std::ofstream(dir / "dup.txt") << "[CLS]\n[PAD]\n[UNK]\nred\nred\n";
  CHECK_THROWS_AS(Vocabulary::load(dir / "dup.txt"), IoError);
  CHECK_THROWS_AS(Vocabulary::load(dir / "missing.txt"), IoError);
}
