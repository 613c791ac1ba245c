// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dutrack/image.hpp"
#include "dutrack/tensor.hpp"

namespace dutrack {

inline constexpr int kPatchStride = 16;

/// Hierarchical patch embedding: a 4×4 pixel projection to D/4, then two
/// 2×2 merges (D/4 → D/2 → D). Token (r, c) covers pixels [16r, 16r+16)×[16c, 16c+16).
struct PatchEmbedParams {
  Linear stage1;  // 48 → D/4
  Linear stage2;  // 4·D/4 → D/2
  Linear stage3;  // 4·D/2 → D
  Matrix template_pos;  // (initial template tokens + dynamic capacity) × D
  Matrix search_pos;    // search tokens × D

  PatchEmbedParams() = default;
  PatchEmbedParams(std::size_t dim, std::size_t template_rows, std::size_t search_rows);

  std::size_t dim() const { return stage3.out_features(); }
};

struct PatchEmbedCache {
  Matrix stage1_in;
  Matrix stage2_in;
  Matrix stage3_in;
  int grid_w = 0;
  int grid_h = 0;
};

/// Patch tokens without positional terms, (H/16)(W/16) × D in row-major order.
Matrix patch_tokens(const Image& img, const PatchEmbedParams& params,
                    PatchEmbedCache* cache = nullptr);

/// Accumulates stage weight gradients; pixels receive no gradient.
void patch_tokens_backward(const PatchEmbedParams& params, const PatchEmbedCache& cache,
                           const Matrix& dtokens, PatchEmbedParams& grad);

/// patch_tokens plus rows [first_position, first_position + tokens) of `positions`.
Matrix embed_image(const Image& img, const PatchEmbedParams& params, const Matrix& positions,
                   std::size_t first_position = 0);

class Vocabulary {
 public:
  static constexpr int kCls = 0;
  static constexpr int kPad = 1;
  static constexpr int kUnk = 2;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& words);

  int id(std::string_view word) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  void add(const std::string& word);

  /// One token per line, line number = id; the first three lines must be [CLS], [PAD], [UNK].
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Lowercase whitespace word split.
std::vector<std::string> split_words(std::string_view text);

/// [CLS] followed by up to n−1 word ids, right-padded with [PAD].
std::vector<int> tokenize_text(std::string_view text, const Vocabulary& vocab, std::size_t n);

/// Row i = table[ids[i]] + positions[i].
Matrix embed_text(const std::vector<int>& ids, const Matrix& table, const Matrix& positions);

/// Token counts of the [language; template; search] sequence.
struct SegmentLayout {
  std::size_t n_lang = 0;
  std::size_t n_tmpl = 0;
  std::size_t n_search = 0;
  std::size_t dim = 0;

  std::size_t total() const { return n_lang + n_tmpl + n_search; }
  std::size_t tmpl_begin() const { return n_lang; }
  std::size_t search_begin() const { return n_lang + n_tmpl; }

  friend bool operator==(const SegmentLayout&, const SegmentLayout&) = default;
};

}  // namespace dutrack
