// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/tokenize.hpp"

#include <cctype>
#include <fstream>

namespace dutrack {

PatchEmbedParams::PatchEmbedParams(std::size_t dim, std::size_t template_rows,
                                   std::size_t search_rows)
    : stage1(4 * 4 * 3, dim / 4),
      stage2(dim, dim / 2),
      stage3(2 * dim, dim),
      template_pos(template_rows, dim),
      search_pos(search_rows, dim) {
  if (dim == 0 || dim % 4 != 0) throw ShapeError("patch embed width must be a multiple of 4");
}

namespace {

// Concatenates each 2×2 neighbourhood of a (grid_h·2)×(grid_w·2) token grid,
// neighbours ordered (0,0), (0,1), (1,0), (1,1).
Matrix merge_2x2(const Matrix& fine, int grid_w, int grid_h) {
  const int fine_w = grid_w * 2;
  const std::size_t width = fine.cols();
  Matrix out(static_cast<std::size_t>(grid_w * grid_h), 4 * width);
  for (int r = 0; r < grid_h; ++r) {
    for (int c = 0; c < grid_w; ++c) {
      auto dst = out.row(static_cast<std::size_t>(r * grid_w + c));
      int slot = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx, ++slot) {
          auto src = fine.row(static_cast<std::size_t>((2 * r + dy) * fine_w + 2 * c + dx));
          std::copy(src.begin(), src.end(), dst.begin() + slot * static_cast<long>(width));
        }
      }
    }
  }
  return out;
}

Matrix split_2x2(const Matrix& coarse_grad, int grid_w, int grid_h, std::size_t width) {
  const int fine_w = grid_w * 2;
  Matrix fine(static_cast<std::size_t>(fine_w * grid_h * 2), width);
  for (int r = 0; r < grid_h; ++r) {
    for (int c = 0; c < grid_w; ++c) {
      auto src = coarse_grad.row(static_cast<std::size_t>(r * grid_w + c));
      int slot = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx, ++slot) {
          auto dst = fine.row(static_cast<std::size_t>((2 * r + dy) * fine_w + 2 * c + dx));
          for (std::size_t k = 0; k < width; ++k) dst[k] = src[slot * width + k];
        }
      }
    }
  }
  return fine;
}

}  // namespace

Matrix patch_tokens(const Image& img, const PatchEmbedParams& params, PatchEmbedCache* cache) {
  if (img.width() <= 0 || img.height() <= 0 || img.width() % kPatchStride != 0 ||
      img.height() % kPatchStride != 0) {
    throw ShapeError("embed_image: " + std::to_string(img.width()) + "x" +
                     std::to_string(img.height()) + " is not divisible by 16");
  }
  const int w4 = img.width() / 4;
  const int h4 = img.height() / 4;
  Matrix x1(static_cast<std::size_t>(w4 * h4), 48);
  constexpr double kInv255 = 1.0 / 255.0;
  for (int r = 0; r < h4; ++r) {
    for (int c = 0; c < w4; ++c) {
      auto dst = x1.row(static_cast<std::size_t>(r * w4 + c));
      std::size_t k = 0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx)
          for (int ch = 0; ch < 3; ++ch) dst[k++] = img.at(4 * c + dx, 4 * r + dy, ch) * kInv255;
    }
  }
  const Matrix y1 = params.stage1.forward(x1);
  Matrix x2 = merge_2x2(y1, w4 / 2, h4 / 2);
  const Matrix y2 = params.stage2.forward(x2);
  Matrix x3 = merge_2x2(y2, w4 / 4, h4 / 4);
  Matrix y3 = params.stage3.forward(x3);
  if (cache) {
    cache->stage1_in = std::move(x1);
    cache->stage2_in = std::move(x2);
    cache->stage3_in = std::move(x3);
    cache->grid_w = w4 / 4;
    cache->grid_h = h4 / 4;
  }
  return y3;
}

void patch_tokens_backward(const PatchEmbedParams& params, const PatchEmbedCache& cache,
                           const Matrix& dtokens, PatchEmbedParams& grad) {
  const Matrix dx3 = linear_backward(params.stage3, cache.stage3_in, dtokens, grad.stage3);
  const Matrix dy2 = split_2x2(dx3, cache.grid_w, cache.grid_h, params.stage2.out_features());
  const Matrix dx2 = linear_backward(params.stage2, cache.stage2_in, dy2, grad.stage2);
  const Matrix dy1 =
      split_2x2(dx2, cache.grid_w * 2, cache.grid_h * 2, params.stage1.out_features());
  add_inplace(grad.stage1.weight, matmul_tn(cache.stage1_in, dy1));
  add_inplace(grad.stage1.bias, column_sums(dy1));
}

Matrix embed_image(const Image& img, const PatchEmbedParams& params, const Matrix& positions,
                   std::size_t first_position) {
  Matrix tokens = patch_tokens(img, params);
  if (first_position + tokens.rows() > positions.rows() || positions.cols() != tokens.cols()) {
    throw ShapeError("embed_image: positional table " + shape_string(positions) + " too small for " +
                     std::to_string(tokens.rows()) + " tokens at offset " +
                     std::to_string(first_position));
  }
  for (std::size_t r = 0; r < tokens.rows(); ++r) {
    auto dst = tokens.row(r);
    auto pos = positions.row(first_position + r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += pos[c];
  }
  return tokens;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  for (const char* reserved : {"[CLS]", "[PAD]", "[UNK]"}) add(reserved);
  for (const auto& w : words) add(w);
}

void Vocabulary::add(const std::string& word) {
  if (index_.contains(word)) return;
  index_.emplace(word, static_cast<int>(words_.size()));
  words_.push_back(word);
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& w : words_) out << w << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  const char* reserved[] = {"[CLS]", "[PAD]", "[UNK]"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (i >= lines.size() || lines[i] != reserved[i]) {
      throw IoError(path.string() + ":" + std::to_string(i + 1) + ": expected " + reserved[i]);
    }
  }
  Vocabulary v;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].empty() || v.contains(lines[i])) {
      throw IoError(path.string() + ":" + std::to_string(i + 1) + ": empty or duplicate token");
    }
    v.add(lines[i]);
  }
  return v;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<int> tokenize_text(std::string_view text, const Vocabulary& vocab, std::size_t n) {
  if (n < 2) throw std::invalid_argument("tokenize_text: n must be at least 2");
  std::vector<int> ids;
  ids.reserve(n);
  ids.push_back(Vocabulary::kCls);
  for (const auto& w : split_words(text)) {
    if (ids.size() == n) break;
    ids.push_back(vocab.id(w));
  }
  ids.resize(n, Vocabulary::kPad);
  return ids;
}

Matrix embed_text(const std::vector<int>& ids, const Matrix& table, const Matrix& positions) {
  if (ids.size() > positions.rows() || table.cols() != positions.cols()) {
    throw ShapeError("embed_text: " + std::to_string(ids.size()) + " ids with positional table " +
                     shape_string(positions));
  }
  Matrix out(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw std::out_of_range("embed_text: token id " + std::to_string(ids[i]) +
                              " outside vocabulary of " + std::to_string(table.rows()));
    }
    auto dst = out.row(i);
    auto emb = table.row(static_cast<std::size_t>(ids[i]));
    auto pos = positions.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = emb[c] + pos[c];
  }
  return out;
}

}  // namespace dutrack
