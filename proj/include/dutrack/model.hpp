// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dutrack/encoder.hpp"
#include "dutrack/head.hpp"
#include "dutrack/tokenize.hpp"

namespace dutrack {

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t blocks = 4;
  std::size_t lang_tokens = 16;
  int template_size = 64;
  int search_size = 128;
  std::size_t max_dynamic = 8;  // template positional rows reserved past the initial template
  std::size_t vocab_size = 0;

  std::size_t template_tokens() const {
    return static_cast<std::size_t>((template_size / 16) * (template_size / 16));
  }
  std::size_t search_tokens() const {
    return static_cast<std::size_t>((search_size / 16) * (search_size / 16));
  }

  /// Throws std::invalid_argument on inconsistent geometry.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedParam {
  std::string name;
  Matrix* value;
};

/// Every trainable array of the tracker.
struct Model {
  ModelConfig config;
  Matrix word_table;  // vocab × D
  Matrix lang_pos;    // N_L × D
  PatchEmbedParams embed;
  std::vector<EncoderBlockParams> blocks;
  HeadParams head;

  /// All-zero parameters (layer-norm gains and λ included) with the right shapes.
  static Model zeros(const ModelConfig& config);
  /// Random initialization: fan-in scaled Gaussian weights, small positional tables,
  /// unit layer-norm gains, λ1 = λ2 = 1.
  static Model initialized(const ModelConfig& config, std::uint64_t seed);

  /// Stable, ordered view over every trainable array. The attention key bias is
  /// not trainable (softmax cancels it) and stays zero.
  std::vector<NamedParam> parameters();
  std::size_t parameter_count();
};

/// Flat versioned container of named float32 arrays; layout in docs/checkpoint.md.
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace dutrack
