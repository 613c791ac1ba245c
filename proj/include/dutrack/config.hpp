// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dutrack/model.hpp"
#include "dutrack/synth.hpp"
#include "dutrack/tracker.hpp"
#include "dutrack/trainer.hpp"

namespace dutrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// `key = value` lines; `#` starts a comment; blank lines ignored. Duplicate keys
/// and lines without `=` throw ConfigError naming the source and line.
std::vector<ConfigEntry> parse_key_values(const std::string& text, const std::string& source);
std::vector<ConfigEntry> read_key_values(const std::filesystem::path& path);

struct RunConfig {
  ModelConfig model;
  TrackerConfig tracker;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::string captioner;  // external command; empty = rule grammar
  int captioner_timeout_ms = 5000;
  std::filesystem::path train_data;
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path results;

  /// Applies entries over the current values; unknown keys throw ConfigError.
  void apply(const std::vector<ConfigEntry>& entries, const std::string& source);
  void validate() const;

  static RunConfig load(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();
};

/// A suite file: one or more families, `count` sequences each.
struct SuiteFile {
  std::vector<std::string> families;
  std::size_t count = 10;
  std::uint64_t seed = 1;
  std::size_t length = 100;
  int width = 256;
  int height = 256;
  int noise = 6;

  static SuiteFile parse(const std::vector<ConfigEntry>& entries, const std::string& source);
  static SuiteFile load(const std::filesystem::path& path);

  /// Every sequence spec, families in file order; family f uses seed + 101·f.
  std::vector<SynthSpec> specs() const;
};

}  // namespace dutrack
