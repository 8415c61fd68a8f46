/*
 * Copyright 2026 The fairxai Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "fairxai/dataset.hpp"
#include "fairxai/nn.hpp"

namespace fairxai::testing {

inline std::filesystem::path data_dir() { return FAIRXAI_DATA_DIR; }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("fairxai-{}-{}-{}", tag, ::getpid(), counter.fetch_add(1));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Every fused layer type at toy widths: a text projection, two 3-layer
/// encoders and the head.
inline nn::Architecture tiny_architecture() {
  nn::Architecture a;
  a.text_input_dim = 3;
  a.audio_input_dim = 2;
  a.facial_input_dim = 2;
  a.text_embed_dim = 4;
  a.audio_embed_dim = 3;
  a.facial_embed_dim = 3;
  a.encoder_hidden = 5;
  a.head_hidden = 4;
  a.dropout = 0.3;
  return a;
}

inline nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = standard_normal(rng);
  }
  return m;
}

/// Fresh models start with zero biases, which puts units fed by a dead layer
/// exactly on the ReLU kink. Random biases move the net to a generic point.
inline nn::FusionModel with_random_biases(nn::FusionModel m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto* b : m.blocks()) {
    for (auto& l : b->layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.5 * standard_normal(rng);
    }
  }
  return m;
}

}  // namespace fairxai::testing
