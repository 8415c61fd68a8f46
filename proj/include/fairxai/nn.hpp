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

// Early-fusion classifier with manual backpropagation.
//
//   text   : Linear(text_in -> text_embed)
//   audio  : Linear -> ReLU -> Linear -> ReLU -> Linear(-> audio_embed)
//   facial : same shape as audio
//   head   : Linear(fused -> head_hidden) -> ReLU -> Dropout -> Linear(-> 2)
//
// Inputs are one row per sample with the active modalities' columns
// concatenated in the order [text | audio | facial]; the fused embedding uses
// the same order. Only the active modalities own parameters.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairxai/common.hpp"

namespace fairxai::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr int kNumClasses = 2;

enum class AblationConfig {
  kTextOnly,
  kAudioOnly,
  kFacialOnly,
  kTextAudio,
  kTextFacial,
  kAudioFacial,
  kFullFusion,
};

inline constexpr std::array<AblationConfig, 7> kAllAblations = {
    AblationConfig::kTextOnly,   AblationConfig::kAudioOnly,   AblationConfig::kFacialOnly,
    AblationConfig::kTextAudio,  AblationConfig::kTextFacial,  AblationConfig::kAudioFacial,
    AblationConfig::kFullFusion,
};

inline std::string_view to_string(AblationConfig c) {
  switch (c) {
    case AblationConfig::kTextOnly: return "text_only";
    case AblationConfig::kAudioOnly: return "audio_only";
    case AblationConfig::kFacialOnly: return "facial_only";
    case AblationConfig::kTextAudio: return "text_audio";
    case AblationConfig::kTextFacial: return "text_facial";
    case AblationConfig::kAudioFacial: return "audio_facial";
    case AblationConfig::kFullFusion: return "full_fusion";
  }
  return "?";
}

inline AblationConfig parse_ablation(std::string_view s) {
  for (auto c : kAllAblations) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(fmt::format("unknown modality configuration '{}'", s));
}

struct ModalityMask {
  bool text = false;
  bool audio = false;
  bool facial = false;

  bool operator==(const ModalityMask&) const = default;
};

inline ModalityMask modalities_of(AblationConfig c) {
  switch (c) {
    case AblationConfig::kTextOnly: return {true, false, false};
    case AblationConfig::kAudioOnly: return {false, true, false};
    case AblationConfig::kFacialOnly: return {false, false, true};
    case AblationConfig::kTextAudio: return {true, true, false};
    case AblationConfig::kTextFacial: return {true, false, true};
    case AblationConfig::kAudioFacial: return {false, true, true};
    case AblationConfig::kFullFusion: return {true, true, true};
  }
  return {};
}

struct Architecture {
  int text_input_dim = 0;
  int audio_input_dim = 0;
  int facial_input_dim = 0;
  int text_embed_dim = 256;
  int audio_embed_dim = 128;
  int facial_embed_dim = 128;
  int encoder_hidden = 128;
  int head_hidden = 128;
  double dropout = 0.3;

  bool operator==(const Architecture&) const = default;
};

struct Linear {
  Matrix weight;  // out x in
  Vector bias;    // out

  [[nodiscard]] int in_dim() const { return static_cast<int>(weight.cols()); }
  [[nodiscard]] int out_dim() const { return static_cast<int>(weight.rows()); }

  [[nodiscard]] Matrix forward(const Matrix& x) const {
    Matrix z = x * weight.transpose();
    z.rowwise() += bias.transpose();
    return z;
  }

  static Linear glorot(int in, int out, std::mt19937_64& rng) {
    Linear l{Matrix(out, in), Vector::Zero(out)};
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) l.weight(r, c) = (2.0 * unit_uniform(rng) - 1.0) * limit;
    }
    return l;
  }
};

/// Linear layers with ReLU after every layer except the last.
struct Mlp {
  std::vector<Linear> layers;

  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix dropout_mask;         // applied after layer 0's ReLU when non-empty
  };

  static Mlp make(std::span<const int> dims, std::mt19937_64& rng) {
    Mlp m;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      m.layers.push_back(Linear::glorot(dims[i], dims[i + 1], rng));
    }
    return m;
  }

  [[nodiscard]] int in_dim() const { return layers.front().in_dim(); }
  [[nodiscard]] int out_dim() const { return layers.back().out_dim(); }

  [[nodiscard]] Matrix activation_gate(const Cache& c, std::size_t l) const {
    Matrix g = (c.pre[l].array() > 0.0).cast<double>().matrix();
    if (l == 0 && c.dropout_mask.size() > 0) g = g.cwiseProduct(c.dropout_mask);
    return g;
  }

  Matrix forward(const Matrix& x, Cache* cache) const {
    Matrix a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix z = layers[l].forward(a);
      if (cache) {
        cache->inputs.push_back(a);
        cache->pre.push_back(z);
      }
      if (l + 1 < layers.size()) {
        a = z.cwiseMax(0.0);
        if (l == 0 && cache && cache->dropout_mask.size() > 0) {
          a = a.cwiseProduct(cache->dropout_mask);
        }
      } else {
        a = std::move(z);
      }
    }
    return a;
  }

  /// Backpropagates `d_out`. Accumulates parameter grads into `grads` (same
  /// layout as layers) when non-null; stores dL/dz per layer into `deltas`
  /// when non-null. Returns dL/dx.
  Matrix backward(const Cache& c, const Matrix& d_out, std::vector<Linear>* grads,
                  std::vector<Matrix>* deltas) const {
    Matrix d = d_out;
    if (deltas) deltas->assign(layers.size(), Matrix());
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 < layers.size()) d = d.cwiseProduct(activation_gate(c, l));
      if (grads) {
        (*grads)[l].weight.noalias() += d.transpose() * c.inputs[l];
        (*grads)[l].bias += d.colwise().sum().transpose();
      }
      if (deltas) (*deltas)[l] = d;
      d = d * layers[l].weight;
    }
    return d;
  }

  /// Pushes a tangent input through the frozen activation pattern of `c`.
  /// Records the tangent input of every layer; returns the tangent output.
  Matrix tangent(const Cache& c, const Matrix& u, std::vector<Matrix>* tangent_inputs) const {
    Matrix a = u;
    if (tangent_inputs) tangent_inputs->clear();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (tangent_inputs) tangent_inputs->push_back(a);
      Matrix z = a * layers[l].weight.transpose();
      a = l + 1 < layers.size() ? Matrix(z.cwiseProduct(activation_gate(c, l))) : z;
    }
    return a;
  }
};

enum class Mode { kEval, kTrain };

class FusionModel {
 public:
  Architecture arch;
  ModalityMask active;
  std::optional<Mlp> text;
  std::optional<Mlp> audio;
  std::optional<Mlp> facial;
  Mlp head;

  static FusionModel create(const Architecture& arch, ModalityMask active, std::uint64_t seed) {
    if (!active.text && !active.audio && !active.facial) {
      throw ConfigError("fusion model needs at least one modality");
    }
    FusionModel m;
    m.arch = arch;
    m.active = active;
    std::mt19937_64 rng(seed);
    if (active.text) {
      if (arch.text_input_dim <= 0) throw ConfigError("text modality requires a text input dim");
      const std::array dims{arch.text_input_dim, arch.text_embed_dim};
      m.text = Mlp::make(dims, rng);
    }
    if (active.audio) {
      if (arch.audio_input_dim <= 0) throw ConfigError("audio modality has no features");
      const std::array dims{arch.audio_input_dim, arch.encoder_hidden, arch.encoder_hidden,
                            arch.audio_embed_dim};
      m.audio = Mlp::make(dims, rng);
    }
    if (active.facial) {
      if (arch.facial_input_dim <= 0) throw ConfigError("facial modality has no features");
      const std::array dims{arch.facial_input_dim, arch.encoder_hidden, arch.encoder_hidden,
                            arch.facial_embed_dim};
      m.facial = Mlp::make(dims, rng);
    }
    const std::array head_dims{m.fused_dim(), arch.head_hidden, kNumClasses};
    m.head = Mlp::make(head_dims, rng);
    return m;
  }

  [[nodiscard]] int fused_dim() const {
    return (active.text ? arch.text_embed_dim : 0) + (active.audio ? arch.audio_embed_dim : 0) +
           (active.facial ? arch.facial_embed_dim : 0);
  }

  [[nodiscard]] int input_dim() const {
    return (active.text ? arch.text_input_dim : 0) + (active.audio ? arch.audio_input_dim : 0) +
           (active.facial ? arch.facial_input_dim : 0);
  }

  /// Encoders then head, in a fixed order. Used for checkpoints and optimizers.
  [[nodiscard]] std::vector<Mlp*> blocks() {
    std::vector<Mlp*> out;
    for (auto* m : {&text, &audio, &facial}) {
      if (*m) out.push_back(&**m);
    }
    out.push_back(&head);
    return out;
  }

  [[nodiscard]] std::vector<const Mlp*> blocks() const {
    std::vector<const Mlp*> out;
    for (const auto* m : {&text, &audio, &facial}) {
      if (*m) out.push_back(&**m);
    }
    out.push_back(&head);
    return out;
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* b : blocks()) {
      for (const auto& l : b->layers) n += l.weight.size() + l.bias.size();
    }
    return n;
  }

  struct Cache {
    std::vector<Mlp::Cache> encoders;  // one per active encoder, in blocks() order
    Mlp::Cache head;
  };

  /// Logits, one row per sample. In train mode the head's dropout mask is
  /// drawn from `rng`; eval mode is deterministic.
  Matrix forward(const Matrix& x, Mode mode, std::mt19937_64* rng, Cache* cache) const {
    if (x.cols() != input_dim()) {
      throw DataError(fmt::format("fusion input has {} columns, model expects {} ({})", x.cols(),
                                  input_dim(), describe_inputs()));
    }
    const auto n = x.rows();
    Matrix fused(n, fused_dim());
    Eigen::Index in_off = 0;
    Eigen::Index out_off = 0;
    if (cache) cache->encoders.clear();
    for (const auto* enc : encoders()) {
      Mlp::Cache c;
      const Matrix h = enc->forward(x.middleCols(in_off, enc->in_dim()), cache ? &c : nullptr);
      fused.middleCols(out_off, enc->out_dim()) = h;
      in_off += enc->in_dim();
      out_off += enc->out_dim();
      if (cache) cache->encoders.push_back(std::move(c));
    }
    Mlp::Cache hc;
    if (mode == Mode::kTrain && arch.dropout > 0.0) {
      if (!rng) throw std::logic_error("train-mode forward needs an rng");
      const double keep = 1.0 - arch.dropout;
      hc.dropout_mask.resize(n, arch.head_hidden);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < arch.head_hidden; ++j) {
          hc.dropout_mask(i, j) = unit_uniform(*rng) < keep ? 1.0 / keep : 0.0;
        }
      }
    }
    Matrix logits = head.forward(fused, &hc);
    if (cache) cache->head = std::move(hc);
    return logits;
  }

  struct Backward {
    std::vector<std::vector<Linear>> grads;           // per block, zero-initialized shape
    Matrix input_grad;                                // dL/dx when requested
    std::vector<std::vector<Matrix>> deltas;          // per block, dL/dz per layer
  };

  [[nodiscard]] std::vector<std::vector<Linear>> zero_grads() const {
    std::vector<std::vector<Linear>> g;
    for (const auto* b : blocks()) {
      std::vector<Linear> layer_grads;
      for (const auto& l : b->layers) {
        layer_grads.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                               Vector::Zero(l.bias.size())});
      }
      g.push_back(std::move(layer_grads));
    }
    return g;
  }

  Backward backward(const Cache& cache, const Matrix& d_logits, bool param_grads,
                    bool keep_deltas) const {
    Backward out;
    const auto enc = encoders();
    if (param_grads) out.grads = zero_grads();
    if (keep_deltas) out.deltas.resize(enc.size() + 1);
    const std::size_t hi = enc.size();
    const Matrix d_fused = head.backward(cache.head, d_logits, param_grads ? &out.grads[hi] : nullptr,
                                         keep_deltas ? &out.deltas[hi] : nullptr);
    out.input_grad.resize(d_logits.rows(), input_dim());
    Eigen::Index in_off = 0;
    Eigen::Index out_off = 0;
    for (std::size_t e = 0; e < enc.size(); ++e) {
      const Matrix dx = enc[e]->backward(cache.encoders[e], d_fused.middleCols(out_off, enc[e]->out_dim()),
                                         param_grads ? &out.grads[e] : nullptr,
                                         keep_deltas ? &out.deltas[e] : nullptr);
      out.input_grad.middleCols(in_off, enc[e]->in_dim()) = dx;
      in_off += enc[e]->in_dim();
      out_off += enc[e]->out_dim();
    }
    return out;
  }

  /// Tangent inputs per block and layer for a tangent input `u`, under the
  /// activation pattern recorded in `cache` (eval mode).
  [[nodiscard]] std::vector<std::vector<Matrix>> tangent(const Cache& cache, const Matrix& u) const {
    const auto enc = encoders();
    std::vector<std::vector<Matrix>> out(enc.size() + 1);
    Matrix fused(u.rows(), fused_dim());
    Eigen::Index in_off = 0;
    Eigen::Index out_off = 0;
    for (std::size_t e = 0; e < enc.size(); ++e) {
      fused.middleCols(out_off, enc[e]->out_dim()) =
          enc[e]->tangent(cache.encoders[e], u.middleCols(in_off, enc[e]->in_dim()), &out[e]);
      in_off += enc[e]->in_dim();
      out_off += enc[e]->out_dim();
    }
    head.tangent(cache.head, fused, &out[enc.size()]);
    return out;
  }

  [[nodiscard]] std::string describe_inputs() const {
    std::string s;
    auto add = [&](bool on, const char* name, int dim) {
      if (!on) return;
      if (!s.empty()) s += " + ";
      s += fmt::format("{} {}", name, dim);
    };
    add(active.text, "text", arch.text_input_dim);
    add(active.audio, "audio", arch.audio_input_dim);
    add(active.facial, "facial", arch.facial_input_dim);
    return s;
  }

 private:
  [[nodiscard]] std::vector<const Mlp*> encoders() const {
    auto b = blocks();
    b.pop_back();
    return b;
  }
};

// ---- loss ------------------------------------------------------------------

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;

  [[nodiscard]] double of(int label) const { return label == 1 ? positive : negative; }
};

struct CrossEntropy {
  double sum = 0.0;  // Σ_i w_{y_i} · -log softmax(z_i)[y_i]
  Matrix d_logits;   // d sum / d logits
};

inline CrossEntropy weighted_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                           const ClassWeights& w) {
  CrossEntropy out;
  out.d_logits.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const RowVector e = (logits.row(i).array() - mx).exp().matrix();
    const double s = e.sum();
    const int y = labels[static_cast<std::size_t>(i)];
    const double wi = w.of(y);
    out.sum += wi * (std::log(s) + mx - logits(i, y));
    out.d_logits.row(i) = wi * (e / s);
    out.d_logits(i, y) -= wi;
  }
  return out;
}

inline std::vector<int> argmax_labels(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = logits(i, 1) > logits(i, 0) ? 1 : 0;
  }
  return out;
}

}  // namespace fairxai::nn
