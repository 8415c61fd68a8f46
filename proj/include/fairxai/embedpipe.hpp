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

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fairxai/cfa.hpp"
#include "fairxai/common.hpp"
#include "fairxai/csv.hpp"
#include "fairxai/dataset.hpp"
#include "fairxai/fairmetrics.hpp"
#include "fairxai/nn.hpp"

namespace fairxai::embedpipe {

using nn::Matrix;
using nn::RowVector;

/// w_c = N / (2 N_c). Refuses single-class data.
inline nn::ClassWeights class_weights(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("class_weights: both classes must be present");
  const auto n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(neg)), n / (2.0 * static_cast<double>(pos))};
}

/// Column z-scoring fitted on training rows; constant columns keep scale 1.
struct Standardizer {
  RowVector mean;
  RowVector scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const auto n = static_cast<double>(x.rows());
    s.mean = x.colwise().sum() / n;
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
      s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  [[nodiscard]] Matrix apply(const Matrix& x) const {
    Matrix out = x.rowwise() - mean;
    return out.array().rowwise() / scale.array();
  }
};

// ---- text embeddings -------------------------------------------------------

/// Precomputed text embeddings (CSV: session_id then `dim` reals, with a
/// header row) or, without a file, deterministic pseudo-embeddings seeded by
/// a hash of each transcript.
struct TextEmbeddingSource {
  std::string name = "text";
  std::optional<std::filesystem::path> file;
  int dim = 64;
  std::uint64_t seed = 0;

  [[nodiscard]] std::string fingerprint() const {
    if (file) return fmt::format("file:{}:{}", dim, sha256_hex(read_text_file(*file)));
    return fmt::format("synth:{}:{}", dim, seed);
  }
};

inline Matrix text_embeddings(const TextEmbeddingSource& src,
                              std::span<const dataset::SessionRecord> records) {
  if (src.dim <= 0) throw ConfigError("text embedding dim must be positive");
  Matrix out(static_cast<Eigen::Index>(records.size()), src.dim);
  if (!src.file) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      std::mt19937_64 rng(digest64(fmt::format("{}\n{}", src.seed, records[i].transcript)));
      for (int j = 0; j < src.dim; ++j) {
        out(static_cast<Eigen::Index>(i), j) = standard_normal(rng);
      }
    }
    return out;
  }
  const auto table = csv::read(*src.file);
  if (table.header.size() != static_cast<std::size_t>(src.dim) + 1) {
    throw DataError(fmt::format("{}: declared dim {} but file has {} value columns",
                                src.file->string(), src.dim, table.header.size() - 1));
  }
  std::map<std::string, const std::vector<std::string>*> rows;
  for (const auto& r : table.rows) rows[std::string(trim(r[0]))] = &r;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = rows.find(records[i].session_id);
    if (it == rows.end()) {
      throw DataError(fmt::format("{}: no embedding for session '{}'", src.file->string(),
                                  records[i].session_id));
    }
    for (int j = 0; j < src.dim; ++j) {
      const auto v = csv::parse_real((*it->second)[static_cast<std::size_t>(j) + 1]);
      if (!v) throw DataError(fmt::format("{}: invalid value for '{}'", src.file->string(), it->first));
      out(static_cast<Eigen::Index>(i), j) = *v;
    }
  }
  return out;
}

// ---- splits ----------------------------------------------------------------

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;

  [[nodiscard]] std::string hash() const {
    std::string s = "train";
    for (const auto& id : train) s += '\n' + id;
    s += "\ntest";
    for (const auto& id : test) s += '\n' + id;
    return sha256_hex(s);
  }
};

inline Split read_split(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError(fmt::format("split file '{}' not found", path.string()));
  }
  const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("train") || !j.contains("test")) {
    throw ConfigError(fmt::format("{}: expected {{\"train\": [...], \"test\": [...]}}", path.string()));
  }
  return {j["train"].get<std::vector<std::string>>(), j["test"].get<std::vector<std::string>>()};
}

/// Row indices of the split's sessions, in the split's order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> resolve_split(
    const Split& split, std::span<const dataset::SessionRecord> records) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index[records[i].session_id] = i;
  std::set<std::string> seen;
  auto lookup = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> out;
    for (const auto& id : ids) {
      if (!seen.insert(id).second) throw DataError(fmt::format("split lists '{}' twice", id));
      const auto it = index.find(id);
      if (it == index.end()) throw DataError(fmt::format("split names unknown session '{}'", id));
      out.push_back(it->second);
    }
    return out;
  };
  auto train = lookup(split.train);
  auto test = lookup(split.test);
  return {std::move(train), std::move(test)};
}

// ---- inputs ----------------------------------------------------------------

/// Per-modality raw input matrices for every record (rows follow records).
struct ModalityInputs {
  Matrix text;
  Matrix audio;
  Matrix facial;
};

inline ModalityInputs modality_inputs(const dataset::Dataset& ds,
                                      const std::optional<TextEmbeddingSource>& text_source) {
  ModalityInputs in;
  const auto n = static_cast<Eigen::Index>(ds.records.size());
  auto gather = [&](dataset::Modality m) {
    const auto cols = ds.schema.indices_of(m);
    Matrix out(n, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        out(i, static_cast<Eigen::Index>(c)) = ds.records[static_cast<std::size_t>(i)].features[cols[c]];
      }
    }
    return out;
  };
  in.audio = gather(dataset::Modality::kAudio);
  in.facial = gather(dataset::Modality::kFacial);
  if (text_source) in.text = text_embeddings(*text_source, ds.records);
  return in;
}

inline Matrix assemble(const ModalityInputs& in, nn::ModalityMask mask,
                       std::span<const std::size_t> rows) {
  const Eigen::Index d = (mask.text ? in.text.cols() : 0) + (mask.audio ? in.audio.cols() : 0) +
                         (mask.facial ? in.facial.cols() : 0);
  Matrix x(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index off = 0;
    const auto src = static_cast<Eigen::Index>(rows[r]);
    const auto dst = static_cast<Eigen::Index>(r);
    for (const auto* m : {mask.text ? &in.text : nullptr, mask.audio ? &in.audio : nullptr,
                          mask.facial ? &in.facial : nullptr}) {
      if (!m) continue;
      x.row(dst).segment(off, m->cols()) = m->row(src);
      off += m->cols();
    }
  }
  return x;
}

/// The reason a configuration cannot run on these inputs, if any.
inline std::optional<std::string> missing_modality(const ModalityInputs& in, nn::ModalityMask m) {
  if (m.text && in.text.cols() == 0) return std::string("no text embeddings");
  if (m.audio && in.audio.cols() == 0) return std::string("no audio features");
  if (m.facial && in.facial.cols() == 0) return std::string("no facial features");
  return std::nullopt;
}

inline nn::Architecture architecture_for(const ModalityInputs& in, nn::Architecture base) {
  base.text_input_dim = static_cast<int>(in.text.cols());
  base.audio_input_dim = static_cast<int>(in.audio.cols());
  base.facial_input_dim = static_cast<int>(in.facial.cols());
  return base;
}

// ---- training --------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int epochs = 100;
  int batch_size = 16;
  std::optional<nn::ClassWeights> class_weights;  // inverse frequency when unset
  std::uint64_t seed = 0;
};

struct TrainData {
  Matrix x;
  std::vector<int> y;
  std::vector<std::optional<int>> group;  // sensitive attribute; may be all nullopt
};

struct LossTrace {
  std::vector<cfa::LossBreakdown> epochs;
};

class TrainingDiverged : public DataError {
 public:
  TrainingDiverged(const std::string& what, LossTrace trace)
      : DataError(what), trace_(std::move(trace)) {}
  [[nodiscard]] const LossTrace& trace() const { return trace_; }

 private:
  LossTrace trace_;
};

/// Shuffles each attribute group and interleaves them in proportion, so every
/// batch sees both groups whenever the group sizes allow it.
inline std::vector<std::size_t> stratified_order(std::span<const std::optional<int>> group,
                                                 std::mt19937_64& rng) {
  std::vector<std::size_t> buckets[3];
  for (std::size_t i = 0; i < group.size(); ++i) {
    buckets[group[i] ? (*group[i] == 1 ? 0 : 1) : 2].push_back(i);
  }
  struct Keyed {
    double key;
    int bucket;
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  for (int b = 0; b < 3; ++b) {
    shuffle_in_place(buckets[b], rng);
    const auto s = static_cast<double>(buckets[b].size());
    for (std::size_t k = 0; k < buckets[b].size(); ++k) {
      keyed.push_back({(static_cast<double>(k) + 0.5) / s, b, buckets[b][k]});
    }
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.key < b.key || (a.key == b.key && a.bucket < b.bucket);
  });
  std::vector<std::size_t> order;
  order.reserve(keyed.size());
  for (const auto& k : keyed) order.push_back(k.index);
  return order;
}

inline Matrix take_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

struct TrainResult {
  nn::FusionModel model;
  LossTrace trace;
};

/// Mini-batch gradient descent with momentum on mean weighted cross-entropy,
/// plus lambda * L_CFA when `cfa` is set. Single-threaded and reproducible.
inline TrainResult train(nn::FusionModel model, const TrainData& data, const TrainConfig& cfg,
                         const std::optional<cfa::CfaConfig>& cfa_cfg = std::nullopt) {
  const auto n = static_cast<std::size_t>(data.x.rows());
  if (data.y.size() != n || data.group.size() != n) throw DataError("train: length mismatch");
  std::size_t pos = 0;
  for (int y : data.y) pos += y == 1 ? 1 : 0;
  if (pos < 2 || n - pos < 2) throw DataError("train: need at least 2 sessions per class");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  const nn::ClassWeights weights = cfg.class_weights ? *cfg.class_weights : class_weights(data.y);

  std::mt19937_64 rng(cfg.seed);
  auto velocity = model.zero_grads();
  std::optional<std::vector<double>> global_rho;
  if (cfa_cfg && cfa_cfg->global_correlation) {
    global_rho = cfa::attribute_correlation(data.x, data.group);
  }

  TrainResult result{std::move(model), {}};
  auto& m = result.model;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = stratified_order(data.group, rng);
    double ce_sum = 0.0;
    double cfa_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, n - start));
      const Matrix xb = take_rows(data.x, idx);
      std::vector<int> yb;
      std::vector<std::optional<int>> gb;
      for (auto i : idx) {
        yb.push_back(data.y[i]);
        gb.push_back(data.group[i]);
      }
      nn::FusionModel::Cache cache;
      const Matrix logits = m.forward(xb, nn::Mode::kTrain, &rng, &cache);
      const auto ce = nn::weighted_cross_entropy(logits, yb, weights);
      const Matrix d_logits = ce.d_logits / static_cast<double>(idx.size());
      auto grads = m.backward(cache, d_logits, true, false).grads;
      ce_sum += ce.sum;

      if (cfa_cfg) {
        const auto pg = cfa::cfa_penalty_gradient(m, xb, gb, *cfa_cfg,
                                                  global_rho ? &*global_rho : nullptr);
        cfa_sum += pg.penalty.value;
        if (cfa_cfg->lambda != 0.0) {
          for (std::size_t b = 0; b < grads.size(); ++b) {
            for (std::size_t l = 0; l < grads[b].size(); ++l) {
              grads[b][l].weight += cfa_cfg->lambda * pg.grads[b][l].weight;
            }
          }
        }
      }
      ++batches;
      if (!std::isfinite(ce.sum) || !std::isfinite(cfa_sum)) {
        throw TrainingDiverged(fmt::format("training diverged at epoch {}", epoch),
                               result.trace);
      }

      auto blocks = m.blocks();
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t l = 0; l < blocks[b]->layers.size(); ++l) {
          auto& v = velocity[b][l];
          auto& layer = blocks[b]->layers[l];
          v.weight = cfg.momentum * v.weight + grads[b][l].weight;
          v.bias = cfg.momentum * v.bias + grads[b][l].bias;
          layer.weight -= cfg.learning_rate * v.weight;
          layer.bias -= cfg.learning_rate * v.bias;
        }
      }
    }
    cfa::LossBreakdown lb;
    lb.ce = ce_sum / static_cast<double>(n);
    lb.cfa = batches > 0 ? cfa_sum / static_cast<double>(batches) : 0.0;
    lb.total = lb.ce + (cfa_cfg ? cfa_cfg->lambda : 0.0) * lb.cfa;
    result.trace.epochs.push_back(lb);
    if (!std::isfinite(lb.total)) {
      throw TrainingDiverged(fmt::format("training diverged at epoch {}", epoch), result.trace);
    }
  }
  return result;
}

inline std::vector<int> predict(const nn::FusionModel& model, const Matrix& x) {
  return nn::argmax_labels(model.forward(x, nn::Mode::kEval, nullptr, nullptr));
}

struct Evaluation {
  std::vector<int> predictions;
  fairmetrics::ConfusionCounts counts;
  fairmetrics::MetricSet metrics;
  fairmetrics::FairnessReport fairness;
  bool collapsed = false;
};

inline Evaluation evaluate(const std::vector<int>& predictions, std::span<const int> labels,
                           std::span<const std::optional<int>> groups, const std::string& attribute) {
  Evaluation e;
  e.predictions = predictions;
  for (std::size_t i = 0; i < labels.size(); ++i) e.counts.add(labels[i], predictions[i]);
  e.metrics = fairmetrics::classification_metrics(e.counts);
  std::vector<std::optional<int>> as_opt(predictions.begin(), predictions.end());
  e.fairness = fairmetrics::fairness_report(attribute, labels, as_opt, groups);
  e.collapsed = fairmetrics::is_collapsed(predictions);
  return e;
}

// ---- gradient check ----------------------------------------------------------

namespace detail {

template <typename LossFn>
double max_relative_error(nn::FusionModel& model, const std::vector<std::vector<nn::Linear>>& analytic,
                          LossFn&& loss, double step) {
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + step;
    const double up = loss();
    param = saved - step;
    const double down = loss();
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(a), std::abs(numeric));
    if (denom > 1e-10) worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  auto blocks = model.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t l = 0; l < blocks[b]->layers.size(); ++l) {
      auto& layer = blocks[b]->layers[l];
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
        check(layer.weight.data()[i], analytic[b][l].weight.data()[i]);
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
        check(layer.bias.data()[i], analytic[b][l].bias.data()[i]);
      }
    }
  }
  return worst;
}

}  // namespace detail

inline constexpr double kGradientCheckStep = 1e-5;

/// Summed weighted cross-entropy (eval mode) and its parameter gradients.
inline std::pair<double, std::vector<std::vector<nn::Linear>>> loss_and_gradient(
    const nn::FusionModel& model, const Matrix& x, std::span<const int> y,
    const nn::ClassWeights& w) {
  nn::FusionModel::Cache cache;
  const Matrix logits = model.forward(x, nn::Mode::kEval, nullptr, &cache);
  const auto ce = nn::weighted_cross_entropy(logits, y, w);
  return {ce.sum, model.backward(cache, ce.d_logits, true, false).grads};
}

/// Max relative error between backprop and central finite differences of the
/// summed weighted cross-entropy, over every parameter.
inline double gradient_check(nn::FusionModel model, const Matrix& x, std::span<const int> y,
                             const nn::ClassWeights& w = {}, double step = kGradientCheckStep) {
  const auto analytic = loss_and_gradient(model, x, y, w).second;
  return detail::max_relative_error(
      model, analytic, [&] { return loss_and_gradient(model, x, y, w).first; }, step);
}

/// Same check for the attribution penalty's weight gradients.
inline double penalty_gradient_check(nn::FusionModel model, const Matrix& x,
                                     std::span<const std::optional<int>> groups,
                                     const cfa::CfaConfig& cfg, double step = kGradientCheckStep) {
  const auto analytic = cfa::cfa_penalty_gradient(model, x, groups, cfg).grads;
  return detail::max_relative_error(
      model, analytic,
      [&] { return cfa::cfa_penalty_gradient(model, x, groups, cfg).penalty.value; }, step);
}

// ---- ablation ----------------------------------------------------------------

struct AblationCell {
  std::string source;  // text-embedding source name
  nn::AblationConfig config = nn::AblationConfig::kFullFusion;
  int head_input_dim = 0;
  std::optional<std::string> skipped;
  double accuracy = 0.0;
  double f1 = 0.0;
  MaybeReal delta_eo;
  bool collapsed = false;
  fairmetrics::ConfusionCounts counts;
};

struct AblationTable {
  std::vector<std::string> sources;
  std::vector<AblationCell> cells;  // config-major, then source

  [[nodiscard]] const AblationCell& at(nn::AblationConfig c, const std::string& source) const {
    for (const auto& cell : cells) {
      if (cell.config == c && cell.source == source) return cell;
    }
    throw std::out_of_range("ablation cell not found");
  }
};

struct ExperimentSetup {
  TrainConfig train;
  nn::Architecture architecture;  // input dims filled from the data
  std::string attribute = "gender";
  std::string majority = "male";
  int parallelism = 1;
};

/// Runs `jobs` with at most `cap` threads; job i writes only its own slot.
template <typename Fn>
void parallel_for(std::size_t jobs, int cap, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, cap));
  if (workers == 1 || jobs < 2) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, jobs); ++w) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Train/test matrices for one modality configuration, standardized on the
/// training rows.
struct PreparedSplit {
  TrainData train;
  Matrix test_x;
  std::vector<int> test_y;
  std::vector<std::optional<int>> test_group;
  nn::Architecture arch;
};

inline PreparedSplit prepare(const dataset::Dataset& ds, const ModalityInputs& inputs,
                             nn::ModalityMask mask, const Split& split, const ExperimentSetup& setup) {
  const auto [train_rows, test_rows] = resolve_split(split, ds.records);
  const auto groups = dataset::assign_groups(ds.records, setup.attribute, setup.majority);
  PreparedSplit p;
  const Matrix raw_train = assemble(inputs, mask, train_rows);
  const auto z = Standardizer::fit(raw_train);
  p.train.x = z.apply(raw_train);
  p.test_x = z.apply(assemble(inputs, mask, test_rows));
  for (auto r : train_rows) {
    p.train.y.push_back(ds.records[r].label);
    p.train.group.push_back(groups.flag[r]);
  }
  for (auto r : test_rows) {
    p.test_y.push_back(ds.records[r].label);
    p.test_group.push_back(groups.flag[r]);
  }
  p.arch = architecture_for(inputs, setup.architecture);
  return p;
}

/// One model per modality configuration and text source, evaluated on the
/// split's test sessions.
inline AblationTable run_ablation(const dataset::Dataset& ds, const Split& split,
                                  const std::vector<TextEmbeddingSource>& sources,
                                  const ExperimentSetup& setup) {
  if (sources.empty()) throw ConfigError("run_ablation: at least one text-embedding source");
  AblationTable table;
  std::vector<ModalityInputs> inputs;
  for (const auto& s : sources) {
    table.sources.push_back(s.name);
    inputs.push_back(modality_inputs(ds, s));
  }
  for (auto c : nn::kAllAblations) {
    for (const auto& s : sources) {
      AblationCell cell;
      cell.source = s.name;
      cell.config = c;
      table.cells.push_back(std::move(cell));
    }
  }
  parallel_for(table.cells.size(), setup.parallelism, [&](std::size_t i) {
    auto& cell = table.cells[i];
    const auto& in = inputs[i % sources.size()];
    const auto mask = nn::modalities_of(cell.config);
    if (auto why = missing_modality(in, mask)) {
      cell.skipped = *why;
      return;
    }
    const auto prep = prepare(ds, in, mask, split, setup);
    auto model = nn::FusionModel::create(prep.arch, mask, setup.train.seed);
    cell.head_input_dim = model.fused_dim();
    const auto trained = train(std::move(model), prep.train, setup.train);
    const auto eval = evaluate(predict(trained.model, prep.test_x), prep.test_y, prep.test_group,
                               setup.attribute);
    cell.accuracy = eval.metrics.accuracy;
    cell.f1 = eval.metrics.f1;
    cell.delta_eo = eval.fairness.eo;
    cell.collapsed = eval.collapsed;
    cell.counts = eval.counts;
  });
  return table;
}

// ---- checkpoints -------------------------------------------------------------
//
// Layout (little-endian):
//   8 bytes  magic "FXAICKPT"
//   u32      version (1)
//   i32 x 8  text_in, audio_in, facial_in, text_embed, audio_embed,
//            facial_embed, encoder_hidden, head_hidden
//   f64      dropout
//   u8 x 3   active text, audio, facial
//   u32      tensor count
//   per tensor: u32 rows, u32 cols, rows*cols f64 in row-major order
// Tensors follow the block order text, audio, facial, head; within a block,
// each layer's weight (out x in) then bias (out x 1).

inline constexpr char kCheckpointMagic[8] = {'F', 'X', 'A', 'I', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline std::string serialize_checkpoint(const nn::FusionModel& model) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  auto put = [&out](const auto& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put(kCheckpointVersion);
  const auto& a = model.arch;
  for (std::int32_t v : {a.text_input_dim, a.audio_input_dim, a.facial_input_dim, a.text_embed_dim,
                         a.audio_embed_dim, a.facial_embed_dim, a.encoder_hidden, a.head_hidden}) {
    put(v);
  }
  put(a.dropout);
  for (bool b : {model.active.text, model.active.audio, model.active.facial}) {
    put(static_cast<std::uint8_t>(b ? 1 : 0));
  }
  std::uint32_t count = 0;
  for (const auto* b : model.blocks()) count += static_cast<std::uint32_t>(2 * b->layers.size());
  put(count);
  auto put_tensor = [&](const Matrix& m) {
    put(static_cast<std::uint32_t>(m.rows()));
    put(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put(m(r, c));
    }
  };
  for (const auto* b : model.blocks()) {
    for (const auto& l : b->layers) {
      put_tensor(l.weight);
      put_tensor(Matrix(l.bias));
    }
  }
  return out;
}

inline nn::FusionModel deserialize_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto get = [&](auto& v) {
    if (pos + sizeof(v) > bytes.size()) throw DataError("checkpoint truncated");
    std::memcpy(&v, bytes.data() + pos, sizeof(v));
    pos += sizeof(v);
  };
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw DataError("not a fusion checkpoint");
  }
  pos = 8;
  std::uint32_t version = 0;
  get(version);
  if (version != kCheckpointVersion) {
    throw DataError(fmt::format("unsupported checkpoint version {}", version));
  }
  nn::Architecture a;
  std::int32_t dims[8];
  for (auto& d : dims) get(d);
  a.text_input_dim = dims[0];
  a.audio_input_dim = dims[1];
  a.facial_input_dim = dims[2];
  a.text_embed_dim = dims[3];
  a.audio_embed_dim = dims[4];
  a.facial_embed_dim = dims[5];
  a.encoder_hidden = dims[6];
  a.head_hidden = dims[7];
  get(a.dropout);
  std::uint8_t flags[3];
  for (auto& f : flags) get(f);
  auto model = nn::FusionModel::create(a, {flags[0] != 0, flags[1] != 0, flags[2] != 0}, 0);
  std::uint32_t count = 0;
  get(count);
  auto get_tensor = [&](Eigen::Index rows, Eigen::Index cols) {
    std::uint32_t r = 0;
    std::uint32_t c = 0;
    get(r);
    get(c);
    if (r != rows || c != cols) throw DataError("checkpoint tensor shape mismatch");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) get(m(i, j));
    }
    return m;
  };
  std::uint32_t expected = 0;
  for (auto* b : model.blocks()) expected += static_cast<std::uint32_t>(2 * b->layers.size());
  if (count != expected) throw DataError("checkpoint tensor count mismatch");
  for (auto* b : model.blocks()) {
    for (auto& l : b->layers) {
      l.weight = get_tensor(l.weight.rows(), l.weight.cols());
      l.bias = get_tensor(l.bias.size(), 1).col(0);
    }
  }
  if (pos != bytes.size()) throw DataError("trailing bytes in checkpoint");
  return model;
}

}  // namespace fairxai::embedpipe
