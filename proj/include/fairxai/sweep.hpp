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
#include <string>
#include <vector>

#include "fairxai/cfa.hpp"
#include "fairxai/embedpipe.hpp"

namespace fairxai::cfa {

struct SweepRow {
  double lambda = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  MaybeReal delta_eo;
  bool collapsed = false;
  LossBreakdown final_loss;  // last epoch
  fairmetrics::ConfusionCounts counts;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // lambda ascending
  std::vector<embedpipe::Evaluation> evaluations;
  std::vector<nn::FusionModel> models;
};

/// Input column names for a fused matrix: text_e<j>, then schema names of the
/// audio and facial columns.
inline std::vector<std::string> fused_feature_names(const dataset::FeatureSchema& schema,
                                                    const embedpipe::ModalityInputs& in,
                                                    nn::ModalityMask mask) {
  std::vector<std::string> names;
  if (mask.text) {
    for (Eigen::Index j = 0; j < in.text.cols(); ++j) names.push_back(fmt::format("text_e{}", j));
  }
  for (auto [on, m] : {std::pair{mask.audio, dataset::Modality::kAudio},
                       std::pair{mask.facial, dataset::Modality::kFacial}}) {
    if (!on) continue;
    for (auto i : schema.indices_of(m)) names.push_back(schema.names[i]);
  }
  return names;
}

/// One model per lambda (sorted ascending), each trained from the same seed on
/// the same split and evaluated on the test sessions.
inline SweepResult pareto_sweep(const dataset::Dataset& ds, const embedpipe::Split& split,
                                const embedpipe::TextEmbeddingSource& text,
                                std::vector<double> lambdas, const embedpipe::ExperimentSetup& setup,
                                CfaConfig base, nn::AblationConfig config = nn::AblationConfig::kFullFusion) {
  if (lambdas.empty()) throw ConfigError("pareto_sweep: empty lambda list");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError(fmt::format("invalid lambda {}", l));
  }
  std::sort(lambdas.begin(), lambdas.end());
  const auto inputs = embedpipe::modality_inputs(ds, text);
  const auto mask = nn::modalities_of(config);
  if (auto why = embedpipe::missing_modality(inputs, mask)) throw DataError(*why);
  const auto prep = embedpipe::prepare(ds, inputs, mask, split, setup);

  SweepResult out;
  out.rows.resize(lambdas.size());
  out.evaluations.resize(lambdas.size());
  out.models.resize(lambdas.size());
  embedpipe::parallel_for(lambdas.size(), setup.parallelism, [&](std::size_t i) {
    CfaConfig cfg = base;
    cfg.lambda = lambdas[i];
    auto model = nn::FusionModel::create(prep.arch, mask, setup.train.seed);
    auto trained = embedpipe::train(std::move(model), prep.train, setup.train, cfg);
    auto eval = embedpipe::evaluate(embedpipe::predict(trained.model, prep.test_x), prep.test_y,
                                    prep.test_group, setup.attribute);
    auto& row = out.rows[i];
    row.lambda = lambdas[i];
    row.accuracy = eval.metrics.accuracy;
    row.f1 = eval.metrics.f1;
    row.delta_eo = eval.fairness.eo;
    row.collapsed = eval.collapsed;
    row.final_loss = trained.trace.epochs.empty() ? LossBreakdown{} : trained.trace.epochs.back();
    row.counts = eval.counts;
    out.evaluations[i] = std::move(eval);
    out.models[i] = std::move(trained.model);
  });
  return out;
}

/// Long-format attribution dump: session_id,feature,ig.
inline std::string attribution_csv(std::span<const std::string> session_ids,
                                   std::span<const std::string> feature_names,
                                   const Matrix& attributions) {
  std::string out = "session_id,feature,ig\n";
  for (Eigen::Index i = 0; i < attributions.rows(); ++i) {
    for (Eigen::Index j = 0; j < attributions.cols(); ++j) {
      out += fmt::format("{},{},{:.10g}\n", csv::escape(session_ids[static_cast<std::size_t>(i)]),
                         csv::escape(feature_names[static_cast<std::size_t>(j)]), attributions(i, j));
    }
  }
  return out;
}

}  // namespace fairxai::cfa
