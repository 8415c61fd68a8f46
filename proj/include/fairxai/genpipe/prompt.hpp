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

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fairxai/common.hpp"
#include "fairxai/dataset.hpp"
#include "fairxai/featsel.hpp"

namespace fairxai::genpipe {

inline constexpr int kMaxOutputTokens = 150;

inline constexpr std::string_view kDemographicsHeader = "Participant demographics:";
inline constexpr std::string_view kBiomarkersHeader = "Selected clinical biomarkers:";
inline constexpr std::string_view kTaskHeader = "Task:";

// Phrases every intervention prompt must carry, one per fairness rule.
inline constexpr std::array<std::string_view, 4> kFairnessRuleMarkers = {
    "only on clinical indicators",
    "Ignore demographic factors",
    "same standards",
    "correct your reasoning",
};

/// The three instruction templates. Shipped as versioned text files under
/// data/templates/ and mirrored here as the built-in defaults.
struct PromptTemplates {
  std::string version = "v1";
  std::string task =
      "Based on the demographic information and clinical biomarkers above, assess whether "
      "this participant shows signs of depression. Respond with a score for the predicted "
      "label (Depressed or Not Depressed) and brief reasoning.";
  std::string reasoning_directive =
      "Before answering, reason step by step inside a <thinking></thinking> block, citing "
      "the biomarkers you rely on. Then give your final label inside a "
      "<classification></classification> block containing exactly \"Depressed\" or "
      "\"Not Depressed\".";
  std::string fairness_rules =
      "Fairness rules:\n"
      "1. Base your assessment only on clinical indicators from the biomarker list.\n"
      "2. Ignore demographic factors such as gender and race.\n"
      "3. Apply the same standards to every demographic group.\n"
      "4. If you notice yourself making a demographic assumption, stop and correct your "
      "reasoning.";

  /// Hash over version and all three bodies; recorded in run manifests.
  [[nodiscard]] std::string hash() const {
    return sha256_hex(version + '\0' + task + '\0' + reasoning_directive + '\0' + fairness_rules);
  }

  /// Loads task.txt, reasoning.txt, fairness_rules.txt and VERSION from a directory.
  static PromptTemplates load(const std::filesystem::path& dir) {
    PromptTemplates t;
    auto body = [&](const char* name) {
      return std::string(trim(read_text_file(dir / name)));
    };
    t.version = body("VERSION");
    t.task = body("task.txt");
    t.reasoning_directive = body("reasoning.txt");
    t.fairness_rules = body("fairness_rules.txt");
    return t;
  }
};

/// P = D ⊕ B ⊕ T for one session.
struct PromptBundle {
  std::string session_id;
  std::vector<std::pair<std::string, std::string>> demographics;  // sorted by attribute
  std::vector<std::pair<std::string, double>> biomarkers;         // ranking order
  std::string task;
  Variant variant = Variant::kBaseline;
  int max_output_tokens = kMaxOutputTokens;

  [[nodiscard]] std::string render_demographics() const {
    std::string out(kDemographicsHeader);
    out += '\n';
    if (demographics.empty()) out += "- none declared\n";
    for (const auto& [k, v] : demographics) out += fmt::format("- {}: {}\n", k, v);
    return out;
  }

  [[nodiscard]] std::string render_biomarkers() const {
    std::string out(kBiomarkersHeader);
    out += '\n';
    if (biomarkers.empty()) out += "- none selected\n";
    for (const auto& [k, v] : biomarkers) out += fmt::format("- {}: {}\n", k, format_value(v));
    return out;
  }

  [[nodiscard]] std::string render_task() const {
    return fmt::format("{}\n{}\n", kTaskHeader, task);
  }

  [[nodiscard]] std::string render() const {
    return render_demographics() + '\n' + render_biomarkers() + '\n' + render_task();
  }

  /// Six significant digits, so prompts are byte-stable across platforms.
  static std::string format_value(double v) {
    if (v == 0.0) v = 0.0;
    return fmt::format("{:.6g}", v);
  }
};

inline std::string task_block(Variant variant, const PromptTemplates& templates) {
  if (variant == Variant::kBaseline) return templates.task;
  return templates.task + "\n" + templates.reasoning_directive + "\n" + templates.fairness_rules;
}

inline PromptBundle build_prompt(const dataset::SessionRecord& record,
                                 const dataset::FeatureSchema& schema,
                                 const featsel::FeatureRanking& ranking, Variant variant,
                                 const PromptTemplates& templates = {}) {
  PromptBundle b;
  b.session_id = record.session_id;
  b.variant = variant;
  for (const auto& [k, v] : record.demographics) b.demographics.emplace_back(k, v);
  for (const auto& f : ranking.top()) {
    const auto col = schema.index_of(f.name);
    if (!col || *col >= record.features.size()) {
      throw DataError(fmt::format("session '{}' has no value for biomarker '{}'",
                                  record.session_id, f.name));
    }
    b.biomarkers.emplace_back(f.name, record.features[*col]);
  }
  b.task = task_block(variant, templates);
  return b;
}

}  // namespace fairxai::genpipe
