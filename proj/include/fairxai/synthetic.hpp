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

// Seeded synthetic cohorts with planted structure, and writers that lay them
// out on disk in the per-session layout the loader reads.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairxai/common.hpp"
#include "fairxai/dataset.hpp"
#include "fairxai/embedpipe.hpp"

namespace fairxai::synth {

enum class Kind {
  kBiasInjection,  // F0_mean separates the classes exactly; everything else is noise
  kPlantedSignal,  // audio carries the label, facial is pure noise
  kPlantedProxy,   // one audio column tracks gender, which is correlated with the label
};

inline Kind parse_kind(std::string_view s) {
  if (s == "bias") return Kind::kBiasInjection;
  if (s == "signal") return Kind::kPlantedSignal;
  if (s == "proxy") return Kind::kPlantedProxy;
  throw ConfigError(fmt::format("unknown synthetic cohort '{}' (bias|signal|proxy)", s));
}

struct Options {
  Kind kind = Kind::kBiasInjection;
  std::size_t sessions = 2000;
  std::uint64_t seed = 7;
  double positive_rate = 0.5;
  double majority_share = 0.5;  // share of gender == male
};

inline constexpr std::array<std::string_view, 4> kAudioNames = {"F0_mean", "jitter_local",
                                                                 "loudness_mean", "HNR_mean"};
inline constexpr std::array<std::string_view, 4> kFacialNames = {"AU04_r", "AU06_r", "AU12_r",
                                                                 "AU15_r"};

namespace detail {

inline constexpr std::array<std::string_view, 12> kWords = {
    "sleep",  "work",   "tired", "family", "weekend", "friends",
    "music",  "cooking", "walk", "school", "weather", "travel"};

inline std::string transcript(std::mt19937_64& rng) {
  std::string t = "I talked about";
  const int words = 6 + static_cast<int>(unit_uniform(rng) * 6);
  for (int i = 0; i < words; ++i) {
    t += ' ';
    t += kWords[static_cast<std::size_t>(unit_uniform(rng) * kWords.size())];
  }
  return t + ".";
}

inline std::string id(std::string_view prefix, std::size_t i, std::size_t n) {
  const auto width = std::to_string(n).size();
  return fmt::format("{}{:0{}}", prefix, i + 1, width);
}

}  // namespace detail

/// Deterministic cohort: labels come from PHQ-style scores binarized at 10;
/// gender and race are drawn independently of the label except in the proxy
/// cohort.
inline dataset::Dataset generate(const Options& opt) {
  if (opt.sessions < 4) throw ConfigError("synthetic cohort needs at least 4 sessions");
  std::mt19937_64 rng(opt.seed);
  dataset::Dataset ds;
  for (auto n : kAudioNames) {
    ds.schema.names.emplace_back(n);
    ds.schema.modality.push_back(dataset::Modality::kAudio);
  }
  for (auto n : kFacialNames) {
    ds.schema.names.emplace_back(n);
    ds.schema.modality.push_back(dataset::Modality::kFacial);
  }
  for (std::size_t i = 0; i < opt.sessions; ++i) {
    dataset::SessionRecord r;
    r.session_id = detail::id("S", i, opt.sessions);
    r.participant_id = detail::id("P", i, opt.sessions);
    const bool male = unit_uniform(rng) < opt.majority_share;
    const bool white = unit_uniform(rng) < 0.5;
    double p_pos = opt.positive_rate;
    if (opt.kind == Kind::kPlantedProxy) p_pos = male ? 0.25 : 0.75;
    const int label = unit_uniform(rng) < p_pos ? 1 : 0;
    const int score = label == 1 ? 10 + static_cast<int>(unit_uniform(rng) * 15)
                                 : static_cast<int>(unit_uniform(rng) * 10);
    r.raw_label = std::to_string(score);
    r.label = dataset::binarize_label(static_cast<double>(score));
    r.demographics["gender"] = male ? "male" : "female";
    r.demographics["race"] = white ? "white" : "black";

    std::vector<double> audio(kAudioNames.size());
    std::vector<double> facial(kFacialNames.size());
    switch (opt.kind) {
      case Kind::kBiasInjection:
        audio[0] = label == 1 ? 0.6 + 0.4 * unit_uniform(rng) : 0.4 * unit_uniform(rng);
        for (std::size_t j = 1; j < audio.size(); ++j) audio[j] = standard_normal(rng);
        for (auto& v : facial) v = standard_normal(rng);
        break;
      case Kind::kPlantedSignal:
        for (auto& v : audio) v = 1.5 * label + standard_normal(rng);
        for (auto& v : facial) v = standard_normal(rng);
        break;
      case Kind::kPlantedProxy:
        audio[0] = (male ? 1.0 : 0.0) + 0.1 * standard_normal(rng);
        for (std::size_t j = 1; j < audio.size(); ++j) audio[j] = 1.0 * label + standard_normal(rng);
        for (auto& v : facial) v = standard_normal(rng);
        break;
    }
    r.features = audio;
    r.features.insert(r.features.end(), facial.begin(), facial.end());
    r.transcript = detail::transcript(rng);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

/// Every fourth session (by position) goes to test.
inline embedpipe::Split default_split(const dataset::Dataset& ds) {
  embedpipe::Split s;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (i % 4 == 3 ? s.test : s.train).push_back(ds.records[i].session_id);
  }
  return s;
}

/// Rule set that reads F0_mean exactly, with an optional bias knob on gender.
inline nlohmann::json mock_rules_json(double minority_flip, std::uint64_t seed) {
  nlohmann::json j;
  j["rules"] = nlohmann::json::array({{{"feature", "F0_mean"},
                                       {"op", ">"},
                                       {"threshold", 0.5},
                                       {"label", 1},
                                       {"rationale",
                                        "Elevated {feature} of {value} is consistent with "
                                        "depressive vocal patterns."}}});
  j["default"] = {{"label", 0},
                  {"rationale", "F0_mean of {F0_mean} is within the typical range."}};
  j["bias"] = {{"attribute", "gender"},
               {"majority", "male"},
               {"minority_flip", minority_flip},
               {"majority_flip", 0.0}};
  j["seed"] = seed;
  return j;
}

inline std::string real_cell(double v) { return fmt::format("{:.17g}", v); }

/// Writes meta.csv, audio.csv, facial.csv, transcripts/ and manifest.json.
inline void write_per_session(const dataset::Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "transcripts");
  std::vector<std::string> demo_cols;
  if (!ds.records.empty()) {
    for (const auto& [k, _] : ds.records.front().demographics) demo_cols.push_back(k);
  }
  std::string meta = "session_id,participant_id,phq8";
  for (const auto& c : demo_cols) meta += "," + c;
  meta += '\n';
  std::string audio = "session_id";
  std::string facial = "session_id";
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    auto& t = ds.schema.modality[f] == dataset::Modality::kFacial ? facial : audio;
    t += "," + csv::escape(ds.schema.names[f]);
  }
  audio += '\n';
  facial += '\n';
  for (const auto& r : ds.records) {
    meta += fmt::format("{},{},{}", csv::escape(r.session_id), csv::escape(r.participant_id),
                        csv::escape(r.raw_label));
    for (const auto& c : demo_cols) {
      const auto it = r.demographics.find(c);
      meta += "," + (it == r.demographics.end() ? std::string() : csv::escape(it->second));
    }
    meta += '\n';
    audio += csv::escape(r.session_id);
    facial += csv::escape(r.session_id);
    for (std::size_t f = 0; f < ds.schema.size(); ++f) {
      auto& t = ds.schema.modality[f] == dataset::Modality::kFacial ? facial : audio;
      t += "," + real_cell(r.features[f]);
    }
    audio += '\n';
    facial += '\n';
    write_text_file(dir / "transcripts" / (r.session_id + ".txt"), r.transcript);
  }
  write_text_file(dir / "meta.csv", meta);
  write_text_file(dir / "audio.csv", audio);
  write_text_file(dir / "facial.csv", facial);

  nlohmann::json m;
  m["layout"] = "per-session";
  m["meta"] = {{"file", "meta.csv"},
               {"key_column", "session_id"},
               {"participant_column", "participant_id"},
               {"label_column", "phq8"},
               {"label_threshold", ds.label_threshold},
               {"demographic_columns", demo_cols}};
  m["tables"] = {{"audio", "audio.csv"}, {"facial", "facial.csv"}};
  m["transcripts_dir"] = "transcripts";
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

inline void write_split(const embedpipe::Split& s, const std::filesystem::path& path) {
  nlohmann::json j;
  j["train"] = s.train;
  j["test"] = s.test;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace fairxai::synth
