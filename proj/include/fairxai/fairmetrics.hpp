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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairxai/common.hpp"

namespace fairxai::fairmetrics {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  [[nodiscard]] std::int64_t total() const { return tp + fp + fn + tn; }
  [[nodiscard]] std::int64_t actual_positives() const { return tp + fn; }
  [[nodiscard]] std::int64_t predicted_positives() const { return tp + fp; }

  void add(int label, int prediction) {
    if (label == 1) {
      prediction == 1 ? ++tp : ++fn;
    } else {
      prediction == 1 ? ++fp : ++tn;
    }
  }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }

  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricSet {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fnr = 0.0;
  double fdr = 0.0;
  double kappa = 0.0;
};

namespace detail {
inline double ratio_or_zero(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

/// Zero-denominator conventions: precision, recall, F1, FNR and FDR are 0;
/// κ is 0 when expected agreement is 1. A collapsed model thus scores F1 = 0.
inline MetricSet classification_metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw DataError("classification_metrics: no predictions");
  using detail::ratio_or_zero;
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  const auto tn = static_cast<double>(c.tn);
  const double n = tp + fp + fn + tn;

  MetricSet m;
  m.accuracy = (tp + tn) / n;
  m.precision = ratio_or_zero(tp, tp + fp);
  m.recall = ratio_or_zero(tp, tp + fn);
  m.f1 = ratio_or_zero(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.fnr = ratio_or_zero(fn, fn + tp);
  m.fdr = ratio_or_zero(fp, fp + tp);
  const double tnr = ratio_or_zero(tn, tn + fp);
  m.balanced_accuracy = 0.5 * (m.recall + tnr);
  const double p_o = m.accuracy;
  const double p_e = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n);
  m.kappa = p_e == 1.0 ? 0.0 : (p_o - p_e) / (1.0 - p_e);
  return m;
}

// ---- group fairness --------------------------------------------------------
// Group 1 is the majority (A = 1), group 0 the minority or protected group.

inline MaybeReal accuracy_of(const ConfusionCounts& c) {
  if (c.total() == 0) return std::nullopt;
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline MaybeReal tpr_of(const ConfusionCounts& c) {
  if (c.actual_positives() == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.actual_positives());
}

inline MaybeReal positive_rate_of(const ConfusionCounts& c) {
  if (c.total() == 0) return std::nullopt;
  return static_cast<double>(c.predicted_positives()) / static_cast<double>(c.total());
}

/// |acc(A=1) - acc(A=0)|; undefined when either group is empty.
inline MaybeReal equal_accuracy(const ConfusionCounts& group0, const ConfusionCounts& group1) {
  const auto a0 = accuracy_of(group0);
  const auto a1 = accuracy_of(group1);
  if (!a0 || !a1) return std::nullopt;
  return std::abs(*a1 - *a0);
}

/// |TPR(A=1) - TPR(A=0)|; undefined when either group has no actual positives.
inline MaybeReal equal_opportunity(const ConfusionCounts& group0, const ConfusionCounts& group1) {
  const auto t0 = tpr_of(group0);
  const auto t1 = tpr_of(group1);
  if (!t0 || !t1) return std::nullopt;
  return std::abs(*t1 - *t0);
}

/// P(ŷ=1|A=0) / P(ŷ=1|A=1); undefined for an empty group or a zero majority rate.
inline MaybeReal disparate_impact(const ConfusionCounts& group0, const ConfusionCounts& group1) {
  const auto r0 = positive_rate_of(group0);
  const auto r1 = positive_rate_of(group1);
  if (!r0 || !r1 || *r1 == 0.0) return std::nullopt;
  return *r0 / *r1;
}

inline constexpr std::int64_t kMinGroupSize = 5;

/// True when every prediction is the same class.
inline bool is_collapsed(std::span<const int> predictions) {
  if (predictions.empty()) return false;
  for (int p : predictions) {
    if (p != predictions.front()) return false;
  }
  return true;
}

struct FairnessReport {
  std::string attribute;
  ConfusionCounts group0;  // minority, A = 0
  ConfusionCounts group1;  // majority, A = 1
  MaybeReal ea;
  MaybeReal eo;
  MaybeReal di;
  std::size_t excluded = 0;    // no attribute value
  std::size_t abstained = 0;   // not counted in either group
  bool low_confidence = false; // a group smaller than kMinGroupSize
  bool vacuous = false;        // collapsed predictions: gaps carry no information
};

/// Audits one attribute. `predictions` entries that are nullopt (abstentions)
/// and sessions whose `groups` entry is nullopt are left out of both groups.
inline FairnessReport fairness_report(std::string attribute, std::span<const int> labels,
                                      std::span<const std::optional<int>> predictions,
                                      std::span<const std::optional<int>> groups) {
  if (labels.size() != predictions.size() || labels.size() != groups.size()) {
    throw DataError("fairness_report: length mismatch");
  }
  FairnessReport r;
  r.attribute = std::move(attribute);
  std::vector<int> answered;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!predictions[i]) {
      ++r.abstained;
      continue;
    }
    answered.push_back(*predictions[i]);
    if (!groups[i]) {
      ++r.excluded;
      continue;
    }
    (*groups[i] == 1 ? r.group1 : r.group0).add(labels[i], *predictions[i]);
  }
  r.ea = equal_accuracy(r.group0, r.group1);
  r.eo = equal_opportunity(r.group0, r.group1);
  r.di = disparate_impact(r.group0, r.group1);
  r.low_confidence = r.group0.total() < kMinGroupSize || r.group1.total() < kMinGroupSize;
  r.vacuous = is_collapsed(answered);
  return r;
}

// ---- explanation quality ---------------------------------------------------

/// Gender and race terms plus pronouns. Shipped as data/lexicon/demographic_terms.txt.
struct DemographicLexicon {
  std::string version = "v1";
  std::vector<std::string> terms = {
      "male",     "female",   "man",       "woman",     "men",       "women",    "boy",
      "girl",     "gender",   "sex",       "masculine", "feminine",  "he",       "she",
      "him",      "her",      "his",       "hers",      "himself",   "herself",  "race",
      "racial",   "ethnicity", "ethnic",   "white",     "black",     "asian",    "hispanic",
      "latino",   "latina",   "caucasian", "african",   "non-white", "nonwhite", "minority",
  };

  [[nodiscard]] std::string hash() const {
    std::string joined = version;
    for (const auto& t : terms) joined += '\n' + t;
    return sha256_hex(joined);
  }

  /// One term per line; blank lines and '#' comments skipped; the first
  /// comment of the form "# version: X" sets the version.
  static DemographicLexicon parse(std::string_view text) {
    DemographicLexicon lex;
    lex.terms.clear();
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      const auto line = trim(text.substr(pos, end - pos));
      pos = end + 1;
      if (line.empty()) continue;
      if (line.front() == '#') {
        const auto v = line.find("version:");
        if (v != std::string_view::npos) lex.version = std::string(trim(line.substr(v + 8)));
        continue;
      }
      lex.terms.push_back(to_lower(line));
    }
    return lex;
  }

  static DemographicLexicon load(const std::filesystem::path& path) {
    return parse(read_text_file(path));
  }
};

struct ExplanationQuality {
  bool high_quality = false;
  std::vector<std::string> matched_biomarkers;
  std::vector<std::string> matched_demographic_terms;
};

namespace detail {

inline bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline bool contains_word(std::string_view text, std::string_view term) {
  if (term.empty()) return false;
  for (auto p = text.find(term); p != std::string_view::npos; p = text.find(term, p + 1)) {
    const bool left = p == 0 || !word_char(text[p - 1]);
    const auto end = p + term.size();
    const bool right = end >= text.size() || !word_char(text[end]);
    if (left && right) return true;
  }
  return false;
}

// Lowercase, underscores to spaces, whitespace runs collapsed.
inline std::string space_normalized(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    const bool space = c == '_' || std::isspace(static_cast<unsigned char>(c));
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace detail

/// q̂ = 1 iff the rationale cites at least one prompted biomarker and no
/// demographic-lexicon term. Matching is case-insensitive on whole words; a
/// biomarker also matches with underscores written as spaces.
inline ExplanationQuality explanation_quality(std::string_view rationale,
                                              std::span<const std::string> prompted_biomarkers,
                                              const DemographicLexicon& lexicon) {
  ExplanationQuality q;
  const std::string lowered = to_lower(rationale);
  const std::string normalized = detail::space_normalized(rationale);
  for (const auto& name : prompted_biomarkers) {
    const std::string lname = to_lower(name);
    if (detail::contains_word(lowered, lname) ||
        detail::contains_word(normalized, detail::space_normalized(name))) {
      q.matched_biomarkers.push_back(name);
    }
  }
  for (const auto& term : lexicon.terms) {
    if (detail::contains_word(lowered, term)) q.matched_demographic_terms.push_back(term);
  }
  q.high_quality = !q.matched_biomarkers.empty() && q.matched_demographic_terms.empty();
  return q;
}

/// |P(q̂=1|A=0) - P(q̂=1|A=1)|; undefined when either group has no scored explanation.
inline MaybeReal delta_ref(std::span<const int> quality, std::span<const std::optional<int>> groups) {
  if (quality.size() != groups.size()) throw DataError("delta_ref: length mismatch");
  std::int64_t n[2] = {0, 0};
  std::int64_t hq[2] = {0, 0};
  for (std::size_t i = 0; i < quality.size(); ++i) {
    if (!groups[i]) continue;
    const int g = *groups[i] == 1 ? 1 : 0;
    ++n[g];
    hq[g] += quality[i] == 1 ? 1 : 0;
  }
  if (n[0] == 0 || n[1] == 0) return std::nullopt;
  return std::abs(static_cast<double>(hq[0]) / static_cast<double>(n[0]) -
                  static_cast<double>(hq[1]) / static_cast<double>(n[1]));
}

}  // namespace fairxai::fairmetrics
