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

#include <cctype>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "fairxai/common.hpp"

namespace fairxai::genpipe {

struct ParsedResponse {
  std::optional<int> label;  // nullopt = abstain
  std::string rationale;
  std::optional<double> score;  // auxiliary; never interpreted
};

struct Prediction {
  std::string session_id;
  std::optional<int> label;  // nullopt = abstain
  std::string rationale;
  Variant variant = Variant::kBaseline;
  std::string backend_id;
  std::string raw_response;
  std::optional<double> score;
  std::string error;

  [[nodiscard]] bool abstained() const { return !label.has_value(); }
};

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// First whole-word occurrence of `phrase` in already-lowered `text`.
inline std::size_t find_word(std::string_view text, std::string_view phrase,
                             std::size_t from = 0) {
  for (std::size_t p = text.find(phrase, from); p != std::string_view::npos;
       p = text.find(phrase, p + 1)) {
    const bool left = p == 0 || !is_word_char(text[p - 1]);
    const std::size_t end = p + phrase.size();
    const bool right = end >= text.size() || !is_word_char(text[end]);
    if (left && right) return p;
  }
  return std::string_view::npos;
}

// "not depressed" is checked first; "depressed" is a substring of it.
inline std::optional<int> label_in(std::string_view lowered) {
  if (find_word(lowered, "not depressed") != std::string_view::npos) return 0;
  if (find_word(lowered, "depressed") != std::string_view::npos) return 1;
  return std::nullopt;
}

inline std::optional<double> numeric_score(const std::string& raw) {
  static const std::regex re(R"(score\s*[:=]?\s*(-?[0-9]+(?:\.[0-9]+)?))", std::regex::icase);
  std::smatch m;
  if (std::regex_search(raw, m, re)) return std::stod(m[1].str());
  return std::nullopt;
}

}  // namespace detail

/// Intervention grammar: rationale from the innermost <thinking> block, label
/// from the <classification> block. Baseline grammar: earliest label phrase
/// anywhere in the text, with the text before it kept as rationale.
inline ParsedResponse parse_response(const std::string& raw, Variant variant) {
  ParsedResponse out;
  out.score = detail::numeric_score(raw);
  const std::string lowered = to_lower(raw);

  if (variant == Variant::kIntervention) {
    const auto close_t = lowered.find("</thinking>");
    if (close_t != std::string::npos) {
      const auto open_t = lowered.rfind("<thinking>", close_t);
      if (open_t != std::string::npos) {
        const auto start = open_t + std::string_view("<thinking>").size();
        out.rationale = std::string(trim(std::string_view(raw).substr(start, close_t - start)));
      }
    }
    const auto open_c = lowered.find("<classification>");
    if (open_c == std::string::npos) return out;
    const auto start = open_c + std::string_view("<classification>").size();
    const auto close_c = lowered.find("</classification>", start);
    if (close_c == std::string::npos) return out;
    out.label = detail::label_in(std::string_view(lowered).substr(start, close_c - start));
    return out;
  }

  const auto not_pos = detail::find_word(lowered, "not depressed");
  const auto dep_pos = detail::find_word(lowered, "depressed");
  if (dep_pos == std::string::npos) return out;
  std::size_t match = dep_pos;
  if (not_pos != std::string::npos && not_pos < dep_pos) {
    match = not_pos;
    out.label = 0;
  } else {
    out.label = 1;
  }
  out.rationale = std::string(trim(std::string_view(raw).substr(0, match)));
  return out;
}

/// The intervention-grammar reply for a label; parse_response inverts it.
inline std::string render_classification(int label, std::string_view rationale) {
  return fmt::format("<thinking>{}</thinking>\n<classification>{}</classification>", rationale,
                     label == 1 ? "Depressed" : "Not Depressed");
}

}  // namespace fairxai::genpipe
