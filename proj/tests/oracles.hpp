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

// Reference implementations written straight from the metric definitions.
// They share no code with the library: each one filters the raw session
// lists and counts, with no confusion-count bookkeeping in between.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace fairxai::oracle {

struct Session {
  int label = 0;
  std::optional<int> prediction;  // nullopt = abstained
  std::optional<int> group;       // 1 majority, 0 minority, nullopt unknown
  int quality = 0;                // q-hat, only meaningful when answered
};

struct Fairness {
  std::optional<double> ea;
  std::optional<double> eo;
  std::optional<double> di;
  std::optional<double> delta_ref;
};

inline std::vector<Session> members(const std::vector<Session>& all, int g) {
  std::vector<Session> out;
  for (const auto& s : all) {
    if (s.prediction && s.group && *s.group == g) out.push_back(s);
  }
  return out;
}

inline std::optional<double> accuracy(const std::vector<Session>& g) {
  if (g.empty()) return std::nullopt;
  std::int64_t correct = 0;
  for (const auto& s : g) correct += *s.prediction == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(g.size());
}

inline std::optional<double> true_positive_rate(const std::vector<Session>& g) {
  std::int64_t positives = 0;
  std::int64_t caught = 0;
  for (const auto& s : g) {
    if (s.label != 1) continue;
    ++positives;
    caught += *s.prediction == 1 ? 1 : 0;
  }
  if (positives == 0) return std::nullopt;
  return static_cast<double>(caught) / static_cast<double>(positives);
}

inline std::optional<double> predicted_positive_rate(const std::vector<Session>& g) {
  if (g.empty()) return std::nullopt;
  std::int64_t pos = 0;
  for (const auto& s : g) pos += *s.prediction == 1 ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(g.size());
}

inline std::optional<double> high_quality_rate(const std::vector<Session>& g) {
  if (g.empty()) return std::nullopt;
  std::int64_t hq = 0;
  for (const auto& s : g) hq += s.quality == 1 ? 1 : 0;
  return static_cast<double>(hq) / static_cast<double>(g.size());
}

inline std::optional<double> abs_gap(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  return std::abs(*a - *b);
}

inline Fairness enumerate(const std::vector<Session>& sessions) {
  const auto minority = members(sessions, 0);
  const auto majority = members(sessions, 1);
  Fairness f;
  f.ea = abs_gap(accuracy(majority), accuracy(minority));
  f.eo = abs_gap(true_positive_rate(majority), true_positive_rate(minority));
  const auto r0 = predicted_positive_rate(minority);
  const auto r1 = predicted_positive_rate(majority);
  if (r0 && r1 && *r1 != 0.0) f.di = *r0 / *r1;
  f.delta_ref = abs_gap(high_quality_rate(minority), high_quality_rate(majority));
  return f;
}

/// Random audit dataset: up to `max_sessions` sessions with abstentions,
/// unknown groups, and skewed rates so every undefined branch gets exercised.
inline std::vector<Session> random_sessions(std::mt19937_64& rng, std::size_t max_sessions) {
  std::uniform_int_distribution<std::size_t> size(1, max_sessions);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double p_label = u(rng);
  const double p_pred = u(rng);
  const double p_major = u(rng);
  const double p_quality = u(rng);
  const double p_abstain = 0.2 * u(rng);
  const double p_unknown = 0.2 * u(rng);
  std::vector<Session> out(size(rng));
  for (auto& s : out) {
    s.label = u(rng) < p_label ? 1 : 0;
    if (u(rng) >= p_abstain) s.prediction = u(rng) < p_pred ? 1 : 0;
    if (u(rng) >= p_unknown) s.group = u(rng) < p_major ? 1 : 0;
    s.quality = u(rng) < p_quality ? 1 : 0;
  }
  return out;
}

/// I(X;Y) in nats by direct summation over a joint probability table.
inline double mutual_information(const std::vector<std::vector<double>>& joint) {
  std::vector<double> px(joint.size(), 0.0);
  std::vector<double> py(joint.empty() ? 0 : joint.front().size(), 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    for (std::size_t j = 0; j < joint[i].size(); ++j) {
      px[i] += joint[i][j];
      py[j] += joint[i][j];
    }
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    for (std::size_t j = 0; j < joint[i].size(); ++j) {
      if (joint[i][j] > 0.0) mi += joint[i][j] * std::log(joint[i][j] / (px[i] * py[j]));
    }
  }
  return mi;
}

/// Empirical joint table of two discrete code vectors.
inline std::vector<std::vector<double>> joint_table(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<int, std::size_t> xi;
  std::map<int, std::size_t> yi;
  for (int v : x) xi.emplace(v, 0);
  for (int v : y) yi.emplace(v, 0);
  std::size_t k = 0;
  for (auto& [_, i] : xi) i = k++;
  k = 0;
  for (auto& [_, i] : yi) i = k++;
  std::vector<std::vector<double>> t(xi.size(), std::vector<double>(yi.size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) t[xi[x[i]]][yi[y[i]]] += 1.0 / static_cast<double>(x.size());
  return t;
}

}  // namespace fairxai::oracle
