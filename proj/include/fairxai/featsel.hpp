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
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fairxai/common.hpp"
#include "fairxai/csv.hpp"
#include "fairxai/dataset.hpp"

namespace fairxai::featsel {

inline constexpr int kDefaultBins = 10;

/// Equal-frequency bin index per sample. Tied values always share a bin, so
/// a constant column maps to a single bin.
inline std::vector<int> equal_frequency_bins(std::span<const double> x, int bins) {
  if (bins < 2) throw ConfigError("equal_frequency_bins: bins must be >= 2");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<int> out(n, 0);
  std::size_t run_start = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && x[order[r]] != x[order[r - 1]]) run_start = r;
    out[order[r]] = static_cast<int>((run_start * static_cast<std::size_t>(bins)) / n);
  }
  return out;
}

/// I(X;Y) in nats over already-discrete codes, from the empirical joint.
inline double mutual_information_discrete(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw DataError("mutual_information: length mismatch");
  if (x.size() < 2) throw DataError("mutual_information: need at least 2 samples");
  std::map<std::pair<int, int>, std::size_t> joint;
  std::map<int, std::size_t> px;
  std::map<int, std::size_t> py;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++joint[{x[i], y[i]}];
    ++px[x[i]];
    ++py[y[i]];
  }
  if (py.size() < 2 || px.size() < 2) return 0.0;
  const auto n = static_cast<double>(x.size());
  double mi = 0.0;
  for (const auto& [xy, c] : joint) {
    const double pxy = static_cast<double>(c) / n;
    const double pxv = static_cast<double>(px[xy.first]) / n;
    const double pyv = static_cast<double>(py[xy.second]) / n;
    mi += pxy * std::log(pxy / (pxv * pyv));
  }
  return mi < 0.0 ? 0.0 : mi;
}

/// MI between a continuous feature (equal-frequency discretized) and a binary label.
inline double mutual_information(std::span<const double> x, std::span<const int> y,
                                 int bins = kDefaultBins) {
  if (x.size() != y.size()) throw DataError("mutual_information: length mismatch");
  const auto codes = equal_frequency_bins(x, bins);
  return mutual_information_discrete(codes, y);
}

struct RankedFeature {
  std::string name;
  double mi = 0.0;  // nats
  std::size_t column = 0;
};

struct FeatureRanking {
  std::vector<RankedFeature> ranked;  // descending MI, ties by column order
  int k = 0;
  int bins = kDefaultBins;

  [[nodiscard]] std::vector<RankedFeature> top() const {
    return {ranked.begin(), ranked.begin() + k};
  }
};

inline FeatureRanking select_top_k(const dataset::Dataset& ds, int k, int bins = kDefaultBins) {
  const std::size_t nf = ds.schema.size();
  if (k < 0) throw ConfigError("select_top_k: k must be non-negative");
  if (static_cast<std::size_t>(k) > nf) {
    throw ConfigError(fmt::format("select_top_k: k={} exceeds feature count {}", k, nf));
  }
  std::vector<int> y;
  y.reserve(ds.records.size());
  for (const auto& r : ds.records) y.push_back(r.label);

  FeatureRanking out;
  out.k = k;
  out.bins = bins;
  std::vector<double> col(ds.records.size());
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t i = 0; i < ds.records.size(); ++i) col[i] = ds.records[i].features[f];
    out.ranked.push_back({ds.schema.names[f], mutual_information(col, y, bins), f});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const auto& a, const auto& b) { return a.mi > b.mi; });
  return out;
}

/// CSV: feature,score,rank (rank is 1-based) plus a header comment-free layout.
inline std::string to_csv(const FeatureRanking& r) {
  std::string out = "feature,score,rank\n";
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    out += fmt::format("{},{:.10f},{}\n", csv::escape(r.ranked[i].name), r.ranked[i].mi, i + 1);
  }
  return out;
}

/// Reads a ranking CSV back against a schema. k and bins come from the caller.
inline FeatureRanking from_csv(std::string_view text, const dataset::FeatureSchema& schema, int k,
                               int bins) {
  const auto t = csv::parse(text, "ranking");
  const auto fc = t.column("feature");
  const auto sc = t.column("score");
  if (!fc || !sc) throw DataError("ranking CSV needs 'feature' and 'score' columns");
  FeatureRanking r;
  r.k = k;
  r.bins = bins;
  for (const auto& row : t.rows) {
    const auto col = schema.index_of(row[*fc]);
    if (!col) throw DataError(fmt::format("ranking names unknown feature '{}'", row[*fc]));
    r.ranked.push_back({row[*fc], csv::parse_real(row[*sc]).value_or(0.0), *col});
  }
  if (static_cast<std::size_t>(k) > r.ranked.size()) throw ConfigError("k exceeds ranking size");
  return r;
}

}  // namespace fairxai::featsel
