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

// Audit results: the in-memory report, its JSON form (results.json), the
// Metrics-table CSV and the baseline/intervention delta table.
//
// All reals in results.json are rounded to 4 decimals; undefined values are
// JSON null. Keys are sorted (nlohmann objects are ordered maps).

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairxai/cfa.hpp"
#include "fairxai/common.hpp"
#include "fairxai/embedpipe.hpp"
#include "fairxai/fairmetrics.hpp"
#include "fairxai/sweep.hpp"

namespace fairxai::report {

inline constexpr int kSchemaVersion = 1;

// Row names as they appear in results.json and the metrics table.
inline constexpr std::string_view kAccuracy = "Accuracy";
inline constexpr std::string_view kBalancedAcc = "Balanced Acc.";
inline constexpr std::string_view kF1 = "F1-Score";
inline constexpr std::string_view kFnr = "Miss Rate (FNR)";
inline constexpr std::string_view kFdr = "False Discovery Rate (FDR)";
inline constexpr std::string_view kKappa = "Cohen's Kappa (κ)";
inline constexpr std::string_view kDeltaAcc = "Δ Accuracy";
inline constexpr std::string_view kDeltaEo = "Δ Eq. Opportunity";
inline constexpr std::string_view kDi = "Disp. Impact Ratio";
inline constexpr std::string_view kDeltaRef = "ΔREF";

inline constexpr std::array<std::string_view, 6> kMetricRows = {kAccuracy, kBalancedAcc, kF1,
                                                                kFnr,      kFdr,         kKappa};
inline constexpr std::array<std::string_view, 4> kCountRows = {"TN", "FP", "FN", "TP"};
inline constexpr std::array<std::string_view, 4> kFairnessRows = {kDeltaAcc, kDeltaEo, kDi,
                                                                  kDeltaRef};

inline constexpr std::string_view kCfaDefinition =
    "L_total = L_CE + lambda * L_CFA; L_CFA = sum_j |rho_j| * abar_j, where rho_j is the "
    "per-batch Pearson correlation of input feature j with the binary sensitive attribute and "
    "abar_j is the batch-mean |integrated gradient| of feature j normalized to sum to 1.";

struct AttributeAudit {
  std::string majority;
  fairmetrics::FairnessReport fairness;
  MaybeReal delta_ref;
  bool delta_ref_available = false;  // generative pipeline only
};

struct VariantResult {
  Variant variant = Variant::kBaseline;
  fairmetrics::ConfusionCounts counts;  // answered sessions only
  fairmetrics::MetricSet metrics;
  std::size_t sessions = 0;
  std::size_t abstained = 0;
  std::size_t backend_errors = 0;
  bool collapsed = false;
  std::optional<std::pair<std::size_t, std::size_t>> explanation_quality;  // (high, scored)
  std::vector<std::pair<std::string, AttributeAudit>> attributes;
};

struct AuditReport {
  nlohmann::json manifest;  // run manifest, already deterministic
  std::string pipeline;
  std::vector<VariantResult> variants;
  std::optional<embedpipe::AblationTable> ablation;
  std::optional<std::vector<cfa::SweepRow>> pareto;
};

inline nlohmann::json real(double v) { return round4(v); }
inline nlohmann::json real(const MaybeReal& v) {
  return v ? nlohmann::json(round4(*v)) : nlohmann::json(nullptr);
}

inline nlohmann::json counts_json(const fairmetrics::ConfusionCounts& c) {
  return {{"TN", c.tn}, {"FP", c.fp}, {"FN", c.fn}, {"TP", c.tp}};
}

inline nlohmann::json to_json(const VariantResult& v) {
  nlohmann::json j;
  nlohmann::json cls = counts_json(v.counts);
  cls[std::string(kAccuracy)] = real(v.metrics.accuracy);
  cls[std::string(kBalancedAcc)] = real(v.metrics.balanced_accuracy);
  cls[std::string(kF1)] = real(v.metrics.f1);
  cls[std::string(kFnr)] = real(v.metrics.fnr);
  cls[std::string(kFdr)] = real(v.metrics.fdr);
  cls[std::string(kKappa)] = real(v.metrics.kappa);
  cls["Precision"] = real(v.metrics.precision);
  cls["Recall"] = real(v.metrics.recall);
  j["classification"] = cls;
  j["sessions"] = v.sessions;
  j["abstentions"] = v.abstained;
  j["abstention_rate"] = real(v.sessions ? static_cast<double>(v.abstained) / v.sessions : 0.0);
  j["backend_errors"] = v.backend_errors;
  j["collapsed"] = v.collapsed;
  if (v.explanation_quality) {
    j["explanation_quality"] = {{"high_quality", v.explanation_quality->first},
                                {"scored", v.explanation_quality->second}};
  } else {
    j["explanation_quality"] = nullptr;
  }
  nlohmann::json fair = nlohmann::json::object();
  for (const auto& [name, a] : v.attributes) {
    const auto& f = a.fairness;
    nlohmann::json e;
    e[std::string(kDeltaAcc)] = real(f.ea);
    e[std::string(kDeltaEo)] = real(f.eo);
    e[std::string(kDi)] = real(f.di);
    e[std::string(kDeltaRef)] = a.delta_ref_available ? real(a.delta_ref) : nlohmann::json(nullptr);
    e["delta_ref_available"] = a.delta_ref_available;
    e["majority"] = a.majority;
    e["minority_counts"] = counts_json(f.group0);
    e["majority_counts"] = counts_json(f.group1);
    e["group_sizes"] = {{"minority", f.group0.total()}, {"majority", f.group1.total()}};
    e["excluded"] = f.excluded;
    e["low_confidence"] = f.low_confidence;
    e["vacuous"] = f.vacuous;
    fair[name] = e;
  }
  j["fairness"] = fair;
  return j;
}

inline nlohmann::json to_json(const embedpipe::AblationTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (auto c : nn::kAllAblations) {
    nlohmann::json row;
    row["config"] = std::string(nn::to_string(c));
    nlohmann::json cells = nlohmann::json::object();
    int dim = 0;
    for (const auto& s : t.sources) {
      const auto& cell = t.at(c, s);
      dim = std::max(dim, cell.head_input_dim);
      nlohmann::json e;
      e["accuracy"] = cell.skipped ? nlohmann::json(nullptr) : real(cell.accuracy);
      e["f1"] = cell.skipped ? nlohmann::json(nullptr) : real(cell.f1);
      e["delta_eo"] = cell.skipped ? nlohmann::json(nullptr) : real(cell.delta_eo);
      e["collapsed"] = cell.collapsed;
      e["skipped"] = cell.skipped ? nlohmann::json(*cell.skipped) : nlohmann::json(nullptr);
      cells[s] = e;
    }
    row["head_input_dim"] = dim;
    row["cells"] = cells;
    rows.push_back(row);
  }
  return {{"sources", t.sources}, {"rows", rows}};
}

inline nlohmann::json to_json(const std::vector<cfa::SweepRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"lambda", r.lambda},
                   {"accuracy", real(r.accuracy)},
                   {"f1", real(r.f1)},
                   {"delta_eo", real(r.delta_eo)},
                   {"collapsed", r.collapsed},
                   {"loss", {{"ce", real(r.final_loss.ce)},
                             {"cfa", real(r.final_loss.cfa)},
                             {"total", real(r.final_loss.total)}}},
                   {"counts", counts_json(r.counts)}});
  }
  return out;
}

inline nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["manifest"] = r.manifest;
  j["pipeline"] = r.pipeline;
  nlohmann::json variants = nlohmann::json::object();
  for (const auto& v : r.variants) variants[std::string(to_string(v.variant))] = to_json(v);
  j["variants"] = variants;
  j["ablation"] = r.ablation ? to_json(*r.ablation) : nlohmann::json(nullptr);
  j["pareto"] = r.pareto ? to_json(*r.pareto) : nlohmann::json(nullptr);
  j["cfa_definition"] = r.pipeline == "embedding" ? nlohmann::json(std::string(kCfaDefinition))
                                                  : nlohmann::json(nullptr);
  return j;
}

/// Stable text form: 2-space indent, UTF-8, trailing newline.
inline std::string dump(const nlohmann::json& j) { return j.dump(2, ' ', false) + "\n"; }

// ---- validation --------------------------------------------------------------

/// Checks results.json against schema version 1 (docs/results.schema.json).
/// Returns the list of problems; empty means valid.
inline std::vector<std::string> validate(const nlohmann::json& j) {
  std::vector<std::string> errs;
  auto need = [&](const nlohmann::json& obj, const std::string& key, auto pred, const char* type,
                  const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      errs.push_back(fmt::format("{}: missing '{}'", where, key));
      return false;
    }
    if (!pred(obj[key])) {
      errs.push_back(fmt::format("{}.{}: expected {}", where, key, type));
      return false;
    }
    return true;
  };
  auto is_num = [](const nlohmann::json& v) { return v.is_number(); };
  auto num_or_null = [](const nlohmann::json& v) { return v.is_number() || v.is_null(); };
  auto is_obj = [](const nlohmann::json& v) { return v.is_object(); };
  auto is_str = [](const nlohmann::json& v) { return v.is_string(); };
  auto is_bool = [](const nlohmann::json& v) { return v.is_boolean(); };
  auto is_uint = [](const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  };

  if (!need(j, "schema_version", is_num, "integer", "$")) return errs;
  if (j["schema_version"] != kSchemaVersion) {
    errs.push_back(fmt::format("$: unsupported schema_version {}", j["schema_version"].dump()));
    return errs;
  }
  if (need(j, "manifest", is_obj, "object", "$")) {
    for (const char* k : {"config_hash", "dataset_hash", "lexicon_hash", "template_hash"}) {
      need(j["manifest"], k, is_str, "string", "$.manifest");
    }
    need(j["manifest"], "seed", is_num, "integer", "$.manifest");
    need(j["manifest"], "label_threshold", is_num, "number", "$.manifest");
  }
  need(j, "pipeline", is_str, "string", "$");
  if (need(j, "variants", is_obj, "object", "$")) {
    for (const auto& [name, v] : j["variants"].items()) {
      const std::string at = "$.variants." + name;
      if (name != "baseline" && name != "intervention") errs.push_back(at + ": unknown variant");
      if (need(v, "classification", is_obj, "object", at)) {
        for (auto k : kMetricRows) need(v["classification"], std::string(k), is_num, "number", at);
        for (auto k : kCountRows) need(v["classification"], std::string(k), is_uint, "count", at);
      }
      need(v, "abstentions", is_uint, "count", at);
      need(v, "sessions", is_uint, "count", at);
      need(v, "collapsed", is_bool, "boolean", at);
      if (need(v, "fairness", is_obj, "object", at)) {
        for (const auto& [attr, f] : v["fairness"].items()) {
          const std::string fat = at + ".fairness." + attr;
          for (auto k : kFairnessRows) need(f, std::string(k), num_or_null, "number or null", fat);
          need(f, "low_confidence", is_bool, "boolean", fat);
          need(f, "vacuous", is_bool, "boolean", fat);
          need(f, "majority", is_str, "string", fat);
        }
      }
    }
  }
  if (j.contains("ablation") && !j["ablation"].is_null()) {
    const auto& a = j["ablation"];
    if (!a.contains("rows") || !a["rows"].is_array() || a["rows"].size() != nn::kAllAblations.size()) {
      errs.push_back("$.ablation.rows: expected 7 rows");
    }
  }
  if (j.contains("pareto") && !j["pareto"].is_null() && !j["pareto"].is_array()) {
    errs.push_back("$.pareto: expected array");
  }
  return errs;
}

// ---- tables --------------------------------------------------------------------

inline std::string cell(const nlohmann::json& v) {
  if (v.is_null()) return "undefined";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) return fixed4(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.get<std::string>();
}

inline std::vector<std::string> variant_order(const nlohmann::json& results) {
  std::vector<std::string> out;
  for (const char* v : {"baseline", "intervention"}) {
    if (results["variants"].contains(v)) out.emplace_back(v);
  }
  return out;
}

/// Metrics-table CSV: one column per variant.
inline std::string table1_csv(const nlohmann::json& results) {
  const auto variants = variant_order(results);
  std::string out = "Metric";
  for (const auto& v : variants) out += "," + std::string(v == "baseline" ? "Baseline" : "Intervention");
  out += '\n';
  auto row = [&](std::string_view name, auto&& get) {
    out += csv::escape(name);
    for (const auto& v : variants) out += "," + csv::escape(cell(get(results["variants"][v])));
    out += '\n';
  };
  auto section = [&](std::string_view name) {
    out += csv::escape(name);
    for (std::size_t i = 0; i < variants.size(); ++i) out += ",";
    out += '\n';
  };
  section("Classification Performance");
  for (auto k : kMetricRows) row(k, [&](const auto& v) { return v["classification"][std::string(k)]; });
  for (auto k : kCountRows) row(k, [&](const auto& v) { return v["classification"][std::string(k)]; });
  row("Abstentions", [](const auto& v) { return v["abstentions"]; });
  std::vector<std::string> attrs;
  if (!variants.empty()) {
    for (const auto& [a, _] : results["variants"][variants.front()]["fairness"].items()) attrs.push_back(a);
  }
  for (const auto& a : attrs) {
    std::string title = a;
    if (!title.empty()) title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
    section("Fairness Audit: " + title);
    for (auto k : kFairnessRows) {
      row(k, [&](const auto& v) -> nlohmann::json {
        const auto& f = v["fairness"][a];
        if (k == kDeltaRef && !f.value("delta_ref_available", false)) return "n/a";
        return f[std::string(k)];
      });
    }
  }
  return out;
}

inline std::string ablation_csv(const nlohmann::json& ablation) {
  std::string out = "Config,Head Input Dim";
  for (const auto& s : ablation["sources"]) {
    const auto name = s.get<std::string>();
    out += fmt::format(",{} Acc,{} ΔEO,{} Collapsed", csv::escape(name), csv::escape(name),
                       csv::escape(name));
  }
  out += '\n';
  for (const auto& r : ablation["rows"]) {
    out += r["config"].get<std::string>() + "," + r["head_input_dim"].dump();
    for (const auto& s : ablation["sources"]) {
      const auto& c = r["cells"][s.get<std::string>()];
      if (!c["skipped"].is_null()) {
        out += ",skipped,skipped," + csv::escape(c["skipped"].get<std::string>());
        continue;
      }
      out += "," + cell(c["accuracy"]) + "," + cell(c["delta_eo"]) + (c["collapsed"].get<bool>() ? "*" : "") +
             "," + cell(c["collapsed"]);
    }
    out += '\n';
  }
  return out;
}

inline std::string pareto_csv(const nlohmann::json& pareto) {
  std::string out = "lambda,accuracy,f1,delta_eo,collapsed,L_CE,L_CFA,L_total\n";
  for (const auto& r : pareto) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r["lambda"].dump(), cell(r["accuracy"]),
                       cell(r["f1"]), cell(r["delta_eo"]), cell(r["collapsed"]),
                       cell(r["loss"]["ce"]), cell(r["loss"]["cfa"]), cell(r["loss"]["total"]));
  }
  return out;
}

// ---- compare -------------------------------------------------------------------

enum class Direction { kHigherBetter, kLowerBetter, kParity };

struct DeltaRow {
  std::string section;  // "classification" or the attribute name
  std::string metric;
  MaybeReal baseline;
  MaybeReal intervention;
  MaybeReal delta;  // intervention - baseline
  std::string annotation;
};

inline std::string annotate(Direction dir, const MaybeReal& before, const MaybeReal& after) {
  if (!before || !after) return "undefined";
  // Compare at table precision so rounding noise never reads as a change.
  const double b = round4(*before);
  const double a = round4(*after);
  if (dir == Direction::kParity) {
    const double db = round4(std::abs(1.0 - b));
    const double da = round4(std::abs(1.0 - a));
    if (da == db) return "no change";
    return da < db ? "toward parity" : "further from parity";
  }
  if (a == b) return "no change";
  const bool better = dir == Direction::kHigherBetter ? a > b : a < b;
  return better ? "improvement" : "regression";
}

inline MaybeReal as_real(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  return std::nullopt;
}

/// Pairs one variant of `base` with one of `other` (by default the report's
/// baseline and the other report's intervention, or the only variant each
/// holds) and lists per-metric deltas.
inline std::vector<DeltaRow> compare(const nlohmann::json& base, const nlohmann::json& other,
                                     std::string base_variant = {}, std::string other_variant = {}) {
  for (const auto* r : {&base, &other}) {
    if (auto errs = validate(*r); !errs.empty()) throw DataError("compare: invalid report: " + errs.front());
  }
  if (base["manifest"]["dataset_hash"] != other["manifest"]["dataset_hash"]) {
    throw DataError("compare: reports were produced from different datasets");
  }
  auto pick = [](const nlohmann::json& r, std::string wanted, const char* fallback) {
    const auto& vs = r["variants"];
    if (wanted.empty()) wanted = vs.contains(fallback) || vs.size() != 1 ? fallback : vs.begin().key();
    if (!vs.contains(wanted)) throw DataError(fmt::format("compare: report has no '{}' variant", wanted));
    return vs[wanted];
  };
  const auto b = pick(base, std::move(base_variant), "baseline");
  const auto a = pick(other, std::move(other_variant), "intervention");
  std::vector<std::string> attrs_b;
  std::vector<std::string> attrs_a;
  for (const auto& [k, _] : b["fairness"].items()) attrs_b.push_back(k);
  for (const auto& [k, _] : a["fairness"].items()) attrs_a.push_back(k);
  if (attrs_a != attrs_b) throw DataError("compare: reports audit different attribute sets");

  std::vector<DeltaRow> rows;
  auto add = [&](std::string section, std::string_view metric, Direction dir, const nlohmann::json& vb,
                 const nlohmann::json& va) {
    DeltaRow r{std::move(section), std::string(metric), as_real(vb), as_real(va), std::nullopt, ""};
    if (r.baseline && r.intervention) r.delta = *r.intervention - *r.baseline;
    r.annotation = annotate(dir, r.baseline, r.intervention);
    rows.push_back(std::move(r));
  };
  const std::pair<std::string_view, Direction> cls[] = {
      {kAccuracy, Direction::kHigherBetter}, {kBalancedAcc, Direction::kHigherBetter},
      {kF1, Direction::kHigherBetter},       {kFnr, Direction::kLowerBetter},
      {kFdr, Direction::kLowerBetter},       {kKappa, Direction::kHigherBetter}};
  for (const auto& [m, d] : cls) {
    add("classification", m, d, b["classification"][std::string(m)], a["classification"][std::string(m)]);
  }
  for (const auto& attr : attrs_b) {
    const auto& fb = b["fairness"][attr];
    const auto& fa = a["fairness"][attr];
    add(attr, kDeltaAcc, Direction::kLowerBetter, fb[std::string(kDeltaAcc)], fa[std::string(kDeltaAcc)]);
    add(attr, kDeltaEo, Direction::kLowerBetter, fb[std::string(kDeltaEo)], fa[std::string(kDeltaEo)]);
    add(attr, kDi, Direction::kParity, fb[std::string(kDi)], fa[std::string(kDi)]);
    add(attr, kDeltaRef, Direction::kLowerBetter, fb[std::string(kDeltaRef)], fa[std::string(kDeltaRef)]);
  }
  return rows;
}

inline std::string delta_csv(const std::vector<DeltaRow>& rows) {
  std::string out = "section,metric,baseline,intervention,delta,annotation\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", csv::escape(r.section), csv::escape(r.metric),
                       fixed4(r.baseline), fixed4(r.intervention), fixed4(r.delta), r.annotation);
  }
  return out;
}

}  // namespace fairxai::report
