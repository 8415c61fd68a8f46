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

// Session ingestion for the two supported layouts:
//  - per-session: one row per session in each modality table, inner-joined on
//    a shared key column; sessions with any missing cell are dropped.
//  - frame-level: one CSV of frames per modality per session, collapsed to
//    [mean, std, min, max, median] per channel; invalid cells become 0 and a
//    session is dropped only when a whole modality file is absent.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairxai/common.hpp"
#include "fairxai/csv.hpp"

namespace fairxai::dataset {

enum class Modality { kText, kAudio, kFacial, kVerbal };

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kAudio: return "audio";
    case Modality::kFacial: return "facial";
    case Modality::kVerbal: return "verbal";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::kText;
  if (s == "audio") return Modality::kAudio;
  if (s == "facial" || s == "face" || s == "visual") return Modality::kFacial;
  if (s == "verbal") return Modality::kVerbal;
  throw ConfigError(fmt::format("unknown modality '{}'", s));
}

struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<Modality> modality;

  [[nodiscard]] std::size_t size() const { return names.size(); }

  [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::vector<std::size_t> indices_of(Modality m) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < modality.size(); ++i) {
      if (modality[i] == m) out.push_back(i);
    }
    return out;
  }

  bool operator==(const FeatureSchema&) const = default;
};

struct SessionRecord {
  std::string session_id;
  std::string participant_id;
  std::vector<double> features;  // aligned with FeatureSchema::names
  std::string transcript;
  std::string raw_label;
  int label = 0;  // 0 = not depressed, 1 = depressed
  std::map<std::string, std::string> demographics;

  bool operator==(const SessionRecord&) const = default;
};

struct IngestTally {
  std::size_t unmatched = 0;         // key absent from at least one table
  std::size_t missing_value = 0;     // per-session layout: any empty/invalid cell
  std::size_t missing_modality = 0;  // frame-level: whole modality file absent
  std::size_t missing_label = 0;

  [[nodiscard]] std::size_t dropped() const {
    return unmatched + missing_value + missing_modality + missing_label;
  }
  bool operator==(const IngestTally&) const = default;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<SessionRecord> records;  // sorted by session_id
  IngestTally tally;
  double label_threshold = 10.0;

  bool operator==(const Dataset&) const = default;
};

enum class Layout { kPerSession, kFrameLevel };

struct LabelSpec {
  std::string column;
  std::optional<double> threshold;             // numeric raw label, 1 iff raw >= threshold
  std::vector<std::string> positive_values;    // categorical raw label
};

struct MetaSpec {
  std::filesystem::path file;
  std::string key_column;
  std::string participant_column;  // optional; defaults to the session key
  LabelSpec label;
  std::vector<std::string> demographic_columns;
};

struct SessionFiles {
  std::string session_id;
  std::map<Modality, std::filesystem::path> frames;
  std::optional<std::filesystem::path> transcript;
};

struct DatasetManifest {
  Layout layout = Layout::kPerSession;
  std::string key_column;
  std::vector<std::pair<Modality, std::filesystem::path>> tables;  // per-session layout
  std::vector<SessionFiles> sessions;                               // frame-level layout
  std::vector<std::string> frame_exclude_columns;
  std::optional<std::filesystem::path> transcripts_dir;
  MetaSpec meta;
};

inline constexpr double kDefaultLabelThreshold = 10.0;

/// 1 iff raw >= threshold.
inline int binarize_label(double raw, double threshold = kDefaultLabelThreshold) {
  if (!std::isfinite(raw)) throw DataError("non-finite raw label");
  return raw >= threshold ? 1 : 0;
}

inline int binarize_label(std::string_view raw, double threshold = kDefaultLabelThreshold) {
  const auto v = csv::parse_real(raw);
  if (!v) throw DataError(fmt::format("non-numeric raw label '{}'", raw));
  return binarize_label(*v, threshold);
}

inline int label_from_spec(std::string_view raw, const LabelSpec& spec) {
  if (spec.threshold) return binarize_label(raw, *spec.threshold);
  const std::string lowered = to_lower(trim(raw));
  for (const auto& p : spec.positive_values) {
    if (to_lower(p) == lowered) return 1;
  }
  return 0;
}

/// Per channel, [mean, std, min, max, median] in that order, channel-major.
/// Non-finite cells are imputed to 0. std uses the population (n) divisor and
/// an even-count median is the mean of the two middle values.
inline std::vector<double> collapse_frames(std::span<const std::vector<double>> frames) {
  if (frames.empty()) throw DataError("collapse_frames: zero frames");
  const std::size_t channels = frames.front().size();
  std::vector<double> out;
  out.reserve(5 * channels);
  std::vector<double> column(frames.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t f = 0; f < frames.size(); ++f) {
      if (frames[f].size() != channels) {
        throw DataError(fmt::format("collapse_frames: frame {} has {} channels, expected {}", f,
                                    frames[f].size(), channels));
      }
      const double v = frames[f][c];
      column[f] = std::isfinite(v) ? v : 0.0;
    }
    std::sort(column.begin(), column.end());
    const auto n = static_cast<double>(column.size());
    double sum = 0.0;
    for (double v : column) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const std::size_t mid = column.size() / 2;
    const double median =
        column.size() % 2 == 1 ? column[mid] : 0.5 * (column[mid - 1] + column[mid]);
    out.push_back(mean);
    out.push_back(std::sqrt(ss / n));
    out.push_back(column.front());
    out.push_back(column.back());
    out.push_back(median);
  }
  return out;
}

inline constexpr std::array<std::string_view, 5> kFrameStatNames = {"mean", "std", "min", "max",
                                                                     "median"};

namespace detail {

struct MetaRow {
  std::string participant;
  std::optional<std::string> raw_label;
  std::map<std::string, std::string> demographics;
};

inline std::map<std::string, MetaRow> read_meta(const MetaSpec& spec) {
  const csv::Table t = csv::read(spec.file);
  const auto key = t.column(spec.key_column);
  if (!key) throw DataError(fmt::format("{}: no key column '{}'", spec.file.string(), spec.key_column));
  const auto label = t.column(spec.label.column);
  if (!label) {
    throw DataError(fmt::format("{}: no label column '{}'", spec.file.string(), spec.label.column));
  }
  std::optional<std::size_t> participant;
  if (!spec.participant_column.empty()) {
    participant = t.column(spec.participant_column);
    if (!participant) {
      throw DataError(fmt::format("{}: no participant column '{}'", spec.file.string(),
                                  spec.participant_column));
    }
  }
  std::vector<std::pair<std::string, std::size_t>> demo_cols;
  for (const auto& d : spec.demographic_columns) {
    const auto c = t.column(d);
    if (!c) throw DataError(fmt::format("{}: no demographic column '{}'", spec.file.string(), d));
    demo_cols.emplace_back(d, *c);
  }

  std::map<std::string, MetaRow> rows;
  for (const auto& r : t.rows) {
    const std::string k(trim(r[*key]));
    MetaRow m;
    m.participant = participant ? std::string(trim(r[*participant])) : k;
    const auto raw = trim(r[*label]);
    if (!raw.empty()) m.raw_label = std::string(raw);
    for (const auto& [name, c] : demo_cols) {
      const auto v = trim(r[c]);
      if (!v.empty()) m.demographics[name] = std::string(v);
    }
    if (!rows.emplace(k, std::move(m)).second) {
      throw DataError(fmt::format("{}: duplicate session key '{}'", spec.file.string(), k));
    }
  }
  return rows;
}

inline std::string read_transcript(const std::optional<std::filesystem::path>& path) {
  if (!path || !std::filesystem::exists(*path)) return {};
  return read_text_file(*path);
}

}  // namespace detail

/// Inner join of the modality tables and the meta table on the session key.
inline Dataset load_per_session(const DatasetManifest& manifest) {
  if (manifest.layout != Layout::kPerSession) throw ConfigError("load_per_session: wrong layout");
  if (manifest.tables.empty()) throw ConfigError("load_per_session: no modality tables");

  // Fixed table order so the merged schema does not depend on listing order.
  auto tables = manifest.tables;
  std::sort(tables.begin(), tables.end(), [](const auto& a, const auto& b) {
    return std::pair(to_string(a.first), a.second.string()) <
           std::pair(to_string(b.first), b.second.string());
  });

  Dataset ds;
  ds.label_threshold = manifest.meta.label.threshold.value_or(kDefaultLabelThreshold);
  struct Loaded {
    std::vector<std::size_t> feature_cols;
    std::map<std::string, const std::vector<std::string>*> by_key;
    csv::Table table;
  };
  std::vector<Loaded> loaded(tables.size());
  std::set<std::string> seen_names;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    auto& l = loaded[t];
    l.table = csv::read(tables[t].second);
    const auto key = l.table.column(manifest.key_column);
    if (!key) {
      throw DataError(fmt::format("{}: no key column '{}'", tables[t].second.string(),
                                  manifest.key_column));
    }
    for (std::size_t c = 0; c < l.table.header.size(); ++c) {
      if (c == *key) continue;
      const auto& name = l.table.header[c];
      if (!seen_names.insert(name).second) {
        throw DataError(fmt::format("feature '{}' appears in more than one table", name));
      }
      l.feature_cols.push_back(c);
      ds.schema.names.push_back(name);
      ds.schema.modality.push_back(tables[t].first);
    }
    for (const auto& row : l.table.rows) {
      const std::string k(trim(row[*key]));
      if (!l.by_key.emplace(k, &row).second) {
        throw DataError(fmt::format("{}: duplicate session key '{}'", tables[t].second.string(), k));
      }
    }
  }

  const auto meta = detail::read_meta(manifest.meta);
  std::set<std::string> all_keys;
  for (const auto& l : loaded) {
    for (const auto& [k, _] : l.by_key) all_keys.insert(k);
  }
  for (const auto& [k, _] : meta) all_keys.insert(k);

  for (const auto& k : all_keys) {
    const auto m = meta.find(k);
    bool in_all = m != meta.end();
    for (const auto& l : loaded) in_all = in_all && l.by_key.contains(k);
    if (!in_all) {
      ++ds.tally.unmatched;
      continue;
    }
    SessionRecord rec;
    rec.session_id = k;
    bool complete = true;
    for (const auto& l : loaded) {
      const auto& row = *l.by_key.at(k);
      for (auto c : l.feature_cols) {
        const auto v = csv::parse_real(row[c]);
        if (!v) {
          complete = false;
          break;
        }
        rec.features.push_back(*v);
      }
      if (!complete) break;
    }
    if (!complete) {
      ++ds.tally.missing_value;
      continue;
    }
    if (!m->second.raw_label) {
      ++ds.tally.missing_label;
      continue;
    }
    rec.participant_id = m->second.participant;
    rec.raw_label = *m->second.raw_label;
    rec.label = label_from_spec(rec.raw_label, manifest.meta.label);
    rec.demographics = m->second.demographics;
    if (manifest.transcripts_dir) {
      rec.transcript = detail::read_transcript(*manifest.transcripts_dir / (k + ".txt"));
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw DataError("per-session join produced no sessions");
  return ds;
}

/// Frame-level streams collapsed to per-session summary vectors.
inline Dataset load_frame_level(const DatasetManifest& manifest) {
  if (manifest.layout != Layout::kFrameLevel) throw ConfigError("load_frame_level: wrong layout");
  if (manifest.sessions.empty()) throw ConfigError("load_frame_level: no sessions listed");

  std::set<Modality> modalities;
  for (const auto& s : manifest.sessions) {
    for (const auto& [m, _] : s.frames) modalities.insert(m);
  }

  Dataset ds;
  ds.label_threshold = manifest.meta.label.threshold.value_or(kDefaultLabelThreshold);
  const auto meta = detail::read_meta(manifest.meta);
  std::map<Modality, std::vector<std::string>> channel_names;
  std::set<std::string> ids;
  std::vector<SessionFiles> sessions = manifest.sessions;
  std::sort(sessions.begin(), sessions.end(),
            [](const auto& a, const auto& b) { return a.session_id < b.session_id; });

  std::vector<SessionRecord> records;
  for (const auto& s : sessions) {
    if (!ids.insert(s.session_id).second) {
      throw DataError(fmt::format("duplicate session key '{}'", s.session_id));
    }
    const auto m = meta.find(s.session_id);
    if (m == meta.end()) {
      ++ds.tally.unmatched;
      continue;
    }
    bool have_all = true;
    for (auto mod : modalities) {
      const auto f = s.frames.find(mod);
      have_all = have_all && f != s.frames.end() && std::filesystem::exists(f->second);
    }
    if (!have_all) {
      ++ds.tally.missing_modality;
      continue;
    }
    if (!m->second.raw_label) {
      ++ds.tally.missing_label;
      continue;
    }

    SessionRecord rec;
    rec.session_id = s.session_id;
    for (auto mod : modalities) {
      const auto& path = s.frames.at(mod);
      const csv::Table t = csv::read(path);
      std::vector<std::size_t> cols;
      std::vector<std::string> names;
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        const auto& ex = manifest.frame_exclude_columns;
        if (std::find(ex.begin(), ex.end(), t.header[c]) != ex.end()) continue;
        cols.push_back(c);
        names.push_back(t.header[c]);
      }
      auto [it, inserted] = channel_names.emplace(mod, names);
      if (!inserted && it->second != names) {
        throw DataError(fmt::format("{}: channel set differs from other sessions", path.string()));
      }
      std::vector<std::vector<double>> frames;
      frames.reserve(t.rows.size());
      for (const auto& row : t.rows) {
        std::vector<double> frame;
        frame.reserve(cols.size());
        for (auto c : cols) frame.push_back(csv::parse_real(row[c]).value_or(0.0));
        frames.push_back(std::move(frame));
      }
      if (frames.empty()) throw DataError(fmt::format("{}: zero frames", path.string()));
      const auto stats = collapse_frames(frames);
      rec.features.insert(rec.features.end(), stats.begin(), stats.end());
    }
    rec.participant_id = m->second.participant;
    rec.raw_label = *m->second.raw_label;
    rec.label = label_from_spec(rec.raw_label, manifest.meta.label);
    rec.demographics = m->second.demographics;
    rec.transcript = detail::read_transcript(s.transcript);
    records.push_back(std::move(rec));
  }

  for (auto mod : modalities) {
    const auto it = channel_names.find(mod);
    if (it == channel_names.end()) continue;
    for (const auto& ch : it->second) {
      for (auto stat : kFrameStatNames) {
        ds.schema.names.push_back(fmt::format("{}_{}", ch, stat));
        ds.schema.modality.push_back(mod);
      }
    }
  }
  ds.records = std::move(records);
  if (ds.records.empty()) throw DataError("frame-level ingestion produced no sessions");
  return ds;
}

inline Dataset load(const DatasetManifest& manifest) {
  return manifest.layout == Layout::kPerSession ? load_per_session(manifest)
                                                : load_frame_level(manifest);
}

/// Parses a JSON manifest. Relative paths resolve against the manifest's directory.
inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  DatasetManifest m;
  try {
    const std::string layout = j.at("layout").get<std::string>();
    if (layout == "per-session") {
      m.layout = Layout::kPerSession;
    } else if (layout == "frame-level") {
      m.layout = Layout::kFrameLevel;
    } else {
      throw ConfigError(fmt::format("unknown layout '{}'", layout));
    }
    const auto& meta = j.at("meta");
    m.meta.file = resolve(meta.at("file").get<std::string>());
    m.meta.key_column = meta.at("key_column").get<std::string>();
    m.meta.participant_column = meta.value("participant_column", std::string());
    m.meta.label.column = meta.at("label_column").get<std::string>();
    if (meta.contains("positive_values")) {
      m.meta.label.positive_values = meta.at("positive_values").get<std::vector<std::string>>();
    } else {
      m.meta.label.threshold = meta.value("label_threshold", kDefaultLabelThreshold);
    }
    m.meta.demographic_columns =
        meta.value("demographic_columns", std::vector<std::string>{});

    if (m.layout == Layout::kPerSession) {
      if (j.contains("sessions")) throw ConfigError("per-session manifest must not list frame files");
      m.key_column = j.value("key_column", m.meta.key_column);
      for (const auto& [mod, path] : j.at("tables").items()) {
        m.tables.emplace_back(parse_modality(mod), resolve(path.get<std::string>()));
      }
      if (j.contains("transcripts_dir")) {
        m.transcripts_dir = resolve(j.at("transcripts_dir").get<std::string>());
      }
    } else {
      if (j.contains("tables")) throw ConfigError("frame-level manifest must not list session tables");
      m.frame_exclude_columns = j.value("frame_exclude_columns", std::vector<std::string>{});
      for (const auto& s : j.at("sessions")) {
        SessionFiles sf;
        sf.session_id = s.at("session_id").get<std::string>();
        for (const auto& [mod, path] : s.at("files").items()) {
          sf.frames.emplace(parse_modality(mod), resolve(path.get<std::string>()));
        }
        if (s.contains("transcript")) sf.transcript = resolve(s.at("transcript").get<std::string>());
        m.sessions.push_back(std::move(sf));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("manifest: {}", e.what()));
  }
  if (!std::filesystem::exists(m.meta.file)) {
    throw ConfigError(fmt::format("manifest: meta file '{}' not found", m.meta.file.string()));
  }
  for (const auto& [_, p] : m.tables) {
    if (!std::filesystem::exists(p)) {
      throw ConfigError(fmt::format("manifest: table '{}' not found", p.string()));
    }
  }
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_manifest(j, path.parent_path());
}

/// A binary sensitive attribute: flag 1 for the majority value, 0 otherwise,
/// nullopt when the session does not carry the attribute.
struct GroupAssignment {
  std::string attribute;
  std::string majority_value;
  std::vector<std::optional<int>> flag;
  std::size_t excluded = 0;
};

inline GroupAssignment assign_groups(std::span<const SessionRecord> records,
                                     const std::string& attribute,
                                     const std::string& majority_value) {
  GroupAssignment g{attribute, majority_value, {}, 0};
  g.flag.reserve(records.size());
  const std::string majority = to_lower(majority_value);
  for (const auto& r : records) {
    const auto it = r.demographics.find(attribute);
    if (it == r.demographics.end() || trim(it->second).empty()) {
      g.flag.emplace_back(std::nullopt);
      ++g.excluded;
    } else {
      g.flag.emplace_back(to_lower(trim(it->second)) == majority ? 1 : 0);
    }
  }
  return g;
}

// ---- serialization -------------------------------------------------------

inline nlohmann::json to_json(const Dataset& ds) {
  nlohmann::json schema = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.schema.size(); ++i) {
    schema.push_back({{"name", ds.schema.names[i]},
                      {"modality", std::string(to_string(ds.schema.modality[i]))}});
  }
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : ds.records) {
    recs.push_back({{"session_id", r.session_id},
                    {"participant_id", r.participant_id},
                    {"features", r.features},
                    {"transcript", r.transcript},
                    {"raw_label", r.raw_label},
                    {"label", r.label},
                    {"demographics", r.demographics}});
  }
  return {{"schema", schema},
          {"records", recs},
          {"label_threshold", ds.label_threshold},
          {"tally",
           {{"unmatched", ds.tally.unmatched},
            {"missing_value", ds.tally.missing_value},
            {"missing_modality", ds.tally.missing_modality},
            {"missing_label", ds.tally.missing_label}}}};
}

inline Dataset from_json(const nlohmann::json& j) {
  Dataset ds;
  try {
    for (const auto& s : j.at("schema")) {
      ds.schema.names.push_back(s.at("name").get<std::string>());
      ds.schema.modality.push_back(parse_modality(s.at("modality").get<std::string>()));
    }
    for (const auto& r : j.at("records")) {
      SessionRecord rec;
      rec.session_id = r.at("session_id").get<std::string>();
      rec.participant_id = r.at("participant_id").get<std::string>();
      rec.features = r.at("features").get<std::vector<double>>();
      rec.transcript = r.value("transcript", std::string());
      rec.raw_label = r.value("raw_label", std::string());
      rec.label = r.at("label").get<int>();
      rec.demographics = r.value("demographics", std::map<std::string, std::string>{});
      if (rec.label != 0 && rec.label != 1) throw DataError("label must be 0 or 1");
      if (rec.features.size() != ds.schema.size()) {
        throw DataError(fmt::format("session '{}' does not match the schema", rec.session_id));
      }
      ds.records.push_back(std::move(rec));
    }
    ds.label_threshold = j.value("label_threshold", kDefaultLabelThreshold);
    const auto& t = j.at("tally");
    ds.tally.unmatched = t.value("unmatched", std::size_t{0});
    ds.tally.missing_value = t.value("missing_value", std::size_t{0});
    ds.tally.missing_modality = t.value("missing_modality", std::size_t{0});
    ds.tally.missing_label = t.value("missing_label", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("records: {}", e.what()));
  }
  return ds;
}

}  // namespace fairxai::dataset
