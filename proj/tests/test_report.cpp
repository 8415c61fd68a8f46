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

#include <map>
#include <regex>

#include <gtest/gtest.h>

#include "fairxai/audit.hpp"
#include "fairxai/charts.hpp"
#include "support.hpp"

namespace audit = fairxai::audit;
namespace report = fairxai::report;
namespace charts = fairxai::charts;
namespace fsys = std::filesystem;
using fairxai::testing::TempDir;
using nlohmann::json;

namespace {

// A fixture config with every path made absolute and the output redirected.
json fixture_config(const std::string& name, const fsys::path& output) {
  const auto dir = fairxai::testing::data_dir() / "fixture";
  auto j = json::parse(fairxai::read_text_file(dir / name));
  auto absolute = [&](const std::string& key) {
    if (j.contains(key)) j[key] = fsys::weakly_canonical(dir / j[key].get<std::string>()).string();
  };
  for (const char* k : {"dataset", "split", "templates", "lexicon"}) absolute(k);
  if (j.contains("backend")) {
    j["backend"] = "mock:" + fsys::weakly_canonical(dir / j["backend"].get<std::string>().substr(5)).string();
  }
  j["output"] = output.string();
  return j;
}

audit::RunOutcome run_json(const json& j, const TempDir& scratch) {
  const auto path = scratch / "config.json";
  fairxai::write_text_file(path, j.dump(2));
  return audit::run(audit::read_run_config(path));
}

std::map<std::string, std::string> snapshot(const fsys::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fsys::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fsys::relative(e.path(), dir).string()] = fairxai::read_text_file(e.path());
  }
  return out;
}

json without_config_hash(json j) {
  j["manifest"].erase("config_hash");
  return j;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

json fairness_row(json di) {
  return {{std::string(report::kDeltaAcc), 0.1}, {std::string(report::kDeltaEo), 0.2},
          {std::string(report::kDi), std::move(di)}, {std::string(report::kDeltaRef), nullptr},
          {"low_confidence", false}, {"vacuous", false}, {"majority", "male"}};
}

}  // namespace

TEST(Audit, GenerativeFixtureProducesCompleteReport) {
  TempDir scratch("audit");
  const auto out = run_json(fixture_config("audit_generative.json", scratch / "out"), scratch);
  const auto& r = out.results;
  EXPECT_TRUE(report::validate(r).empty());
  for (const char* f : {"results.json", "table1.csv", "ranking.csv", "predictions_baseline.jsonl",
                        "predictions_intervention.jsonl", "charts/confusion_generative_baseline.svg",
                        "charts/confusion_generative_intervention.svg", "charts/radar_gender.svg",
                        "charts/radar_race.svg"}) {
    EXPECT_TRUE(fsys::exists(scratch / "out" / f)) << f;
  }
  EXPECT_FALSE(fsys::exists(scratch / ".out.partial"));
  EXPECT_TRUE(std::regex_match(r["manifest"]["config_hash"].get<std::string>(), std::regex("[0-9a-f]{64}")));
  EXPECT_EQ(r["manifest"]["sessions"], 20);
  EXPECT_EQ(r["manifest"]["feature_selection"]["selected"].size(), 3u);
  for (const char* v : {"baseline", "intervention"}) {
    const auto& var = r["variants"][v];
    EXPECT_EQ(var["sessions"], 20);
    EXPECT_FALSE(var["explanation_quality"].is_null());
    EXPECT_TRUE(var["fairness"].contains("gender"));
    EXPECT_TRUE(var["fairness"].contains("race"));
  }
  EXPECT_EQ(fairxai::read_text_file(scratch / "out" / "results.json"), report::dump(r));
  const auto table = fairxai::read_text_file(scratch / "out" / "table1.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "Metric,Baseline,Intervention");
  EXPECT_NE(table.find("Fairness Audit: Race,,"), std::string::npos);
}

TEST(Audit, GoldenResultsFile) {
  TempDir scratch("audit");
  const auto out = run_json(fixture_config("audit_generative.json", scratch / "out"), scratch);
  const auto golden = json::parse(fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR) / "results_generative.json"));
  EXPECT_TRUE(report::validate(golden).empty());
  // The config hash covers the output path, which differs per run location.
  EXPECT_EQ(report::dump(without_config_hash(out.results)), report::dump(without_config_hash(golden)));
}

TEST(Audit, RepeatedRunIsByteIdentical) {
  TempDir scratch("audit");
  const auto cfg = fixture_config("audit_generative.json", scratch / "out");
  run_json(cfg, scratch);
  const auto first = snapshot(scratch / "out");
  run_json(cfg, scratch);
  const auto second = snapshot(scratch / "out");
  EXPECT_EQ(first.size(), second.size());
  EXPECT_TRUE(first == second);
}

TEST(Audit, MissingSplitIsAPreflightErrorWithNoOutputs) {
  TempDir scratch("audit");
  auto cfg = fixture_config("audit_embedding.json", scratch / "out");
  cfg["split"] = (scratch / "no_such_split.json").string();
  try {
    run_json(cfg, scratch);
    FAIL() << "expected ConfigError";
  } catch (const fairxai::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("[preflight]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("split"), std::string::npos);
  }
  EXPECT_FALSE(fsys::exists(scratch / "out"));
  EXPECT_FALSE(fsys::exists(scratch / ".out.partial"));
}

TEST(Audit, UnreachableBackendFailsWithoutPartialOutputs) {
  TempDir scratch("audit");
  auto cfg = fixture_config("audit_generative.json", scratch / "out");
  cfg["backend"] = "http://127.0.0.1:9/generate";
  cfg["backend_timeout"] = 1.0;
  try {
    run_json(cfg, scratch);
    FAIL() << "expected BackendError";
  } catch (const fairxai::BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("[classify]"), std::string::npos);
  }
  EXPECT_FALSE(fsys::exists(scratch / "out"));
  EXPECT_FALSE(fsys::exists(scratch / ".out.partial"));
}

TEST(Audit, UnknownConfigKeyRejected) {
  TempDir scratch("audit");
  auto cfg = fixture_config("audit_generative.json", scratch / "out");
  cfg["sede"] = 3;
  EXPECT_THROW(run_json(cfg, scratch), fairxai::ConfigError);
}

TEST(AuditProperties, DeletingAnyFieldChangesTheConfigHash) {
  TempDir scratch("audit");
  const auto cfg = fixture_config("audit_generative.json", scratch / "out");
  const auto reference = run_json(cfg, scratch).results["manifest"]["config_hash"];
  for (const auto& [key, _] : cfg.items()) {
    auto trimmed = cfg;
    trimmed.erase(key);
    try {
      const auto h = run_json(trimmed, scratch).results["manifest"]["config_hash"];
      EXPECT_NE(h, reference) << "deleting '" << key << "' kept the hash";
    } catch (const fairxai::ConfigError&) {
      // Required fields, plus feature_selection: the default k=10 exceeds the
      // fixture's 8 features.
      EXPECT_TRUE(key == "dataset" || key == "pipeline" || key == "backend" || key == "feature_selection") << key;
    }
  }
  auto reseeded = cfg;
  reseeded["seed"] = 1;
  EXPECT_NE(run_json(reseeded, scratch).results["manifest"]["config_hash"], reference);
}

TEST(Audit, EmbeddingFixtureProducesAllSections) {
  TempDir scratch("audit");
  const auto out = run_json(fixture_config("audit_embedding.json", scratch / "out"), scratch);
  const auto& r = out.results;
  EXPECT_TRUE(report::validate(r).empty());
  ASSERT_TRUE(r["ablation"].is_object());
  EXPECT_EQ(r["ablation"]["rows"].size(), 7u);
  ASSERT_TRUE(r["pareto"].is_array());
  ASSERT_EQ(r["pareto"].size(), 2u);
  EXPECT_EQ(r["pareto"][0]["lambda"], 0.0);
  EXPECT_EQ(r["pareto"][1]["lambda"], 0.5);
  EXPECT_TRUE(r["cfa_definition"].is_string());
  for (const char* f : {"loss_trace_baseline.csv", "loss_trace_intervention.csv", "attributions_intervention.csv",
                        "ablation.csv", "pareto.csv", "charts/ablation_heatmap.svg"}) {
    EXPECT_TRUE(fsys::exists(scratch / "out" / f)) << f;
  }
  std::size_t confusion = 0;
  std::size_t radar = 0;
  for (const auto& f : out.files) {
    confusion += f.starts_with("charts/confusion_") ? 1 : 0;
    radar += f.starts_with("charts/radar_") ? 1 : 0;
  }
  EXPECT_EQ(confusion, 2u);
  EXPECT_EQ(radar, 1u);
  const auto& gender = r["variants"]["baseline"]["fairness"]["gender"];
  EXPECT_TRUE(gender[std::string(report::kDeltaRef)].is_null());
}

TEST(Charts, HeatmapHasSevenRowsPerSource) {
  fairxai::embedpipe::AblationTable t;
  t.sources = {"qwen", "phi"};
  for (auto c : fairxai::nn::kAllAblations) {
    for (const auto& s : t.sources) {
      fairxai::embedpipe::AblationCell cell;
      cell.source = s;
      cell.config = c;
      cell.accuracy = 0.5;
      cell.delta_eo = 0.25;
      cell.head_input_dim = 128;
      t.cells.push_back(cell);
    }
  }
  const auto svg = charts::heatmap_svg(report::to_json(t));
  EXPECT_EQ(count(svg, "width=\"150.00\" height=\"44.00\""), 14u);
  for (auto c : fairxai::nn::kAllAblations) EXPECT_NE(svg.find(std::string(fairxai::nn::to_string(c))), std::string::npos);
  EXPECT_EQ(svg, charts::heatmap_svg(report::to_json(t)));
}

TEST(Charts, UndefinedDisparateImpactIsHatched) {
  json r;
  r["pipeline"] = "generative";
  r["variants"]["baseline"]["fairness"]["gender"] = fairness_row(nullptr);
  r["variants"]["intervention"]["fairness"]["gender"] = fairness_row(0.8);
  const auto svg = charts::radar_svg("gender", r);
  EXPECT_EQ(count(svg, "fill=\"url(#hatch)\""), 1u);
  EXPECT_NE(svg.find("baseline (DI undefined)"), std::string::npos);
  r["variants"]["baseline"]["fairness"]["gender"] = fairness_row(0.9);
  EXPECT_EQ(count(charts::radar_svg("gender", r), "fill=\"url(#hatch)\""), 0u);
}

TEST(Charts, CountsAndDeterminismForTwoVariantsOneAttribute) {
  const auto golden = json::parse(fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR) / "results_generative.json"));
  auto one_attr = golden;
  for (auto& [_, v] : one_attr["variants"].items()) v["fairness"].erase("race");
  TempDir a("charts");
  TempDir b("charts");
  const auto files = charts::emit_charts(one_attr, a.path());
  EXPECT_EQ(files, (std::vector<std::string>{"confusion_generative_baseline.svg",
                                             "confusion_generative_intervention.svg", "radar_gender.svg"}));
  charts::emit_charts(one_attr, b.path());
  EXPECT_TRUE(snapshot(a.path()) == snapshot(b.path()));
  for (const auto& [name, body] : snapshot(a.path())) {
    EXPECT_TRUE(body.starts_with("<?xml")) << name;
    EXPECT_NE(body.find("version=\"1.1\""), std::string::npos) << name;
  }
}

TEST(Compare, AnnotationsFollowDirection) {
  EXPECT_EQ(report::annotate(report::Direction::kParity, 0.926, 0.109), "further from parity");
  EXPECT_EQ(report::annotate(report::Direction::kLowerBetter, 0.333, 0.000), "improvement");
  EXPECT_EQ(report::annotate(report::Direction::kParity, 0.5, 0.9), "toward parity");
  EXPECT_EQ(report::annotate(report::Direction::kParity, 0.8, 1.2), "no change");
  EXPECT_EQ(report::annotate(report::Direction::kHigherBetter, 0.7, 0.6), "regression");
  EXPECT_EQ(report::annotate(report::Direction::kLowerBetter, std::nullopt, 0.1), "undefined");
}

TEST(Compare, IdenticalReportsGiveZeroDeltas) {
  const auto golden = json::parse(fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR) / "results_generative.json"));
  const auto rows = report::compare(golden, golden, "baseline", "baseline");
  EXPECT_EQ(rows.size(), 6u + 2u * 4u);
  for (const auto& r : rows) {
    if (r.delta) {
      EXPECT_EQ(*r.delta, 0.0) << r.metric;
      EXPECT_EQ(r.annotation, "no change") << r.metric;
    }
  }
  EXPECT_EQ(report::delta_csv(rows).substr(0, 53), "section,metric,baseline,intervention,delta,annotation");
}

TEST(Compare, MismatchedDatasetsOrAttributesRejected) {
  const auto golden = json::parse(fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR) / "results_generative.json"));
  auto other = golden;
  other["manifest"]["dataset_hash"] = std::string(64, '0');
  EXPECT_THROW(report::compare(golden, other), fairxai::DataError);
  auto fewer = golden;
  fewer["variants"]["intervention"]["fairness"].erase("race");
  EXPECT_THROW(report::compare(golden, fewer), fairxai::DataError);
}

TEST(Validate, ReportsMissingAndMistypedFields) {
  const auto golden = json::parse(fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR) / "results_generative.json"));
  auto broken = golden;
  broken["variants"]["baseline"]["classification"].erase(std::string(report::kAccuracy));
  broken["manifest"]["seed"] = "zero";
  const auto errs = report::validate(broken);
  EXPECT_EQ(errs.size(), 2u);
  auto future = golden;
  future["schema_version"] = 2;
  EXPECT_FALSE(report::validate(future).empty());
}

TEST(Validate, SchemaDocumentMatchesVersion) {
  const auto schema = json::parse(
      fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR).parent_path().parent_path() / "docs" / "results.schema.json"));
  EXPECT_EQ(schema["properties"]["schema_version"]["const"], report::kSchemaVersion);
  for (const auto& key : schema["required"]) {
    EXPECT_TRUE(json::parse(fairxai::read_text_file(fsys::path(FAIRXAI_GOLDEN_DIR) / "results_generative.json"))
                    .contains(key.get<std::string>()));
  }
}
