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

#include <thread>

#include <gtest/gtest.h>

#include "fairxai/genpipe/backend.hpp"
#include "fairxai/synthetic.hpp"
#include "support.hpp"

namespace gp = fairxai::genpipe;
namespace ds = fairxai::dataset;
namespace fs = fairxai::featsel;
using fairxai::Variant;

namespace {

struct Example {
  ds::Dataset data;
  fs::FeatureRanking ranking;
};

// One session with gender=male and F0_mean=120.5, ranked first.
Example example_record() {
  Example e;
  e.data.schema.names = {"F0_mean", "AU04_r"};
  e.data.schema.modality = {ds::Modality::kAudio, ds::Modality::kFacial};
  ds::SessionRecord r;
  r.session_id = "S1";
  r.features = {120.5, 0.75};
  r.demographics["gender"] = "male";
  r.demographics["race"] = "white";
  e.data.records.push_back(r);
  e.ranking.ranked = {{"F0_mean", 0.5, 0}, {"AU04_r", 0.1, 1}};
  e.ranking.k = 1;
  return e;
}

gp::MockRules low_pitch_rule() {
  return gp::parse_mock_rules(nlohmann::json::parse(R"({
    "rules": [{"feature": "F0_mean", "op": "<", "threshold": 130, "label": 1,
               "rationale": "Low {feature} of {value} suggests flattened prosody."}],
    "default": {"label": 0}
  })"));
}

class FailingBackend final : public gp::Backend {
 public:
  explicit FailingBackend(gp::Reply::Status s) : status_(s) {}
  [[nodiscard]] std::string id() const override { return "failing"; }
  [[nodiscard]] gp::Reply complete(const std::string&, int) const override {
    ++calls;
    return {status_, status_ == gp::Reply::Status::kMalformed ? "<html>" : "", "broken"};
  }
  mutable int calls = 0;

 private:
  gp::Reply::Status status_;
};

}  // namespace

TEST(BuildPrompt, BlocksInOrderWithBiomarker) {
  const auto e = example_record();
  const auto b = gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline);
  const auto p = b.render();
  const auto d = p.find(gp::kDemographicsHeader);
  const auto bio = p.find(gp::kBiomarkersHeader);
  const auto t = p.find(gp::kTaskHeader);
  ASSERT_NE(d, std::string::npos);
  EXPECT_LT(d, bio);
  EXPECT_LT(bio, t);
  EXPECT_NE(p.find("- F0_mean: 120.5"), std::string::npos);
  EXPECT_NE(p.find("- gender: male"), std::string::npos);
  EXPECT_NE(p.find("score for the predicted label"), std::string::npos);
  EXPECT_EQ(p.find("AU04_r"), std::string::npos);
  EXPECT_EQ(b.max_output_tokens, 150);
}

TEST(BuildPrompt, EmptyBiomarkerBlockForKZero) {
  auto e = example_record();
  e.ranking.k = 0;
  const auto p = gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline).render();
  EXPECT_NE(p.find("- none selected"), std::string::npos);
  EXPECT_LT(p.find(gp::kDemographicsHeader), p.find(gp::kTaskHeader));
}

TEST(BuildPrompt, RenderedTwiceIsByteIdentical) {
  const auto e = example_record();
  const auto a = gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kIntervention);
  const auto b = gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kIntervention);
  EXPECT_EQ(a.render(), b.render());
}

TEST(BuildPrompt, MissingBiomarkerIsAnError) {
  auto e = example_record();
  e.data.records[0].features.resize(0);
  EXPECT_THROW(gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline),
               fairxai::DataError);
}

TEST(BuildPrompt, SixSignificantDigits) {
  EXPECT_EQ(gp::PromptBundle::format_value(120.5), "120.5");
  EXPECT_EQ(gp::PromptBundle::format_value(1.0 / 3.0), "0.333333");
  EXPECT_EQ(gp::PromptBundle::format_value(-0.0), "0");
}

TEST(PromptProperties, InterventionCarriesRulesAndTagsBaselineCarriesNeither) {
  const auto cohort = fairxai::synth::generate({fairxai::synth::Kind::kPlantedSignal, 30, 3, 0.5, 0.5});
  const auto ranking = fs::select_top_k(cohort, 4);
  for (const auto& r : cohort.records) {
    const auto base = gp::build_prompt(r, cohort.schema, ranking, Variant::kBaseline).render();
    const auto inter = gp::build_prompt(r, cohort.schema, ranking, Variant::kIntervention).render();
    for (const auto& p : {base, inter}) {
      EXPECT_LT(p.find(gp::kDemographicsHeader), p.find(gp::kBiomarkersHeader));
      EXPECT_LT(p.find(gp::kBiomarkersHeader), p.find(gp::kTaskHeader));
    }
    for (auto marker : gp::kFairnessRuleMarkers) {
      EXPECT_NE(inter.find(marker), std::string::npos) << marker;
      EXPECT_EQ(base.find(marker), std::string::npos) << marker;
    }
    for (const char* tag : {"<thinking>", "<classification>"}) {
      EXPECT_NE(inter.find(tag), std::string::npos);
      EXPECT_EQ(base.find(tag), std::string::npos);
    }
  }
}

TEST(PromptTemplates, ShippedFilesMatchBuiltInDefaults) {
  const auto loaded = gp::PromptTemplates::load(fairxai::testing::data_dir() / "templates");
  const gp::PromptTemplates builtin;
  EXPECT_EQ(loaded.version, builtin.version);
  EXPECT_EQ(loaded.task, builtin.task);
  EXPECT_EQ(loaded.reasoning_directive, builtin.reasoning_directive);
  EXPECT_EQ(loaded.fairness_rules, builtin.fairness_rules);
  EXPECT_EQ(loaded.hash(), builtin.hash());
}

TEST(ParseResponse, InterventionGrammar) {
  const auto r = gp::parse_response(
      "<thinking>low F0 variance</thinking><classification>Depressed</classification>",
      Variant::kIntervention);
  EXPECT_EQ(r.label, 1);
  EXPECT_EQ(r.rationale, "low F0 variance");
  const auto n = gp::parse_response("<classification>NOT DEPRESSED</classification>", Variant::kIntervention);
  EXPECT_EQ(n.label, 0);
  EXPECT_EQ(n.rationale, "");
}

TEST(ParseResponse, InnermostThinkingBlock) {
  const auto r = gp::parse_response(
      "<thinking>outer <thinking>inner</thinking></thinking><classification>depressed</classification>",
      Variant::kIntervention);
  EXPECT_EQ(r.rationale, "inner");
}

TEST(ParseResponse, NoMatchAbstains) {
  EXPECT_FALSE(gp::parse_response("the subject seems fine", Variant::kBaseline).label.has_value());
  EXPECT_FALSE(gp::parse_response("the subject seems fine", Variant::kIntervention).label.has_value());
  // Tags required under the intervention grammar.
  EXPECT_FALSE(gp::parse_response("Depressed", Variant::kIntervention).label.has_value());
}

TEST(ParseResponse, BaselineFirstMatchWinsAndKeepsPrefix) {
  const auto r = gp::parse_response("Flat affect and low energy. Depressed. Not depressed later.",
                                    Variant::kBaseline);
  EXPECT_EQ(r.label, 1);
  EXPECT_EQ(r.rationale, "Flat affect and low energy.");
  const auto n = gp::parse_response("Speech is lively; not depressed.", Variant::kBaseline);
  EXPECT_EQ(n.label, 0);
  EXPECT_EQ(n.rationale, "Speech is lively;");
  EXPECT_FALSE(gp::parse_response("undepressed", Variant::kBaseline).label.has_value());
}

TEST(ParseResponse, NumericScoreIsAuxiliary) {
  const auto r = gp::parse_response("Not depressed (score: 3)", Variant::kBaseline);
  EXPECT_EQ(r.label, 0);
  EXPECT_EQ(r.score, 3.0);
}

TEST(ParseResponseProperties, RenderRoundTrips) {
  for (int label : {0, 1}) {
    const auto r = gp::parse_response(gp::render_classification(label, "F0_mean is low"), Variant::kIntervention);
    EXPECT_EQ(r.label, label);
    EXPECT_EQ(r.rationale, "F0_mean is low");
  }
}

TEST(MockBackend, RuleMatchesExampleRecord) {
  const auto e = example_record();
  const gp::MockBackend mock(low_pitch_rule());
  const auto p = gp::classify(
      gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kIntervention), mock);
  EXPECT_EQ(p.label, 1);
  EXPECT_EQ(p.rationale, "Low F0_mean of 120.5 suggests flattened prosody.");
  EXPECT_EQ(p.backend_id, "mock");
  const auto base = gp::classify(
      gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline), mock);
  EXPECT_EQ(base.label, 1);
  EXPECT_NE(base.rationale.find("F0_mean"), std::string::npos);
}

TEST(MockBackend, KnobBoundsAreValidated) {
  EXPECT_THROW(gp::parse_mock_rules(fairxai::synth::mock_rules_json(1.5, 0)), fairxai::ConfigError);
  EXPECT_THROW(gp::parse_mock_rules(nlohmann::json::parse(
                   R"({"rules": [{"feature": "x", "op": "!=", "threshold": 1, "label": 1}]})")),
               fairxai::ConfigError);
}

TEST(MockBackendProperties, KnobOffIsDemographicsInvariant) {
  const auto cohort = fairxai::synth::generate({fairxai::synth::Kind::kBiasInjection, 200, 21, 0.5, 0.5});
  const auto ranking = fs::select_top_k(cohort, 3);
  const gp::MockBackend mock(gp::parse_mock_rules(fairxai::synth::mock_rules_json(0.0, 4)));
  const std::vector<std::map<std::string, std::string>> alternatives = {
      {{"gender", "male"}, {"race", "white"}},
      {{"gender", "female"}, {"race", "black"}},
      {{"gender", "female"}, {"race", "white"}},
      {}};
  for (const auto& r : cohort.records) {
    for (auto v : {Variant::kBaseline, Variant::kIntervention}) {
      const auto reference = gp::classify(gp::build_prompt(r, cohort.schema, ranking, v), mock).label;
      for (const auto& demo : alternatives) {
        auto swapped = r;
        swapped.demographics = demo;
        EXPECT_EQ(gp::classify(gp::build_prompt(swapped, cohort.schema, ranking, v), mock).label, reference);
      }
    }
  }
}

TEST(MockBackendProperties, DeterministicAndOrderFree) {
  const auto cohort = fairxai::synth::generate({fairxai::synth::Kind::kBiasInjection, 120, 5, 0.5, 0.5});
  const auto ranking = fs::select_top_k(cohort, 3);
  const gp::MockBackend mock(gp::parse_mock_rules(fairxai::synth::mock_rules_json(0.5, 9)));
  std::vector<gp::PromptBundle> bundles;
  for (const auto& r : cohort.records) bundles.push_back(gp::build_prompt(r, cohort.schema, ranking, Variant::kBaseline));
  const auto serial = gp::classify_all(bundles, mock, 1);
  const auto parallel = gp::classify_all(bundles, mock, 4);
  std::vector<gp::PromptBundle> reversed(bundles.rbegin(), bundles.rend());
  const auto backwards = gp::classify_all(reversed, mock, 1);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    EXPECT_EQ(serial[i].session_id, bundles[i].session_id);
    EXPECT_EQ(serial[i].raw_response, parallel[i].raw_response);
    EXPECT_EQ(serial[i].raw_response, backwards[bundles.size() - 1 - i].raw_response);
  }
}

TEST(Classify, TransportFailureRetriedOnceThenAbstains) {
  const auto e = example_record();
  const FailingBackend b(gp::Reply::Status::kTransportError);
  const auto p = gp::classify(gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline), b);
  EXPECT_EQ(b.calls, 2);
  EXPECT_TRUE(p.abstained());
  EXPECT_FALSE(p.error.empty());
}

TEST(Classify, MalformedReplyAbstainsWithoutRetry) {
  const auto e = example_record();
  const FailingBackend b(gp::Reply::Status::kMalformed);
  const auto p = gp::classify(gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline), b);
  EXPECT_EQ(b.calls, 1);
  EXPECT_TRUE(p.abstained());
  EXPECT_EQ(p.raw_response, "<html>");
}

TEST(WireBackend, RoundTripAgainstServedMock) {
  auto mock = std::make_shared<const gp::MockBackend>(low_pitch_rule());
  auto server = gp::make_mock_server(mock);
  const int port = server->bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server->listen_after_bind(); });
  server->wait_until_ready();

  const auto e = example_record();
  const gp::WireBackend wire(fmt::format("http://127.0.0.1:{}/generate", port), 10.0);
  const auto bundle = gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kIntervention);
  const auto over_wire = gp::classify(bundle, wire);
  const auto local = gp::classify(bundle, *mock);
  EXPECT_EQ(over_wire.label, 1);
  EXPECT_EQ(over_wire.raw_response, local.raw_response);
  EXPECT_EQ(over_wire.backend_id, fmt::format("wire:http://127.0.0.1:{}/generate", port));

  const gp::WireBackend wrong_path(fmt::format("http://127.0.0.1:{}/nope", port), 10.0);
  EXPECT_TRUE(gp::classify(bundle, wrong_path).abstained());
  server->stop();
  t.join();
}

TEST(WireBackend, UnreachableEndpointAbstains) {
  // Port 9 on loopback: nothing listens there in the test environment.
  const gp::WireBackend wire("http://127.0.0.1:9/generate", 2.0);
  const auto e = example_record();
  const auto p = gp::classify(gp::build_prompt(e.data.records[0], e.data.schema, e.ranking, Variant::kBaseline), wire);
  EXPECT_TRUE(p.abstained());
  EXPECT_NE(p.error.find("transport"), std::string::npos);
}

TEST(BackendSpec, ParsesArguments) {
  EXPECT_EQ(gp::parse_backend_arg("http://localhost:8080/generate").kind, gp::BackendSpec::Kind::kWire);
  EXPECT_THROW(gp::parse_backend_arg("ftp://x"), fairxai::ConfigError);
  const auto spec = gp::parse_backend_arg("mock:" + (fairxai::testing::data_dir() / "fixture" / "mock_rules.json").string());
  EXPECT_EQ(spec.kind, gp::BackendSpec::Kind::kMock);
  ASSERT_TRUE(spec.rules.bias.has_value());
  EXPECT_EQ(spec.rules.bias->minority_flip, 0.5);
}

TEST(Prediction, JsonRoundTrip) {
  gp::Prediction p;
  p.session_id = "S9";
  p.label = 0;
  p.rationale = "r";
  p.variant = Variant::kIntervention;
  p.backend_id = "mock";
  p.raw_response = "raw";
  p.score = 2.5;
  const auto back = gp::prediction_from_json(gp::to_json(p));
  EXPECT_EQ(back.label, p.label);
  EXPECT_EQ(back.variant, p.variant);
  EXPECT_EQ(back.score, p.score);
  EXPECT_EQ(gp::to_json(back), gp::to_json(p));
}
