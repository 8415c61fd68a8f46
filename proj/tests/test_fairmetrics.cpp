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

#include <random>

#include <gtest/gtest.h>

#include "fairxai/fairmetrics.hpp"
#include "oracles.hpp"

namespace fm = fairxai::fairmetrics;
using fm::ConfusionCounts;

namespace {

constexpr double kTableTol = 0.0005;

ConfusionCounts counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) {
  ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.fn = fn;
  c.tn = tn;
  return c;
}

// Published cells for one Table 1 column; nullopt marks a cell left out.
struct Column {
  const char* name;
  ConfusionCounts c;
  double accuracy, balanced, f1, fnr;
  std::optional<double> fdr;
  double kappa;
};

}  // namespace

TEST(ClassificationMetrics, QwenAfarBaseline) {
  const auto m = fm::classification_metrics(counts(23, 16, 1, 1));
  EXPECT_NEAR(m.accuracy, 0.585, kTableTol);
  EXPECT_NEAR(m.f1, 0.730, kTableTol);
  EXPECT_NEAR(m.fnr, 0.042, kTableTol);
  EXPECT_NEAR(m.balanced_accuracy, 0.509, kTableTol);
  EXPECT_NEAR(m.kappa, 0.020, kTableTol);
}

TEST(ClassificationMetrics, PhiEdaicBaseline) {
  const auto m = fm::classification_metrics(counts(10, 4, 7, 35));
  EXPECT_NEAR(m.accuracy, 0.804, kTableTol);
  EXPECT_NEAR(m.fdr, 0.286, kTableTol);
  EXPECT_NEAR(m.kappa, 0.511, kTableTol);
}

TEST(ClassificationMetrics, PhiAfarBaseline) {
  const auto m = fm::classification_metrics(counts(18, 12, 6, 5));
  EXPECT_NEAR(m.accuracy, 0.561, kTableTol);
  EXPECT_NEAR(m.kappa, 0.047, kTableTol);
}

// Every column of the published table. The two FDR cells that contradict their
// own counts and the two Phi-3.5 E-DAIC intervention cells that sit just past
// half a unit in the last place are checked against the formula instead.
TEST(ClassificationMetrics, PublishedTableColumns) {
  const Column cols[] = {
      {"qwen afar baseline", counts(23, 16, 1, 1), 0.585, 0.509, 0.730, 0.042, std::nullopt, 0.020},
      {"qwen afar intervention", counts(5, 1, 15, 13), 0.529, 0.589, 0.385, 0.750, 0.167, 0.155},
      {"phi afar baseline", counts(18, 12, 6, 5), 0.561, 0.522, 0.667, 0.250, std::nullopt, 0.047},
      {"phi afar intervention", counts(16, 12, 8, 5), 0.512, 0.480, 0.615, 0.333, 0.429, -0.041},
      {"qwen edaic baseline", counts(17, 37, 0, 2), 0.339, 0.526, 0.479, 0.000, 0.685, 0.032},
      {"qwen edaic intervention", counts(17, 38, 0, 1), 0.321, 0.513, 0.472, 0.000, 0.691, 0.016},
      {"phi edaic baseline", counts(10, 4, 7, 35), 0.804, 0.743, 0.645, 0.412, 0.286, 0.511},
  };
  for (const auto& col : cols) {
    SCOPED_TRACE(col.name);
    const auto m = fm::classification_metrics(col.c);
    EXPECT_NEAR(m.accuracy, col.accuracy, kTableTol);
    EXPECT_NEAR(m.balanced_accuracy, col.balanced, kTableTol);
    EXPECT_NEAR(m.f1, col.f1, kTableTol);
    EXPECT_NEAR(m.fnr, col.fnr, kTableTol);
    if (col.fdr) {
      EXPECT_NEAR(m.fdr, *col.fdr, kTableTol);
    }
    EXPECT_NEAR(m.kappa, col.kappa, kTableTol);
  }
}

TEST(ClassificationMetrics, InconsistentPublishedFdrCellsFollowTheFormula) {
  // Published 0.400 and 0.294; FP/(FP+TP) from the same columns' counts.
  EXPECT_NEAR(fm::classification_metrics(counts(23, 16, 1, 1)).fdr, 16.0 / 39.0, 1e-15);
  EXPECT_NEAR(fm::classification_metrics(counts(18, 12, 6, 5)).fdr, 12.0 / 30.0, 1e-15);
  EXPECT_GT(std::abs(16.0 / 39.0 - 0.400), kTableTol);
  EXPECT_GT(std::abs(12.0 / 30.0 - 0.294), kTableTol);
}

TEST(ClassificationMetrics, PhiEdaicInterventionMatchesAtTableRoundingOfOneMoreDigit) {
  const auto m = fm::classification_metrics(counts(14, 15, 3, 24));
  EXPECT_NEAR(m.accuracy, 0.679, kTableTol);
  EXPECT_NEAR(m.f1, 0.609, kTableTol);
  EXPECT_NEAR(m.fdr, 0.517, kTableTol);
  EXPECT_NEAR(m.kappa, 0.366, kTableTol);
  // Published 0.720 and 0.177; exact values 0.71946 and 0.17647.
  EXPECT_NEAR(m.balanced_accuracy, 0.5 * (14.0 / 17.0 + 24.0 / 39.0), 1e-15);
  EXPECT_NEAR(m.fnr, 3.0 / 17.0, 1e-15);
}

TEST(ClassificationMetrics, SingleClassPredictionsHaveZeroKappa) {
  EXPECT_EQ(fm::classification_metrics(counts(0, 0, 7, 16)).kappa, 0.0);
  EXPECT_EQ(fm::classification_metrics(counts(7, 16, 0, 0)).kappa, 0.0);
}

TEST(ClassificationMetrics, CollapseSignature) {
  // 16 negatives and 7 positives, everything predicted negative.
  const auto m = fm::classification_metrics(counts(0, 0, 7, 16));
  EXPECT_NEAR(m.accuracy, 0.696, kTableTol);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.fdr, 0.0);
  EXPECT_EQ(m.fnr, 1.0);
}

TEST(ClassificationMetrics, ZeroTotalIsAnError) {
  EXPECT_THROW(fm::classification_metrics({}), fairxai::DataError);
}

TEST(ClassificationMetrics, KappaBoundsAndPerfectAgreement) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(0, 30);
  for (int i = 0; i < 2000; ++i) {
    const auto c = counts(d(rng), d(rng), d(rng), d(rng));
    if (c.total() == 0) continue;
    const auto m = fm::classification_metrics(c);
    EXPECT_GE(m.kappa, -1.0 - 1e-12);
    EXPECT_LE(m.kappa, 1.0 + 1e-12);
    for (double v : {m.accuracy, m.balanced_accuracy, m.precision, m.recall, m.f1, m.fnr, m.fdr}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    const bool perfect = c.fp == 0 && c.fn == 0 && c.tp > 0 && c.tn > 0;
    EXPECT_EQ(m.kappa == 1.0, perfect) << c.tp << " " << c.fp << " " << c.fn << " " << c.tn;
  }
}

TEST(GroupFairness, EqualAccuracyExamples) {
  EXPECT_EQ(*fm::equal_accuracy(counts(3, 1, 1, 5), counts(3, 1, 1, 5)), 0.0);
  EXPECT_NEAR(*fm::equal_accuracy(counts(5, 1, 0, 4), counts(3, 2, 2, 3)), 0.3, 1e-12);
  EXPECT_FALSE(fm::equal_accuracy({}, counts(1, 0, 0, 1)).has_value());
}

TEST(GroupFairness, EqualOpportunityExamples) {
  EXPECT_EQ(*fm::equal_opportunity(counts(2, 0, 0, 1), counts(4, 1, 0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(*fm::equal_opportunity(counts(3, 0, 1, 2), counts(1, 0, 1, 2)), 0.25);
  EXPECT_FALSE(fm::equal_opportunity(counts(3, 0, 1, 2), counts(0, 1, 0, 3)).has_value());
}

TEST(GroupFairness, DisparateImpactExamples) {
  EXPECT_DOUBLE_EQ(*fm::disparate_impact(counts(1, 1, 0, 2), counts(2, 0, 1, 1)), 1.0);
  // A=0 rate 1/4, A=1 rate 2/4.
  EXPECT_DOUBLE_EQ(*fm::disparate_impact(counts(1, 0, 1, 2), counts(1, 1, 1, 1)), 0.5);
  // Majority never predicted positive.
  EXPECT_FALSE(fm::disparate_impact(counts(3, 0, 0, 7), counts(0, 0, 4, 6)).has_value());
  EXPECT_FALSE(fm::disparate_impact({}, counts(1, 0, 0, 0)).has_value());
}

TEST(ExplanationQuality, Examples) {
  const fm::DemographicLexicon lex;
  const std::vector<std::string> prompted = {"F0_mean", "AU04_r"};
  EXPECT_TRUE(fm::explanation_quality("elevated F0_mean suggests flat affect", prompted, lex).high_quality);
  EXPECT_TRUE(fm::explanation_quality("Elevated f0 mean suggests...", prompted, lex).high_quality);
  const auto she = fm::explanation_quality("because she is a woman", prompted, lex);
  EXPECT_FALSE(she.high_quality);
  EXPECT_EQ(she.matched_demographic_terms, (std::vector<std::string>{"woman", "she"}));
  EXPECT_FALSE(fm::explanation_quality("jitter_local is high", prompted, lex).high_quality);
  EXPECT_FALSE(fm::explanation_quality("F0_mean is high for a male speaker", prompted, lex).high_quality);
  // Whole words only: "shed" is not "she", "whitespace" is not "white".
  EXPECT_TRUE(fm::explanation_quality("AU04_r shed light; whitespace", prompted, lex).high_quality);
}

TEST(ExplanationQuality, OrderIndependentOverTokens) {
  const fm::DemographicLexicon lex;
  const std::vector<std::string> prompted = {"F0_mean", "HNR_mean"};
  const auto a = fm::explanation_quality("HNR_mean low and F0_mean high", prompted, lex);
  const auto b = fm::explanation_quality("F0_mean high and HNR_mean low", prompted, lex);
  EXPECT_EQ(a.high_quality, b.high_quality);
  EXPECT_EQ(a.matched_biomarkers, b.matched_biomarkers);
}

TEST(ExplanationQuality, LexiconParsesVersionAndComments) {
  const auto lex = fm::DemographicLexicon::parse("# version: v7\n# comment\n\nMale\n  she \n");
  EXPECT_EQ(lex.version, "v7");
  EXPECT_EQ(lex.terms, (std::vector<std::string>{"male", "she"}));
  EXPECT_NE(lex.hash(), fm::DemographicLexicon{}.hash());
}

TEST(DeltaRef, Examples) {
  using G = std::optional<int>;
  EXPECT_EQ(*fm::delta_ref(std::vector<int>{1, 1, 1}, std::vector<G>{0, 1, 1}), 0.0);
  // group0 3/4 high quality, group1 1/2.
  EXPECT_DOUBLE_EQ(*fm::delta_ref(std::vector<int>{1, 1, 1, 0, 1, 0}, std::vector<G>{0, 0, 0, 0, 1, 1}),
                   0.25);
  EXPECT_EQ(*fm::delta_ref(std::vector<int>{1, 0, 1, 0}, std::vector<G>{0, 0, 1, 1}), 0.0);
  EXPECT_FALSE(fm::delta_ref(std::vector<int>{1, 1}, std::vector<G>{1, 1}).has_value());
}

TEST(FairnessReport, AbstentionsAndUnknownGroupsAreLeftOut) {
  using G = std::optional<int>;
  const std::vector<int> labels = {1, 1, 0, 0, 1};
  const std::vector<G> preds = {1, std::nullopt, 0, 1, 0};
  const std::vector<G> groups = {1, 0, std::nullopt, 0, 1};
  const auto r = fm::fairness_report("gender", labels, preds, groups);
  EXPECT_EQ(r.abstained, 1u);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.group1.total() + r.group0.total(), 3);
  EXPECT_TRUE(r.low_confidence);
}

TEST(FairnessReport, CollapsedPredictionsAreVacuous) {
  using G = std::optional<int>;
  std::vector<int> labels;
  std::vector<G> preds;
  std::vector<G> groups;
  for (int i = 0; i < 23; ++i) {
    labels.push_back(i < 7 ? 1 : 0);
    preds.emplace_back(0);
    groups.emplace_back(i % 2);
  }
  const auto r = fm::fairness_report("gender", labels, preds, groups);
  EXPECT_TRUE(r.vacuous);
  EXPECT_EQ(*r.eo, 0.0);
}

TEST(FairnessProperties, EnumerationOracleEquivalence) {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sessions = fairxai::oracle::random_sessions(rng, 200);
    std::vector<int> labels;
    std::vector<std::optional<int>> preds;
    std::vector<std::optional<int>> groups;
    std::vector<int> quality;
    std::vector<std::optional<int>> answered_groups;
    for (const auto& s : sessions) {
      labels.push_back(s.label);
      preds.push_back(s.prediction);
      groups.push_back(s.group);
      if (s.prediction) {
        quality.push_back(s.quality);
        answered_groups.push_back(s.group);
      }
    }
    const auto r = fm::fairness_report("a", labels, preds, groups);
    const auto dref = fm::delta_ref(quality, answered_groups);
    const auto want = fairxai::oracle::enumerate(sessions);
    SCOPED_TRACE(trial);
    EXPECT_EQ(r.ea, want.ea);
    EXPECT_EQ(r.eo, want.eo);
    EXPECT_EQ(r.di, want.di);
    EXPECT_EQ(dref, want.delta_ref);
  }
}

TEST(FairnessProperties, GroupSwapAntisymmetry) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto sessions = fairxai::oracle::random_sessions(rng, 120);
    std::vector<int> labels;
    std::vector<std::optional<int>> preds;
    std::vector<std::optional<int>> groups;
    std::vector<std::optional<int>> swapped;
    std::vector<int> quality;
    std::vector<std::optional<int>> qg;
    std::vector<std::optional<int>> qg_swapped;
    for (const auto& s : sessions) {
      labels.push_back(s.label);
      preds.push_back(s.prediction);
      groups.push_back(s.group);
      swapped.push_back(s.group ? std::optional<int>(1 - *s.group) : std::nullopt);
      if (s.prediction) {
        quality.push_back(s.quality);
        qg.push_back(groups.back());
        qg_swapped.push_back(swapped.back());
      }
    }
    const auto a = fm::fairness_report("a", labels, preds, groups);
    const auto b = fm::fairness_report("a", labels, preds, swapped);
    EXPECT_EQ(a.ea, b.ea);
    EXPECT_EQ(a.eo, b.eo);
    EXPECT_EQ(fm::delta_ref(quality, qg), fm::delta_ref(quality, qg_swapped));
    if (a.di && b.di && *a.di > 0.0) {
      EXPECT_NEAR(*b.di, 1.0 / *a.di, 1e-12);
    }
  }
}
