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

// Run configuration and the end-to-end audit: ingest, select, classify or
// train, metrics, report. Outputs are staged in a sibling directory and only
// moved into place when every stage succeeded.

#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairxai/cfa.hpp"
#include "fairxai/charts.hpp"
#include "fairxai/common.hpp"
#include "fairxai/dataset.hpp"
#include "fairxai/embedpipe.hpp"
#include "fairxai/fairmetrics.hpp"
#include "fairxai/featsel.hpp"
#include "fairxai/genpipe/backend.hpp"
#include "fairxai/genpipe/prompt.hpp"
#include "fairxai/report.hpp"
#include "fairxai/sweep.hpp"

namespace fairxai::audit {

struct AttributeSpec {
  std::string name;
  std::string majority;
};

struct RunConfig {
  nlohmann::json raw;          // the config as given, after command-line overrides
  std::filesystem::path base;  // relative paths resolve against this

  std::filesystem::path dataset;
  std::string pipeline;  // generative | embedding
  std::vector<Variant> variants;
  std::optional<std::string> backend;
  int backend_parallel = 1;
  double backend_timeout = 60.0;
  int k = 10;
  int bins = featsel::kDefaultBins;
  std::optional<std::filesystem::path> split;
  embedpipe::TrainConfig training;
  nn::Architecture architecture;
  std::vector<embedpipe::TextEmbeddingSource> text_sources;
  bool ablation = true;
  bool sweep = true;
  std::vector<double> lambdas = {0.1, 0.5};
  int ig_steps = cfa::kDefaultIgSteps;
  bool global_correlation = false;
  std::vector<AttributeSpec> attributes = {{"gender", "male"}};
  std::optional<std::filesystem::path> templates;
  std::optional<std::filesystem::path> lexicon;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::filesystem::path output = "fairxai-out";
};

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset", "pipeline",     "variant",  "backend", "backend_parallel", "backend_timeout",
      "feature_selection",       "split",    "training", "text_embeddings",  "ablation",
      "sweep",   "cfa",          "attributes", "templates", "lexicon",       "seed",
      "parallelism",             "output"};
  return keys;
}

/// Parses a run config. Unknown keys are rejected so typos cannot silently
/// fall back to defaults.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!known_keys().contains(k)) throw ConfigError(fmt::format("run config: unknown key '{}'", k));
  }
  RunConfig c;
  c.raw = j;
  c.base = base;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  try {
    c.dataset = resolve(j.at("dataset").get<std::string>());
    c.pipeline = j.at("pipeline").get<std::string>();
    if (c.pipeline != "generative" && c.pipeline != "embedding") {
      throw ConfigError(fmt::format("pipeline must be 'generative' or 'embedding', got '{}'", c.pipeline));
    }
    const std::string variant = j.value("variant", std::string("both"));
    if (variant == "both") {
      c.variants = {Variant::kBaseline, Variant::kIntervention};
    } else {
      c.variants = {parse_variant(variant)};
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.parallelism = j.value("parallelism", 1);
    if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (j.contains("backend")) {
      std::string b = j["backend"].get<std::string>();
      if (b.starts_with("mock:")) b = "mock:" + resolve(b.substr(5)).string();
      c.backend = b;
    }
    c.backend_parallel = j.value("backend_parallel", c.parallelism);
    c.backend_timeout = j.value("backend_timeout", 60.0);
    if (j.contains("feature_selection")) {
      const auto& f = j["feature_selection"];
      c.k = f.value("k", c.k);
      c.bins = f.value("bins", c.bins);
    }
    if (c.bins < 1) throw ConfigError("feature_selection.bins must be >= 1");
    if (j.contains("split")) c.split = resolve(j["split"].get<std::string>());
    c.training.seed = c.seed;
    if (j.contains("training")) {
      const auto& t = j["training"];
      c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
      c.training.momentum = t.value("momentum", c.training.momentum);
      c.training.epochs = t.value("epochs", c.training.epochs);
      c.training.batch_size = t.value("batch_size", c.training.batch_size);
      c.architecture.dropout = t.value("dropout", c.architecture.dropout);
      c.architecture.encoder_hidden = t.value("encoder_hidden", c.architecture.encoder_hidden);
      c.architecture.head_hidden = t.value("head_hidden", c.architecture.head_hidden);
      if (t.contains("class_weights")) {
        const auto w = t["class_weights"].get<std::vector<double>>();
        if (w.size() != 2) throw ConfigError("training.class_weights needs [w0, w1]");
        c.training.class_weights = nn::ClassWeights{w[0], w[1]};
      }
    }
    if (c.training.epochs < 0) throw ConfigError("training.epochs must be >= 0");
    if (j.contains("text_embeddings")) {
      for (const auto& t : j["text_embeddings"]) {
        embedpipe::TextEmbeddingSource s;
        s.name = t.at("name").get<std::string>();
        s.dim = t.at("dim").get<int>();
        if (t.contains("file")) s.file = resolve(t["file"].get<std::string>());
        s.seed = t.value("seed", c.seed);
        c.text_sources.push_back(std::move(s));
      }
    } else {
      embedpipe::TextEmbeddingSource s;
      s.name = "synthetic";
      s.seed = c.seed;
      c.text_sources.push_back(s);
    }
    c.ablation = j.value("ablation", true);
    c.sweep = j.value("sweep", true);
    if (j.contains("cfa")) {
      const auto& f = j["cfa"];
      c.lambdas = f.value("lambdas", c.lambdas);
      c.ig_steps = f.value("ig_steps", c.ig_steps);
      c.global_correlation = f.value("global_correlation", false);
    }
    if (c.ig_steps < 1) throw ConfigError("cfa.ig_steps must be >= 1");
    if (j.contains("attributes")) {
      c.attributes.clear();
      for (const auto& a : j["attributes"]) {
        c.attributes.push_back({a.at("name").get<std::string>(), a.at("majority").get<std::string>()});
      }
    }
    if (c.attributes.empty()) throw ConfigError("at least one fairness attribute is required");
    if (j.contains("templates")) c.templates = resolve(j["templates"].get<std::string>());
    if (j.contains("lexicon")) c.lexicon = resolve(j["lexicon"].get<std::string>());
    c.output = resolve(j.value("output", std::string("fairxai-out")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("run config: {}", e.what()));
  }
  if (c.pipeline == "generative" && !c.backend) throw ConfigError("generative pipeline needs a backend");
  if (c.pipeline == "embedding" && !c.split) throw ConfigError("embedding pipeline needs a split file");
  if (c.pipeline == "embedding" && c.lambdas.empty()) throw ConfigError("cfa.lambdas must not be empty");
  return c;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::string> backend;
};

inline RunConfig read_run_config(const std::filesystem::path& path, const Overrides& o = {}) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError(fmt::format("config file '{}' not found", path.string()));
  }
  auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError(fmt::format("{}: invalid JSON", path.string()));
  const auto base = path.parent_path();
  // Overrides given on the command line are relative to the working directory.
  if (o.seed) j["seed"] = *o.seed;
  if (o.output) j["output"] = std::filesystem::absolute(*o.output).string();
  if (o.backend) {
    j["backend"] = o.backend->starts_with("mock:")
                       ? "mock:" + std::filesystem::absolute(o.backend->substr(5)).string()
                       : *o.backend;
  }
  return parse_run_config(j, base);
}

// ---- stages --------------------------------------------------------------------

/// Runs `fn`, prefixing any error with the stage name and keeping its kind.
template <typename Fn>
auto stage(std::string_view name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("[{}] {}", name, e.what()));
  } catch (const BackendError& e) {
    throw BackendError(fmt::format("[{}] {}", name, e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("[{}] {}", name, e.what()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("[{}] {}", name, e.what()));
  } catch (const std::filesystem::filesystem_error& e) {
    throw DataError(fmt::format("[{}] {}", name, e.what()));
  }
}

inline void preflight(const RunConfig& c) {
  auto must_exist = [](const std::filesystem::path& p, std::string_view what) {
    if (!std::filesystem::exists(p)) {
      throw ConfigError(fmt::format("{} '{}' not found", what, p.string()));
    }
  };
  must_exist(c.dataset, "dataset manifest");
  if (c.split) must_exist(*c.split, "split file");
  if (c.templates) must_exist(*c.templates, "template directory");
  if (c.lexicon) must_exist(*c.lexicon, "lexicon");
  for (const auto& s : c.text_sources) {
    if (s.file) must_exist(*s.file, "text-embedding file");
  }
  if (c.backend && c.backend->starts_with("mock:")) must_exist(c.backend->substr(5), "mock rule file");
}

inline std::vector<dataset::GroupAssignment> assign_all(const RunConfig& c,
                                                        std::span<const dataset::SessionRecord> records) {
  std::vector<dataset::GroupAssignment> out;
  for (const auto& a : c.attributes) out.push_back(dataset::assign_groups(records, a.name, a.majority));
  return out;
}

/// Metrics for one generative variant. `predictions` follow `ds.records`.
inline report::VariantResult evaluate_generative(const dataset::Dataset& ds,
                                                 const std::vector<genpipe::Prediction>& predictions,
                                                 const std::vector<std::string>& prompted,
                                                 const std::vector<AttributeSpec>& attributes,
                                                 const fairmetrics::DemographicLexicon& lexicon,
                                                 Variant variant) {
  if (predictions.size() != ds.records.size()) throw DataError("prediction count does not match dataset");
  report::VariantResult v;
  v.variant = variant;
  v.sessions = ds.records.size();
  std::vector<int> labels;
  std::vector<std::optional<int>> preds;
  std::vector<int> answered;
  std::vector<std::size_t> answered_rows;
  std::size_t high = 0;
  std::vector<int> quality;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    if (p.session_id != ds.records[i].session_id) {
      throw DataError(fmt::format("prediction for '{}' out of order", p.session_id));
    }
    labels.push_back(ds.records[i].label);
    preds.push_back(p.label);
    if (!p.error.empty() && p.raw_response.empty()) ++v.backend_errors;
    if (p.abstained()) {
      ++v.abstained;
      continue;
    }
    v.counts.add(ds.records[i].label, *p.label);
    answered.push_back(*p.label);
    answered_rows.push_back(i);
    const bool hq = fairmetrics::explanation_quality(p.rationale, prompted, lexicon).high_quality;
    quality.push_back(hq ? 1 : 0);
    high += hq ? 1 : 0;
  }
  if (v.counts.total() == 0) throw DataError("every session abstained; no metrics can be computed");
  v.metrics = fairmetrics::classification_metrics(v.counts);
  v.collapsed = fairmetrics::is_collapsed(answered);
  v.explanation_quality = std::pair{high, answered.size()};
  for (const auto& a : attributes) {
    const auto g = dataset::assign_groups(ds.records, a.name, a.majority);
    report::AttributeAudit audit;
    audit.majority = a.majority;
    audit.fairness = fairmetrics::fairness_report(a.name, labels, preds, g.flag);
    std::vector<std::optional<int>> answered_groups;
    for (auto r : answered_rows) answered_groups.push_back(g.flag[r]);
    audit.delta_ref = fairmetrics::delta_ref(quality, answered_groups);
    audit.delta_ref_available = true;
    v.attributes.emplace_back(a.name, std::move(audit));
  }
  return v;
}

/// Metrics for one embedding-pipeline variant on the test sessions.
inline report::VariantResult evaluate_embedding(const dataset::Dataset& ds,
                                                std::span<const std::size_t> test_rows,
                                                const std::vector<int>& predictions,
                                                const std::vector<AttributeSpec>& attributes,
                                                Variant variant) {
  report::VariantResult v;
  v.variant = variant;
  v.sessions = test_rows.size();
  std::vector<int> labels;
  for (auto r : test_rows) labels.push_back(ds.records[r].label);
  for (std::size_t i = 0; i < labels.size(); ++i) v.counts.add(labels[i], predictions[i]);
  v.metrics = fairmetrics::classification_metrics(v.counts);
  v.collapsed = fairmetrics::is_collapsed(predictions);
  std::vector<std::optional<int>> preds(predictions.begin(), predictions.end());
  for (const auto& a : attributes) {
    const auto g = dataset::assign_groups(ds.records, a.name, a.majority);
    std::vector<std::optional<int>> groups;
    for (auto r : test_rows) groups.push_back(g.flag[r]);
    report::AttributeAudit audit;
    audit.majority = a.majority;
    audit.fairness = fairmetrics::fairness_report(a.name, labels, preds, groups);
    v.attributes.emplace_back(a.name, std::move(audit));
  }
  return v;
}

inline std::string loss_trace_csv(const embedpipe::LossTrace& t) {
  std::string out = "epoch,L_CE,L_CFA,L_total\n";
  for (std::size_t e = 0; e < t.epochs.size(); ++e) {
    out += fmt::format("{},{:.10g},{:.10g},{:.10g}\n", e + 1, t.epochs[e].ce, t.epochs[e].cfa,
                       t.epochs[e].total);
  }
  return out;
}

inline std::string predictions_jsonl(const std::vector<genpipe::Prediction>& ps) {
  std::string out;
  for (const auto& p : ps) out += genpipe::to_json(p).dump(-1, ' ', false) + "\n";
  return out;
}

struct RunOutcome {
  report::AuditReport report;
  nlohmann::json results;
  std::vector<std::string> files;  // relative to the output directory
  std::filesystem::path output;
};

namespace detail {

inline std::string file_hash(const std::filesystem::path& p) { return sha256_hex(read_text_file(p)); }

/// Staging directory next to the final output; removed on failure.
class Staging {
 public:
  explicit Staging(std::filesystem::path final_dir)
      : final_(std::move(final_dir)),
        tmp_(final_.parent_path() / ("." + final_.filename().string() + ".partial")) {
    std::filesystem::remove_all(tmp_);
    std::filesystem::create_directories(tmp_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    if (!committed_) {
      std::error_code ec;
      std::filesystem::remove_all(tmp_, ec);
    }
  }

  [[nodiscard]] const std::filesystem::path& dir() const { return tmp_; }

  void write(const std::string& name, std::string_view body) {
    write_text_file(tmp_ / name, body);
    files_.push_back(name);
  }

  std::vector<std::string> commit() {
    std::filesystem::remove_all(final_);
    std::filesystem::rename(tmp_, final_);
    committed_ = true;
    return files_;
  }

  std::vector<std::string>& files() { return files_; }

 private:
  std::filesystem::path final_;
  std::filesystem::path tmp_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

}  // namespace detail

/// The full audit. Throws ConfigError / DataError / BackendError prefixed with
/// the failing stage; in that case nothing is left in the output location.
inline RunOutcome run(const RunConfig& c) {
  stage("preflight", [&] { preflight(c); });
  const auto templates = stage("preflight", [&] {
    return c.templates ? genpipe::PromptTemplates::load(*c.templates) : genpipe::PromptTemplates{};
  });
  const auto lexicon = stage("preflight", [&] {
    return c.lexicon ? fairmetrics::DemographicLexicon::load(*c.lexicon) : fairmetrics::DemographicLexicon{};
  });
  std::optional<genpipe::BackendSpec> backend_spec;
  if (c.pipeline == "generative") {
    backend_spec = stage("preflight", [&] {
      auto spec = genpipe::parse_backend_arg(*c.backend);
      spec.rules.seed += c.seed;
      spec.parallel = c.backend_parallel;
      spec.timeout_seconds = c.backend_timeout;
      return spec;
    });
  }
  std::optional<embedpipe::Split> split;
  if (c.split) split = stage("preflight", [&] { return embedpipe::read_split(*c.split); });

  const auto ds = stage("ingest", [&] { return dataset::load(dataset::read_manifest(c.dataset)); });

  RunOutcome out;
  out.output = c.output;
  auto& rep = out.report;
  rep.pipeline = c.pipeline;

  nlohmann::json m;
  m["dataset_hash"] = sha256_hex(dataset::to_json(ds).dump());
  m["sessions"] = ds.records.size();
  m["dropped_sessions"] = ds.tally.dropped();
  m["label_threshold"] = ds.label_threshold;
  m["template_hash"] = templates.hash();
  m["template_version"] = templates.version;
  m["lexicon_hash"] = lexicon.hash();
  m["lexicon_version"] = lexicon.version;
  m["seed"] = c.seed;
  m["parallelism"] = c.parallelism;
  m["pipeline"] = c.pipeline;
  m["attributes"] = nlohmann::json::array();
  for (const auto& a : c.attributes) m["attributes"].push_back({{"name", a.name}, {"majority", a.majority}});
  std::string referenced = m["dataset_hash"].get<std::string>() + templates.hash() + lexicon.hash();
  if (split) {
    m["split_hash"] = split->hash();
    referenced += split->hash();
  }
  if (backend_spec) {
    m["backend"] = backend_spec->kind == genpipe::BackendSpec::Kind::kMock
                       ? "mock:" + detail::file_hash(backend_spec->rules_path)
                       : backend_spec->endpoint;
    referenced += m["backend"].get<std::string>();
  }
  if (c.pipeline == "embedding") {
    m["text_embeddings"] = nlohmann::json::array();
    for (const auto& s : c.text_sources) {
      const auto fp = stage("preflight", [&] { return s.fingerprint(); });
      m["text_embeddings"].push_back({{"name", s.name}, {"fingerprint", fp}});
      referenced += fp;
    }
  }
  // Every config field is part of the hash, including the ones with defaults.
  m["config_hash"] = sha256_hex(c.raw.dump() + "\n" + referenced);

  detail::Staging staging(c.output);
  const auto attr_names = [&] {
    std::vector<std::string> v;
    for (const auto& a : c.attributes) v.push_back(a.name);
    return v;
  }();

  if (c.pipeline == "generative") {
    const auto ranking = stage("select", [&] { return featsel::select_top_k(ds, c.k, c.bins); });
    m["feature_selection"] = {{"k", c.k},
                              {"bins", c.bins},
                              {"mi_unit", "nats"},
                              {"tie_break", "column order"},
                              {"selected", nlohmann::json::array()}};
    std::vector<std::string> prompted;
    for (const auto& f : ranking.top()) {
      prompted.push_back(f.name);
      m["feature_selection"]["selected"].push_back(f.name);
    }
    staging.write("ranking.csv", featsel::to_csv(ranking));
    const auto backend = stage("classify", [&] { return genpipe::make_backend(*backend_spec); });
    for (auto variant : c.variants) {
      const auto preds = stage("classify", [&] {
        std::vector<genpipe::PromptBundle> bundles;
        for (const auto& r : ds.records) {
          bundles.push_back(genpipe::build_prompt(r, ds.schema, ranking, variant, templates));
        }
        auto ps = genpipe::classify_all(bundles, *backend, backend_spec->parallel);
        const bool all_failed = std::all_of(ps.begin(), ps.end(), [](const auto& p) {
          return p.abstained() && p.raw_response.empty() && !p.error.empty();
        });
        if (all_failed && !ps.empty()) {
          throw BackendError(fmt::format("backend unreachable for every session ({})", ps.front().error));
        }
        return ps;
      });
      staging.write(fmt::format("predictions_{}.jsonl", to_string(variant)), predictions_jsonl(preds));
      rep.variants.push_back(stage("metrics", [&] {
        return evaluate_generative(ds, preds, prompted, c.attributes, lexicon, variant);
      }));
    }
  } else {
    embedpipe::ExperimentSetup setup;
    setup.train = c.training;
    setup.architecture = c.architecture;
    setup.attribute = c.attributes.front().name;
    setup.majority = c.attributes.front().majority;
    setup.parallelism = c.parallelism;
    cfa::CfaConfig cfa_base;
    cfa_base.ig_steps = c.ig_steps;
    cfa_base.attribute = setup.attribute;
    cfa_base.majority = setup.majority;
    cfa_base.global_correlation = c.global_correlation;
    const double lambda_max = *std::max_element(c.lambdas.begin(), c.lambdas.end());
    m["training"] = {{"learning_rate", c.training.learning_rate},
                     {"momentum", c.training.momentum},
                     {"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"dropout", c.architecture.dropout},
                     {"baseline", "full_fusion, cross-entropy only"},
                     {"intervention", fmt::format("full_fusion, CFA lambda={}", lambda_max)}};
    m["cfa"] = {{"lambdas", c.lambdas},
                {"ig_steps", c.ig_steps},
                {"correlation", c.global_correlation ? "global" : "per-batch"},
                {"attribute", setup.attribute},
                {"target_class", cfa_base.target_class}};

    const auto& primary = c.text_sources.front();
    const auto inputs = stage("train", [&] { return embedpipe::modality_inputs(ds, primary); });
    const auto mask = nn::modalities_of(nn::AblationConfig::kFullFusion);
    const auto prep = stage("train", [&] {
      if (auto why = embedpipe::missing_modality(inputs, mask)) throw DataError(*why);
      return embedpipe::prepare(ds, inputs, mask, *split, setup);
    });
    const auto test_rows = embedpipe::resolve_split(*split, ds.records).second;
    std::vector<std::string> test_ids;
    for (auto r : test_rows) test_ids.push_back(ds.records[r].session_id);
    for (auto variant : c.variants) {
      std::optional<cfa::CfaConfig> cfg;
      if (variant == Variant::kIntervention) {
        cfg = cfa_base;
        cfg->lambda = lambda_max;
      }
      const auto trained = stage("train", [&] {
        return embedpipe::train(nn::FusionModel::create(prep.arch, mask, c.training.seed), prep.train,
                                c.training, cfg);
      });
      staging.write(fmt::format("loss_trace_{}.csv", to_string(variant)), loss_trace_csv(trained.trace));
      const auto preds = embedpipe::predict(trained.model, prep.test_x);
      rep.variants.push_back(stage("metrics", [&] {
        return evaluate_embedding(ds, test_rows, preds, c.attributes, variant);
      }));
      if (variant == Variant::kIntervention) {
        const auto ig = cfa::integrated_gradients(trained.model, prep.test_x,
                                                  nn::RowVector::Zero(prep.test_x.cols()), c.ig_steps,
                                                  cfa_base.target_class);
        staging.write("attributions_intervention.csv",
                      cfa::attribution_csv(test_ids, cfa::fused_feature_names(ds.schema, inputs, mask), ig));
      }
    }
    if (c.ablation) {
      rep.ablation = stage("ablate", [&] { return embedpipe::run_ablation(ds, *split, c.text_sources, setup); });
    }
    if (c.sweep) {
      rep.pareto = stage("sweep", [&] {
        return cfa::pareto_sweep(ds, *split, primary, c.lambdas, setup, cfa_base).rows;
      });
    }
  }

  rep.manifest = m;
  out.results = report::to_json(rep);
  stage("report", [&] {
    if (auto errs = report::validate(out.results); !errs.empty()) {
      throw DataError("results failed schema validation: " + errs.front());
    }
    staging.write("results.json", report::dump(out.results));
    staging.write("table1.csv", report::table1_csv(out.results));
    if (!out.results["ablation"].is_null()) {
      staging.write("ablation.csv", report::ablation_csv(out.results["ablation"]));
    }
    if (!out.results["pareto"].is_null()) {
      staging.write("pareto.csv", report::pareto_csv(out.results["pareto"]));
    }
  });
  stage("charts", [&] {
    for (const auto& f : charts::emit_charts(out.results, staging.dir() / "charts")) {
      staging.files().push_back("charts/" + f);
    }
  });
  out.files = stage("report", [&] { return staging.commit(); });
  return out;
}

}  // namespace fairxai::audit
