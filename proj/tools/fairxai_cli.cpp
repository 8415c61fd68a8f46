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

// fairxai: command-line front end. Each verb reads the previous stage's
// outputs, so a run can be replayed stage by stage.
//
// Exit codes: 0 success, 2 config error, 3 backend error, 4 data error.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fairxai/audit.hpp"
#include "fairxai/synthetic.hpp"

namespace fx = fairxai;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitData = 4;

fx::dataset::Dataset read_dataset_json(const std::string& path) {
  if (!std::filesystem::exists(path)) throw fx::ConfigError(fmt::format("dataset file '{}' not found", path));
  const auto j = nlohmann::json::parse(fx::read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw fx::DataError(fmt::format("{}: invalid JSON", path));
  return fx::dataset::from_json(j);
}

nlohmann::json read_json(const std::string& path) {
  if (!std::filesystem::exists(path)) throw fx::ConfigError(fmt::format("'{}' not found", path));
  const auto j = nlohmann::json::parse(fx::read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw fx::DataError(fmt::format("{}: invalid JSON", path));
  return j;
}

void emit(const std::string& out, std::string_view body) {
  if (out.empty() || out == "-") {
    std::cout << body;
  } else {
    fx::write_text_file(out, body);
  }
}

struct TrainFlags {
  std::string dataset;
  std::string split;
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 100;
  int batch = 16;
  double dropout = 0.3;
  std::uint64_t seed = 0;
  std::string text_file;
  int text_dim = 64;
  std::string attribute = "gender";
  std::string majority = "male";
  int parallelism = 1;
  int ig_steps = fx::cfa::kDefaultIgSteps;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "dataset.json written by `ingest`")->required();
    app->add_option("--split", split, "split file {train:[...], test:[...]}")->required();
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--momentum", momentum, "momentum");
    app->add_option("--epochs", epochs, "epochs");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--dropout", dropout, "head dropout rate");
    app->add_option("--seed", seed, "seed");
    app->add_option("--text-embeddings", text_file, "text-embedding CSV (session_id + dim values)");
    app->add_option("--text-dim", text_dim, "text-embedding dimension");
    app->add_option("--attribute", attribute, "sensitive attribute");
    app->add_option("--majority", majority, "majority value of the attribute");
    app->add_option("--parallel", parallelism, "worker threads for independent trainings");
    app->add_option("--ig-steps", ig_steps, "integrated-gradients steps");
  }

  [[nodiscard]] fx::embedpipe::ExperimentSetup setup() const {
    fx::embedpipe::ExperimentSetup s;
    s.train.learning_rate = lr;
    s.train.momentum = momentum;
    s.train.epochs = epochs;
    s.train.batch_size = batch;
    s.train.seed = seed;
    s.architecture.dropout = dropout;
    s.attribute = attribute;
    s.majority = majority;
    s.parallelism = parallelism;
    return s;
  }

  [[nodiscard]] fx::embedpipe::TextEmbeddingSource text() const {
    fx::embedpipe::TextEmbeddingSource t;
    t.name = text_file.empty() ? "synthetic" : std::filesystem::path(text_file).stem().string();
    if (!text_file.empty()) t.file = text_file;
    t.dim = text_dim;
    t.seed = seed;
    return t;
  }

  [[nodiscard]] fx::cfa::CfaConfig cfa(double lambda) const {
    fx::cfa::CfaConfig c;
    c.lambda = lambda;
    c.ig_steps = ig_steps;
    c.attribute = attribute;
    c.majority = majority;
    return c;
  }
};

std::vector<double> parse_lambdas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = fx::csv::parse_real(item);
    if (!v) throw fx::ConfigError(fmt::format("invalid lambda '{}'", item));
    out.push_back(*v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairxai: fairness and explainability audits for depression classifiers"};
  app.require_subcommand(1);

  // ingest
  std::string manifest_path;
  std::string out;
  auto* ingest = app.add_subcommand("ingest", "Load a dataset manifest into dataset.json");
  ingest->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  ingest->add_option("--out", out, "output path (default stdout)");

  // select
  std::string dataset_path;
  int k = 10;
  int bins = fx::featsel::kDefaultBins;
  auto* select = app.add_subcommand("select", "Rank features by mutual information with the label");
  select->add_option("--dataset", dataset_path, "dataset.json")->required();
  select->add_option("--k", k, "number of features to prompt with");
  select->add_option("--bins", bins, "equal-frequency bins");
  select->add_option("--out", out, "ranking CSV (default stdout)");

  // classify
  std::string ranking_path;
  std::string backend_arg;
  std::string variant_arg = "baseline";
  std::string templates_dir;
  int backend_parallel = 1;
  double timeout = 60.0;
  auto* classify = app.add_subcommand("classify", "Prompt a backend for every session");
  classify->add_option("--dataset", dataset_path, "dataset.json")->required();
  classify->add_option("--ranking", ranking_path, "ranking CSV from `select`")->required();
  classify->add_option("--k", k, "number of top features to include");
  classify->add_option("--backend", backend_arg, "mock:<rules.json> or http://host:port/path")->required();
  classify->add_option("--variant", variant_arg, "baseline | intervention");
  classify->add_option("--templates", templates_dir, "template directory (VERSION, task.txt, ...)");
  classify->add_option("--parallel", backend_parallel, "requests in flight");
  classify->add_option("--timeout", timeout, "per-request timeout in seconds");
  classify->add_option("--out", out, "predictions JSONL (default stdout)");

  // train
  TrainFlags tf;
  double lambda = 0.0;
  std::string config_name = "full_fusion";
  std::string trace_out;
  auto* train = app.add_subcommand("train", "Train one fusion model and save a checkpoint");
  tf.add(train);
  train->add_option("--lambda", lambda, "CFA weight (0 = cross-entropy only)");
  train->add_option("--modalities", config_name, "modality configuration, e.g. text_audio");
  train->add_option("--out", out, "checkpoint path")->required();
  train->add_option("--trace", trace_out, "loss trace CSV");

  // ablate
  TrainFlags af;
  auto* ablate = app.add_subcommand("ablate", "Seven-configuration modality ablation");
  af.add(ablate);
  ablate->add_option("--out", out, "ablation CSV (default stdout)");

  // sweep
  TrainFlags sf;
  std::string lambdas_arg = "0,0.1,0.5";
  auto* sweep = app.add_subcommand("sweep", "Train one model per CFA weight");
  sf.add(sweep);
  sweep->add_option("--lambdas", lambdas_arg, "comma-separated CFA weights");
  sweep->add_option("--out", out, "sweep CSV (default stdout)");

  // audit
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  std::optional<std::string> backend_override;
  auto* audit = app.add_subcommand("audit", "Run the full audit described by a run config");
  audit->add_option("--config", config_path, "run config (JSON)")->required();
  audit->add_option("--seed", seed_override, "override the config seed");
  audit->add_option("--out", out_override, "override the output directory");
  audit->add_option("--backend", backend_override, "override the backend");

  // compare
  std::vector<std::string> reports;
  auto* compare = app.add_subcommand("compare", "Delta table between baseline and intervention results");
  compare->add_option("reports", reports, "results.json (one report with both variants, or two reports)")
      ->required()
      ->expected(1, 2);
  compare->add_option("--out", out, "delta CSV (default stdout)");

  // charts
  std::string results_path;
  auto* charts = app.add_subcommand("charts", "Render SVG charts from results.json");
  charts->add_option("--results", results_path, "results.json")->required();
  charts->add_option("--out", out, "output directory")->required();

  // synth
  std::string kind = "bias";
  std::size_t sessions = 2000;
  std::uint64_t synth_seed = 7;
  double flip = 0.5;
  auto* synth = app.add_subcommand("synth", "Write a synthetic cohort with a split and mock rules");
  synth->add_option("--kind", kind, "bias | signal | proxy");
  synth->add_option("--sessions", sessions, "number of sessions");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--flip", flip, "mock minority-positive flip probability");
  synth->add_option("--out", out, "output directory")->required();

  // serve-mock
  std::string rules_path;
  std::string host = "127.0.0.1";
  int port = 8089;
  auto* serve = app.add_subcommand("serve-mock", "Serve the mock backend over the wire protocol");
  serve->add_option("--rules", rules_path, "mock rule file")->required();
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*ingest) {
      const auto ds = fx::dataset::load(fx::dataset::read_manifest(manifest_path));
      emit(out, fx::dataset::to_json(ds).dump(1) + "\n");
      std::cerr << fmt::format("ingested {} sessions; dropped {} (unmatched {}, missing value {}, "
                               "missing modality {}, missing label {})\n",
                               ds.records.size(), ds.tally.dropped(), ds.tally.unmatched,
                               ds.tally.missing_value, ds.tally.missing_modality, ds.tally.missing_label);
    } else if (*select) {
      const auto ds = read_dataset_json(dataset_path);
      emit(out, fx::featsel::to_csv(fx::featsel::select_top_k(ds, k, bins)));
    } else if (*classify) {
      const auto ds = read_dataset_json(dataset_path);
      const auto ranking = fx::featsel::from_csv(fx::read_text_file(ranking_path), ds.schema, k, bins);
      const auto templates = templates_dir.empty() ? fx::genpipe::PromptTemplates{}
                                                   : fx::genpipe::PromptTemplates::load(templates_dir);
      auto spec = fx::genpipe::parse_backend_arg(backend_arg);
      spec.timeout_seconds = timeout;
      const auto backend = fx::genpipe::make_backend(spec);
      const auto variant = fx::parse_variant(variant_arg);
      std::vector<fx::genpipe::PromptBundle> bundles;
      for (const auto& r : ds.records) {
        bundles.push_back(fx::genpipe::build_prompt(r, ds.schema, ranking, variant, templates));
      }
      const auto preds = fx::genpipe::classify_all(bundles, *backend, backend_parallel);
      emit(out, fx::audit::predictions_jsonl(preds));
      std::size_t abstained = 0;
      for (const auto& p : preds) abstained += p.abstained() ? 1 : 0;
      std::cerr << fmt::format("classified {} sessions, {} abstained\n", preds.size(), abstained);
    } else if (*train) {
      const auto ds = read_dataset_json(tf.dataset);
      const auto split = fx::embedpipe::read_split(tf.split);
      const auto setup = tf.setup();
      const auto inputs = fx::embedpipe::modality_inputs(ds, tf.text());
      const auto mask = fx::nn::modalities_of(fx::nn::parse_ablation(config_name));
      if (auto why = fx::embedpipe::missing_modality(inputs, mask)) throw fx::DataError(*why);
      const auto prep = fx::embedpipe::prepare(ds, inputs, mask, split, setup);
      std::optional<fx::cfa::CfaConfig> cfg;
      if (lambda > 0.0) cfg = tf.cfa(lambda);
      const auto trained = fx::embedpipe::train(fx::nn::FusionModel::create(prep.arch, mask, setup.train.seed),
                                                prep.train, setup.train, cfg);
      fx::write_text_file(out, fx::embedpipe::serialize_checkpoint(trained.model));
      if (!trace_out.empty()) fx::write_text_file(trace_out, fx::audit::loss_trace_csv(trained.trace));
      const auto eval = fx::embedpipe::evaluate(fx::embedpipe::predict(trained.model, prep.test_x), prep.test_y,
                                                prep.test_group, setup.attribute);
      std::cerr << fmt::format("test accuracy {} F1 {} ΔEO {}{}\n", fx::fixed4(eval.metrics.accuracy),
                               fx::fixed4(eval.metrics.f1), fx::fixed4(eval.fairness.eo),
                               eval.collapsed ? " (collapsed: single-class predictions)" : "");
    } else if (*ablate) {
      const auto ds = read_dataset_json(af.dataset);
      const auto split = fx::embedpipe::read_split(af.split);
      const auto table = fx::embedpipe::run_ablation(ds, split, {af.text()}, af.setup());
      emit(out, fx::report::ablation_csv(fx::report::to_json(table)));
    } else if (*sweep) {
      const auto ds = read_dataset_json(sf.dataset);
      const auto split = fx::embedpipe::read_split(sf.split);
      const auto result = fx::cfa::pareto_sweep(ds, split, sf.text(), parse_lambdas(lambdas_arg), sf.setup(),
                                                sf.cfa(0.0));
      emit(out, fx::report::pareto_csv(fx::report::to_json(result.rows)));
    } else if (*audit) {
      const auto cfg = fx::audit::read_run_config(config_path, {seed_override, out_override, backend_override});
      const auto outcome = fx::audit::run(cfg);
      std::cout << fmt::format("wrote {} files to {}\n", outcome.files.size(), outcome.output.string());
      std::cout << fmt::format("config hash {}\n", outcome.results["manifest"]["config_hash"].get<std::string>());
    } else if (*compare) {
      const auto a = read_json(reports[0]);
      const auto b = reports.size() > 1 ? read_json(reports[1]) : a;
      emit(out, fx::report::delta_csv(fx::report::compare(a, b)));
    } else if (*charts) {
      const auto results = read_json(results_path);
      if (auto errs = fx::report::validate(results); !errs.empty()) throw fx::DataError(errs.front());
      for (const auto& f : fx::charts::emit_charts(results, out)) std::cout << f << "\n";
    } else if (*synth) {
      fx::synth::Options opt;
      opt.kind = fx::synth::parse_kind(kind);
      opt.sessions = sessions;
      opt.seed = synth_seed;
      const auto ds = fx::synth::generate(opt);
      fx::synth::write_per_session(ds, out);
      fx::synth::write_split(fx::synth::default_split(ds), std::filesystem::path(out) / "split.json");
      fx::write_text_file(std::filesystem::path(out) / "mock_rules.json",
                          fx::synth::mock_rules_json(flip, synth_seed).dump(2) + "\n");
      std::cout << fmt::format("wrote {} sessions to {}\n", ds.records.size(), out);
    } else if (*serve) {
      auto spec = fx::genpipe::mock_spec_from_file(rules_path);
      auto mock = std::make_shared<const fx::genpipe::MockBackend>(spec.rules);
      auto server = fx::genpipe::make_mock_server(mock);
      std::cout << fmt::format("mock backend listening on http://{}:{}/generate\n", host, port) << std::flush;
      if (!server->listen(host, port)) throw fx::ConfigError(fmt::format("cannot bind {}:{}", host, port));
    }
  } catch (const fx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fx::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const fx::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
