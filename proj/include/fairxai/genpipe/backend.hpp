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

// Model backends for the generative pipeline.
//
// Wire contract: POST a JSON object {"prompt": string, "max_tokens": int} and
// receive {"text": string}. Transport failures are retried once; anything
// still failing, or a reply without a string "text" member, becomes an
// abstention.
//
// The mock backend reads the rendered prompt the same way a hosted model
// would, evaluates a rule table over the biomarker block, and answers in
// whichever output grammar the prompt requested.

#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// <resolv.h> (via httplib) defines _res, which collides with Eigen internals.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "fairxai/common.hpp"
#include "fairxai/csv.hpp"
#include "fairxai/genpipe/prompt.hpp"
#include "fairxai/genpipe/response.hpp"

namespace fairxai::genpipe {

struct Reply {
  enum class Status { kOk, kTransportError, kMalformed };
  Status status = Status::kOk;
  std::string text;
  std::string error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  [[nodiscard]] virtual std::string id() const = 0;
  /// Must be safe to call concurrently.
  [[nodiscard]] virtual Reply complete(const std::string& prompt, int max_tokens) const = 0;
};

// ---- mock ------------------------------------------------------------------

struct MockRule {
  std::string feature;
  std::string op;  // one of < <= > >=
  double threshold = 0.0;
  int label = 1;
  std::string rationale;  // placeholders: {feature} {value} {<attribute>} {<biomarker>}

  [[nodiscard]] bool matches(double v) const {
    if (op == "<") return v < threshold;
    if (op == "<=") return v <= threshold;
    if (op == ">") return v > threshold;
    return v >= threshold;
  }
};

/// Flips predicted positives to negatives with a per-group probability.
struct BiasKnob {
  std::string attribute;
  std::string majority;
  double minority_flip = 0.0;
  double majority_flip = 0.0;
  std::string rationale =
      "Given that the participant is {attr_value}, the presentation looks typical and "
      "within the normal range.";
};

struct MockRules {
  std::vector<MockRule> rules;
  int default_label = 0;
  std::string default_rationale = "None of the prompted biomarkers indicate a clinical concern.";
  std::optional<BiasKnob> bias;
  std::uint64_t seed = 0;
};

inline MockRules parse_mock_rules(const nlohmann::json& j) {
  MockRules m;
  try {
    for (const auto& r : j.at("rules")) {
      MockRule rule;
      rule.feature = r.at("feature").get<std::string>();
      rule.op = r.at("op").get<std::string>();
      if (rule.op != "<" && rule.op != "<=" && rule.op != ">" && rule.op != ">=") {
        throw ConfigError(fmt::format("mock rule: unknown operator '{}'", rule.op));
      }
      rule.threshold = r.at("threshold").get<double>();
      rule.label = r.at("label").get<int>();
      if (rule.label != 0 && rule.label != 1) throw ConfigError("mock rule: label must be 0 or 1");
      rule.rationale = r.value("rationale", std::string("{feature} = {value}."));
      m.rules.push_back(std::move(rule));
    }
    if (j.contains("default")) {
      m.default_label = j["default"].value("label", 0);
      m.default_rationale = j["default"].value("rationale", m.default_rationale);
    }
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("bias")) {
      const auto& b = j["bias"];
      BiasKnob k;
      k.attribute = b.at("attribute").get<std::string>();
      k.majority = b.at("majority").get<std::string>();
      k.minority_flip = b.value("minority_flip", 0.0);
      k.majority_flip = b.value("majority_flip", 0.0);
      k.rationale = b.value("rationale", k.rationale);
      for (double p : {k.minority_flip, k.majority_flip}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mock bias knob must lie in [0,1]");
      }
      m.bias = std::move(k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("mock rules: {}", e.what()));
  }
  return m;
}

/// Sections of a rendered prompt as the mock model reads them back.
struct ReadPrompt {
  std::map<std::string, std::string> demographics;
  std::vector<std::pair<std::string, double>> biomarkers;
  bool wants_tags = false;
};

inline ReadPrompt read_prompt(std::string_view prompt) {
  ReadPrompt out;
  out.wants_tags = prompt.find("<classification>") != std::string_view::npos;
  enum { kNone, kDemo, kBio, kTask } section = kNone;
  std::size_t pos = 0;
  while (pos < prompt.size()) {
    auto end = prompt.find('\n', pos);
    if (end == std::string_view::npos) end = prompt.size();
    const auto line = prompt.substr(pos, end - pos);
    pos = end + 1;
    if (line == kDemographicsHeader) {
      section = kDemo;
    } else if (line == kBiomarkersHeader) {
      section = kBio;
    } else if (line == kTaskHeader) {
      section = kTask;
    } else if (line.starts_with("- ") && (section == kDemo || section == kBio)) {
      const auto colon = line.rfind(": ");
      if (colon == std::string_view::npos) continue;
      const std::string key(line.substr(2, colon - 2));
      const auto value = line.substr(colon + 2);
      if (section == kDemo) {
        out.demographics[key] = std::string(value);
      } else if (const auto v = csv::parse_real(value)) {
        out.biomarkers.emplace_back(key, *v);
      }
    }
  }
  return out;
}

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockRules rules) : rules_(std::move(rules)) {}

  [[nodiscard]] std::string id() const override { return "mock"; }

  [[nodiscard]] Reply complete(const std::string& prompt, int /*max_tokens*/) const override {
    return {Reply::Status::kOk, respond(prompt), {}};
  }

  [[nodiscard]] std::string respond(const std::string& prompt) const {
    const ReadPrompt p = read_prompt(prompt);
    int label = rules_.default_label;
    std::string rationale = substitute(rules_.default_rationale, p, {}, {}, {});
    for (const auto& rule : rules_.rules) {
      const auto it = std::find_if(p.biomarkers.begin(), p.biomarkers.end(),
                                   [&](const auto& b) { return b.first == rule.feature; });
      if (it == p.biomarkers.end() || !rule.matches(it->second)) continue;
      label = rule.label;
      rationale = substitute(rule.rationale, p, rule.feature,
                             PromptBundle::format_value(it->second), {});
      break;
    }
    if (label == 1 && rules_.bias) {
      const auto& k = *rules_.bias;
      const auto g = p.demographics.find(k.attribute);
      if (g != p.demographics.end()) {
        const bool majority = to_lower(g->second) == to_lower(k.majority);
        const double prob = majority ? k.majority_flip : k.minority_flip;
        if (prob > 0.0 && flip_draw(prompt) < prob) {
          label = 0;
          rationale = substitute(k.rationale, p, {}, {}, g->second);
        }
      }
    }
    if (p.wants_tags) return render_classification(label, rationale);
    return fmt::format("{}\n{} (score: {})", rationale, label == 1 ? "Depressed" : "Not Depressed",
                       label);
  }

  [[nodiscard]] const MockRules& rules() const { return rules_; }

 private:
  // Uniform in [0,1) keyed on (seed, prompt): reentrant and order-free.
  [[nodiscard]] double flip_draw(const std::string& prompt) const {
    const auto h = digest64(fmt::format("{}\n{}", rules_.seed, prompt));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  static std::string substitute(std::string text, const ReadPrompt& p, std::string_view feature,
                                std::string_view value, std::string_view attr_value) {
    auto replace_all = [&text](std::string_view from, std::string_view to) {
      for (auto pos = text.find(from); pos != std::string::npos;
           pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
      }
    };
    replace_all("{feature}", feature);
    replace_all("{value}", value);
    replace_all("{attr_value}", attr_value);
    for (const auto& [k, v] : p.demographics) replace_all("{" + k + "}", v);
    for (const auto& [k, v] : p.biomarkers) replace_all("{" + k + "}", PromptBundle::format_value(v));
    return text;
  }

  MockRules rules_;
};

// ---- wire ------------------------------------------------------------------

struct Endpoint {
  std::string scheme_host_port;  // e.g. http://127.0.0.1:8080
  std::string path;              // e.g. /generate
};

inline Endpoint parse_endpoint(std::string_view url) {
  if (!url.starts_with("http://")) {
    throw ConfigError(fmt::format("wire endpoint must be an http:// URL, got '{}'", url));
  }
  const auto slash = url.find('/', 7);
  Endpoint e;
  e.scheme_host_port = std::string(url.substr(0, slash));
  e.path = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
  if (e.scheme_host_port.size() <= 7) throw ConfigError("wire endpoint has no host");
  return e;
}

class WireBackend final : public Backend {
 public:
  explicit WireBackend(std::string url, double timeout_seconds = 60.0)
      : url_(std::move(url)), endpoint_(parse_endpoint(url_)), timeout_(timeout_seconds) {}

  [[nodiscard]] std::string id() const override { return "wire:" + url_; }

  [[nodiscard]] Reply complete(const std::string& prompt, int max_tokens) const override {
    httplib::Client client(endpoint_.scheme_host_port);
    const auto secs = static_cast<time_t>(timeout_);
    client.set_connection_timeout(std::min<time_t>(secs, 5), 0);
    client.set_read_timeout(secs, 0);
    const nlohmann::json body = {{"prompt", prompt}, {"max_tokens", max_tokens}};
    auto res = client.Post(endpoint_.path, body.dump(), "application/json");
    if (!res) {
      return {Reply::Status::kTransportError, {},
              fmt::format("transport error: {}", httplib::to_string(res.error()))};
    }
    if (res->status != 200) {
      return {Reply::Status::kTransportError, {}, fmt::format("HTTP status {}", res->status)};
    }
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      return {Reply::Status::kMalformed, res->body, "malformed reply: expected {\"text\": string}"};
    }
    return {Reply::Status::kOk, j["text"].get<std::string>(), {}};
  }

 private:
  std::string url_;
  Endpoint endpoint_;
  double timeout_;
};

/// Serves a mock backend over the wire contract at POST `path`.
inline std::unique_ptr<httplib::Server> make_mock_server(std::shared_ptr<const MockBackend> mock,
                                                         const std::string& path = "/generate") {
  auto server = std::make_unique<httplib::Server>();
  server->Post(path, [mock](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("prompt") || !j["prompt"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"expected {\"prompt\": string, \"max_tokens\": int}"})",
                      "application/json");
      return;
    }
    const nlohmann::json out = {{"text", mock->respond(j["prompt"].get<std::string>())}};
    res.set_content(out.dump(), "application/json");
  });
  return server;
}

// ---- spec ------------------------------------------------------------------

struct BackendSpec {
  enum class Kind { kMock, kWire };
  Kind kind = Kind::kMock;
  std::string endpoint;
  std::filesystem::path rules_path;
  MockRules rules;
  int parallel = 1;
  double timeout_seconds = 60.0;
};

inline BackendSpec mock_spec_from_file(const std::filesystem::path& rules_path) {
  BackendSpec s;
  s.kind = BackendSpec::Kind::kMock;
  s.rules_path = rules_path;
  const auto text = read_text_file(rules_path);
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(fmt::format("{}: invalid JSON", rules_path.string()));
  s.rules = parse_mock_rules(j);
  return s;
}

/// "mock:<rules.json>" or an http:// URL.
inline BackendSpec parse_backend_arg(std::string_view arg) {
  if (arg.starts_with("mock:")) return mock_spec_from_file(std::string(arg.substr(5)));
  BackendSpec s;
  s.kind = BackendSpec::Kind::kWire;
  s.endpoint = std::string(arg);
  parse_endpoint(s.endpoint);
  return s;
}

inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  if (spec.kind == BackendSpec::Kind::kMock) return std::make_unique<MockBackend>(spec.rules);
  return std::make_unique<WireBackend>(spec.endpoint, spec.timeout_seconds);
}

// ---- classification --------------------------------------------------------

inline Prediction classify(const PromptBundle& bundle, const Backend& backend) {
  Prediction p;
  p.session_id = bundle.session_id;
  p.variant = bundle.variant;
  p.backend_id = backend.id();
  const std::string prompt = bundle.render();
  Reply reply = backend.complete(prompt, bundle.max_output_tokens);
  if (reply.status == Reply::Status::kTransportError) {
    reply = backend.complete(prompt, bundle.max_output_tokens);
  }
  if (reply.status != Reply::Status::kOk) {
    p.raw_response = reply.text;
    p.error = reply.error;
    return p;
  }
  p.raw_response = reply.text;
  auto parsed = parse_response(reply.text, bundle.variant);
  p.label = parsed.label;
  p.rationale = std::move(parsed.rationale);
  p.score = parsed.score;
  if (!p.label) p.error = "unparseable reply";
  return p;
}

/// Classifies every bundle with at most `parallel` requests in flight.
/// Output order follows input order.
inline std::vector<Prediction> classify_all(const std::vector<PromptBundle>& bundles,
                                            const Backend& backend, int parallel = 1) {
  std::vector<Prediction> out(bundles.size());
  const auto workers = static_cast<std::size_t>(std::max(1, parallel));
  if (workers == 1 || bundles.size() < 2) {
    for (std::size_t i = 0; i < bundles.size(); ++i) out[i] = classify(bundles[i], backend);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, bundles.size()); ++w) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < bundles.size(); i = next.fetch_add(1)) {
          out[i] = classify(bundles[i], backend);
        }
      });
    }
  }
  return out;
}

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json j = {{"session_id", p.session_id},
                      {"label", p.label ? nlohmann::json(*p.label) : nlohmann::json(nullptr)},
                      {"rationale", p.rationale},
                      {"variant", std::string(to_string(p.variant))},
                      {"backend_id", p.backend_id},
                      {"raw_response", p.raw_response},
                      {"error", p.error}};
  j["score"] = p.score ? nlohmann::json(*p.score) : nlohmann::json(nullptr);
  return j;
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  p.session_id = j.at("session_id").get<std::string>();
  if (!j.at("label").is_null()) p.label = j["label"].get<int>();
  p.rationale = j.value("rationale", std::string());
  p.variant = parse_variant(j.at("variant").get<std::string>());
  p.backend_id = j.value("backend_id", std::string());
  p.raw_response = j.value("raw_response", std::string());
  p.error = j.value("error", std::string());
  if (j.contains("score") && !j["score"].is_null()) p.score = j["score"].get<double>();
  return p;
}

}  // namespace fairxai::genpipe
