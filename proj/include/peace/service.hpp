// Copyright 2026 The peace-engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// HTTP facade over the library: analysis, generation, comparison,
// exploration, augmentation and evaluation routes plus /healthz and
// /openapi.json. All state is loaded at startup and read-only afterwards.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "peace/analytics.hpp"
#include "peace/augmentation.hpp"
#include "peace/backends.hpp"
#include "peace/corpus.hpp"
#include "peace/index.hpp"
#include "peace/lda.hpp"
#include "peace/pipeline.hpp"
#include "peace/report.hpp"
#include "peace/templates.hpp"

namespace peace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct TopicSettings {
  std::size_t k = 5;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  bool mock = false;                  // in-process mock backends, registry ignored
  std::string backend_registry_path;  // PEACE_BACKENDS overrides
  std::string index_path;             // PEACE_INDEX overrides
  std::string kb_path;                // built into an index at startup when index_path is empty
  std::string template_dir;
  std::string lexicon_dir;
  std::string schema_dir;
  std::string stopwords_path;
  std::map<std::string, std::string> corpus_paths;  // schema name -> data file
  std::string eval_report_path;
  std::string audit_log_path;
  std::chrono::milliseconds request_timeout{30000};
  std::size_t max_body_bytes = 1 << 20;
  std::string auth_token_env;  // env var holding the shared X-Peace-Token value
  std::optional<std::uint64_t> default_seed;
  bool frozen_clock = false;  // zero elapsed times so responses are snapshot-stable
  std::optional<TopicSettings> topics;

  std::string chat_backend, embed_backend, classify_backend, nli_backend, summarize_backend;
  RetrievalConfig retrieval;
  double temperature = 0.7;
  int max_tokens = 256;

  /// Every shipped data file under `data_dir`, mock backends, fixed seed.
  static ServiceConfig mock_defaults(const fs::path& data_dir) {
    ServiceConfig c;
    c.mock = true;
    c.kb_path = (data_dir / "samples/kb_sample.jsonl").string();
    c.template_dir = (data_dir / "templates").string();
    c.lexicon_dir = (data_dir / "lexicons").string();
    c.schema_dir = (data_dir / "schemas").string();
    c.stopwords_path = (data_dir / "lexicons/stopwords.txt").string();
    c.corpus_paths = {{"IHC", (data_dir / "fixtures/ihc.csv").string()},
                      {"ISHate", (data_dir / "fixtures/ishate.jsonl").string()},
                      {"TOXIGEN", (data_dir / "fixtures/toxigen.csv").string()},
                      {"DYNA", (data_dir / "fixtures/dyna.csv").string()},
                      {"SBIC", (data_dir / "fixtures/sbic.jsonl").string()},
                      {"synthetic_cs", (data_dir / "fixtures/cs_synthetic.csv").string()}};
    c.default_seed = 0;
    c.frozen_clock = true;
    c.topics = TopicSettings{};
    return c;
  }

  /// Relative paths resolve against `base` (the config file's directory).
  static ServiceConfig from_json(const json& j, const fs::path& base = {}) {
    ServiceConfig c;
    auto path = [&](const char* key) -> std::string {
      if (!j.contains(key) || j[key].is_null()) return {};
      fs::path p = j[key].get<std::string>();
      return (p.is_relative() && !base.empty() ? base / p : p).string();
    };
    try {
      if (j.contains("listen")) {
        const auto listen = j["listen"].get<std::string>();
        const auto colon = listen.rfind(':');
        require(colon != std::string::npos, "listen must be host:port");
        c.host = listen.substr(0, colon);
        c.port = std::stoi(listen.substr(colon + 1));
      }
      c.mock = j.value("mock", false);
      c.backend_registry_path = path("backend_registry");
      c.index_path = path("index");
      c.kb_path = path("kb");
      c.template_dir = path("template_dir");
      c.lexicon_dir = path("lexicon_dir");
      c.schema_dir = path("schema_dir");
      c.stopwords_path = path("stopwords");
      c.eval_report_path = path("eval_report");
      c.audit_log_path = path("audit_log");
      const json corpora = j.value("corpora", json::object());
      for (const auto& [name, p] : corpora.items()) {
        fs::path fp = p.get<std::string>();
        c.corpus_paths[name] = (fp.is_relative() && !base.empty() ? base / fp : fp).string();
      }
      c.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", 30000));
      c.max_body_bytes = j.value("max_body_bytes", std::size_t{1} << 20);
      c.auth_token_env = j.value("auth_token_env", std::string{});
      if (j.contains("seed") && !j["seed"].is_null()) c.default_seed = j["seed"].get<std::uint64_t>();
      c.frozen_clock = j.value("frozen_clock", false);
      if (j.contains("topics") && !j["topics"].is_null()) {
        const auto& t = j["topics"];
        c.topics = TopicSettings{t.value("k", std::size_t{5}), t.value("iterations", std::size_t{200}),
                                 t.value("seed", std::uint64_t{0})};
      }
      const auto b = j.value("backends", json::object());
      c.chat_backend = b.value("chat", std::string{});
      c.embed_backend = b.value("embed", std::string{});
      c.classify_backend = b.value("classify", std::string{});
      c.nli_backend = b.value("nli", std::string{});
      c.summarize_backend = b.value("summarize", std::string{});
      if (j.contains("retrieval")) c.retrieval = j["retrieval"].get<RetrievalConfig>();
      c.temperature = j.value("temperature", 0.7);
      c.max_tokens = j.value("max_tokens", 256);
    } catch (const json::exception& e) {
      fail(Errc::parse, std::string("service config: ") + e.what());
    }
    return c;
  }

  /// Reads `path`, or $PEACE_CONFIG when set; then applies PEACE_INDEX.
  /// PEACE_BACKENDS is honoured by the registry loader itself.
  static ServiceConfig load(std::string path) {
    if (const char* env = std::getenv("PEACE_CONFIG"); env && *env) path = env;
    std::ifstream in(path);
    if (!in) fail(Errc::io, "cannot open service config '" + path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      fail(Errc::parse, path + ": " + e.what());
    }
    auto c = from_json(j, fs::path(path).parent_path());
    c.apply_env();
    return c;
  }

  void apply_env() {
    if (const char* env = std::getenv("PEACE_INDEX"); env && *env) index_path = env;
    if (const char* env = std::getenv("PEACE_BACKENDS"); env && *env) backend_registry_path = env;
  }

  /// Fails fast on any referenced path that does not exist.
  void validate() const {
    require(port >= 0 && port <= 65535, "port out of range");
    require(request_timeout.count() > 0, "request_timeout must be positive");
    require(max_body_bytes > 0, "max_body_bytes must be positive");
    require(mock || !backend_registry_path.empty(), "backend_registry is required unless mock is set");
    auto exists = [](const std::string& p, const std::string& what) {
      if (!p.empty() && !fs::exists(p)) fail(Errc::io, what + " '" + p + "' does not exist", p);
    };
    if (!mock) exists(backend_registry_path, "backend registry");
    exists(index_path, "index");
    exists(kb_path, "knowledge base");
    exists(template_dir, "template dir");
    exists(lexicon_dir, "lexicon dir");
    exists(schema_dir, "schema dir");
    exists(stopwords_path, "stopword list");
    exists(eval_report_path, "eval report");
    for (const auto& [name, p] : corpus_paths) {
      exists(p, "corpus " + name);
      require(!schema_dir.empty(), "corpora need a schema_dir");
      exists((fs::path(schema_dir) / (name + ".json")).string(), "schema for " + name);
    }
    if (!auth_token_env.empty()) {
      const char* tok = std::getenv(auth_token_env.c_str());
      if (!tok || !*tok) fail(Errc::invalid_argument, "auth token variable " + auth_token_env + " is not set");
    }
  }
};

// ---------------------------------------------------------------------------
// Errors and request parsing

/// Validation failure carrying one message per offending field.
class RequestError : public Error {
 public:
  explicit RequestError(json fields) : Error(Errc::invalid_argument, "invalid request: " + fields.dump()), fields_(std::move(fields)) {}
  const json& fields() const noexcept { return fields_; }

 private:
  json fields_;
};

inline int http_status(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::parse:
    case Errc::schema:
    case Errc::missing_slot:
    case Errc::unknown_template:
      return 400;
    case Errc::not_found:
      return 404;
    case Errc::backend:
      return 502;
    case Errc::transport:
      return 504;
    case Errc::capability:
    case Errc::dimension_mismatch:
    case Errc::empty_index:
    case Errc::empty_document:
    case Errc::insufficient_data:
    case Errc::degenerate_corpus:
    case Errc::missing_topic_model:
    case Errc::no_ngrams:
    case Errc::not_applicable:
    case Errc::empty_logprobs:
    case Errc::all_zero_differences:
    case Errc::no_variance:
    case Errc::missing_backend:
    case Errc::empty_pool:
      return 422;
    case Errc::invariant:
    case Errc::corrupt_index:
    case Errc::version_mismatch:
    case Errc::io:
      return 500;
  }
  return 500;
}

inline json error_payload(const Error& e) {
  json j = {{"error", errc_name(e.code())}, {"message", e.what()}};
  if (auto* r = dynamic_cast<const RequestError*>(&e)) j["fields"] = r->fields();
  if (e.code() == Errc::backend || e.code() == Errc::transport) j["backend_id"] = e.detail();
  if (auto* b = dynamic_cast<const BackendError*>(&e)) j["backend_code"] = b->backend_code();
  return j;
}

namespace detail {

class Fields {
 public:
  explicit Fields(const json& body) : body_(body) {
    if (!body_.is_object()) {
      errors_["body"] = "must be a JSON object";
      finish();
    }
  }

  std::optional<std::string> str(const char* key, bool required = false) {
    if (!body_.contains(key) || body_[key].is_null()) {
      if (required) errors_[key] = "is required";
      return std::nullopt;
    }
    if (!body_[key].is_string()) {
      errors_[key] = "must be a string";
      return std::nullopt;
    }
    return body_[key].get<std::string>();
  }

  std::string text(const char* key) {
    auto s = str(key, true);
    if (s && text::trim(*s).empty()) errors_[key] = "must be non-empty";
    return s.value_or("");
  }

  std::optional<bool> boolean(const char* key) {
    if (!body_.contains(key) || body_[key].is_null()) return std::nullopt;
    if (!body_[key].is_boolean()) {
      errors_[key] = "must be a boolean";
      return std::nullopt;
    }
    return body_[key].get<bool>();
  }

  std::optional<std::uint64_t> uint(const char* key) {
    if (!body_.contains(key) || body_[key].is_null()) return std::nullopt;
    if (!body_[key].is_number_unsigned()) {
      errors_[key] = "must be a non-negative integer";
      return std::nullopt;
    }
    return body_[key].get<std::uint64_t>();
  }

  void error(const std::string& key, const std::string& msg) { errors_[key] = msg; }

  void finish() const {
    if (!errors_.empty()) throw RequestError(errors_);
  }

 private:
  const json& body_;
  json errors_ = json::object();
};

inline std::optional<std::string> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  return req.get_param_value(key);
}

inline std::vector<std::string> csv_param(const httplib::Request& req, const char* key) {
  std::vector<std::string> out;
  if (auto v = param(req, key)) {
    for (auto& part : text::split(*v, ',')) {
      auto t = std::string(text::trim(part));
      if (!t.empty()) out.push_back(t);
    }
  }
  return out;
}

}  // namespace detail

json openapi_document();

// ---------------------------------------------------------------------------

class Service {
 public:
  explicit Service(ServiceConfig cfg, Gateway::Options gw_options = {}) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto registry = cfg_.mock ? default_mock_registry() : load_registry(cfg_.backend_registry_path);
    gateway_ = make_gateway(registry, std::move(gw_options));

    auto pick = [&](std::string& id, BackendKind kind) {
      if (id.empty()) id = gateway_->first_of(kind).value_or("");
      if (!id.empty()) {
        const auto& d = gateway_->descriptor(id);
        if (d.kind != kind) {
          fail(Errc::invalid_argument, "backend '" + id + "' is not a " + std::string(to_string(kind)) + " backend");
        }
      }
    };
    pick(cfg_.chat_backend, BackendKind::chat);
    pick(cfg_.embed_backend, BackendKind::embed);
    pick(cfg_.classify_backend, BackendKind::classify);
    pick(cfg_.nli_backend, BackendKind::nli);
    if (!cfg_.summarize_backend.empty()) pick(cfg_.summarize_backend, BackendKind::chat);

    if (!cfg_.index_path.empty()) {
      index_ = std::make_unique<Index>(Index::load(cfg_.index_path));
    } else if (!cfg_.kb_path.empty()) {
      require(!cfg_.embed_backend.empty(), "building the knowledge index needs an embed backend");
      index_ = std::make_unique<Index>(
          build_index_from_documents(load_documents_jsonl(cfg_.kb_path), *gateway_, cfg_.embed_backend));
    }

    templates_ = cfg_.template_dir.empty() ? TemplateSet::defaults() : TemplateSet::load_dir(cfg_.template_dir);
    if (!cfg_.lexicon_dir.empty()) lexicons_ = LexiconPack::load_dir(cfg_.lexicon_dir);
    if (!cfg_.stopwords_path.empty()) stopwords_ = load_stopwords(cfg_.stopwords_path);

    for (const auto& [name, path] : cfg_.corpus_paths) {
      const auto schema = SchemaMap::load((fs::path(cfg_.schema_dir) / (name + ".json")).string());
      if (schema.kind == CorpusKind::hs) {
        auto rep = ingest_messages(path, schema);
        hs_.insert(hs_.end(), rep.records.begin(), rep.records.end());
      } else {
        auto rep = ingest_counterspeech(path, schema);
        cs_.insert(cs_.end(), rep.records.begin(), rep.records.end());
      }
    }
    if (cfg_.topics) {
      LdaConfig lc;
      lc.K = cfg_.topics->k;
      lc.iterations = cfg_.topics->iterations;
      lc.seed = cfg_.topics->seed;
      if (!hs_.empty()) hs_topics_ = fit_lda(texts_of(hs_), lc, stopwords_).model;
      if (!cs_.empty()) cs_topics_ = fit_lda(texts_of(cs_), lc, stopwords_).model;
    }

    PipelineConfig pc;
    pc.embed_backend = cfg_.embed_backend;
    pc.classify_backend = cfg_.classify_backend;
    pc.summarize_backend = cfg_.summarize_backend;
    pc.temperature = cfg_.temperature;
    pc.max_tokens = cfg_.max_tokens;
    pc.record_timing = !cfg_.frozen_clock;
    pipeline_ = std::make_unique<RagPipeline>(*gateway_, index_.get(), templates_, pc);

    if (!cfg_.auth_token_env.empty()) token_ = std::getenv(cfg_.auth_token_env.c_str());
    routes();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return cfg_; }
  const Gateway& gateway() const { return *gateway_; }
  const Index* index() const { return index_.get(); }
  const std::vector<Message>& hs_messages() const { return hs_; }
  const std::vector<CounterSpeechRecord>& cs_records() const { return cs_; }
  httplib::Server& server() { return server_; }

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind() {
    const int port = cfg_.port == 0 ? server_.bind_to_any_port(cfg_.host)
                                    : (server_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
    if (port < 0) fail(Errc::io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    return port;
  }

  /// Blocks until stop().
  void serve() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  // Route handlers; public so tests and the CLI can call them without a socket.

  json analyze(const json& body) const {
    detail::Fields f(body);
    const auto text = f.text("text");
    const auto chat = chat_backend(f);
    const bool use_rag = f.boolean("use_rag").value_or(true);
    const auto seed = f.uint("seed");
    const auto k = f.uint("k");
    f.finish();
    GenerationTask t = task(TaskKind::explanation, text, chat, use_rag, seed, k);
    const auto cls = pipeline_->classify(text);
    t.classification = cls;
    return json{{"classification", cls}, {"explanation", pipeline_->run(t)}};
  }

  json counterspeech(const json& body) const {
    detail::Fields f(body);
    const auto text = f.text("text");
    const auto chat = chat_backend(f);
    const bool use_rag = f.boolean("use_rag").value_or(true);
    const auto seed = f.uint("seed");
    const auto k = f.uint("k");
    f.finish();
    return pipeline_->run(task(TaskKind::counter_speech, text, chat, use_rag, seed, k));
  }

  json compare(const json& body) const {
    detail::Fields f(body);
    const auto text = f.text("text");
    const auto kind_raw = f.str("kind", true);
    const auto chat = chat_backend(f);
    const auto seed = f.uint("seed");
    const auto k = f.uint("k");
    TaskKind kind = TaskKind::counter_speech;
    if (kind_raw) {
      try {
        kind = parse_task_kind(*kind_raw);
      } catch (const Error&) {
        f.error("kind", "must be explanation or counter_speech");
      }
    }
    f.finish();
    auto rc = cfg_.retrieval;
    if (k) rc.k = *k;
    rc.validate();
    return pipeline_->compare_modes(text, kind, chat, rc, seed ? seed : cfg_.default_seed);
  }

  json sankey(const httplib::Request& req) const {
    const auto view = view_of(req);
    auto layers_raw = detail::csv_param(req, "layers");
    if (layers_raw.empty()) layers_raw = {"target", "category"};
    std::vector<SankeyLayer> layers;
    for (const auto& l : layers_raw) layers.push_back(parse_sankey_layer(l));
    const auto crit = criteria_of(req);
    if (view == "hs") return sankey_data(filter(hs_, crit), layers, hs_topics_ ? &*hs_topics_ : nullptr);
    return sankey_data(filter(cs_, crit), layers, cs_topics_ ? &*cs_topics_ : nullptr);
  }

  json words(const httplib::Request& req) const {
    const auto view = view_of(req);
    std::size_t top_n = 20;
    if (auto v = detail::param(req, "top_n")) top_n = parse_count(*v, "top_n");
    const auto crit = criteria_of(req);
    const auto texts = view == "hs" ? texts_of(filter(hs_, crit)) : texts_of(filter(cs_, crit));
    json rows = json::array();
    for (const auto& [w, n] : word_frequencies(texts, top_n, stopwords_)) rows.push_back({{"word", w}, {"count", n}});
    return json{{"view", view}, {"words", rows}, {"documents", texts.size()}};
  }

  json targets(const httplib::Request& req) const {
    const auto view = view_of(req);
    const auto group_by = detail::csv_param(req, "group_by");
    const auto crit = criteria_of(req);
    json out = view == "hs" ? json(target_frequencies(filter(hs_, crit), group_by))
                            : json(target_frequencies(filter(cs_, crit), group_by));
    out["view"] = view;
    return out;
  }

  json augment_route(const json& body) const {
    AugmentationRequest r;
    try {
      r = augmentation_request_from_json(body);
    } catch (const json::exception& e) {
      throw RequestError(json{{"body", e.what()}});
    }
    AugmentContext ctx{gateway_.get(), cfg_.chat_backend, &templates_};
    if (cfg_.chat_backend.empty()) ctx.gateway = nullptr;
    if (body.contains("model") && body["model"].is_string()) ctx.chat_backend = body["model"].get<std::string>();
    return augment(r, lexicons_, ctx);
  }

  json eval_run(const json& body) const {
    detail::Fields f(body);
    std::vector<GenerationSample> samples;
    std::vector<LikertRating> ratings;
    try {
      samples = body.at("samples").get<std::vector<GenerationSample>>();
    } catch (const json::exception& e) {
      f.error("samples", e.what());
    } catch (const Error& e) {
      f.error("samples", e.what());
    }
    try {
      ratings = body.value("ratings", json::array()).get<std::vector<LikertRating>>();
    } catch (const json::exception& e) {
      f.error("ratings", e.what());
    } catch (const Error& e) {
      f.error("ratings", e.what());
    }
    const bool with_metrics = f.boolean("metrics").value_or(true);
    f.finish();
    std::vector<SampleMetrics> metrics;
    if (with_metrics && !samples.empty()) {
      EvalBackends b;
      b.embed = cfg_.embed_backend;
      b.nli = cfg_.nli_backend;
      if (!cfg_.chat_backend.empty() && gateway_->descriptor(cfg_.chat_backend).has(Capability::logprobs)) {
        b.chat_logprobs = cfg_.chat_backend;
      }
      if (b.embed.empty() || b.nli.empty()) fail(Errc::missing_backend, "automatic metrics need embed and nli backends");
      metrics = evaluate_samples(samples, *gateway_, b);
    }
    const auto report = aggregate_report(samples, ratings, metrics);
    return json{{"report", report}, {"sample_metrics", metrics}, {"text", render_text(report)}};
  }

  json eval_report() const {
    if (cfg_.eval_report_path.empty()) fail(Errc::not_found, "no eval report configured");
    std::ifstream in(cfg_.eval_report_path);
    if (!in) fail(Errc::io, "cannot open eval report '" + cfg_.eval_report_path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      fail(Errc::parse, cfg_.eval_report_path + ": " + e.what());
    }
    // Accept either a bare report or the eval_run envelope.
    const json& rep = j.contains("report") ? j["report"] : j;
    const auto report = report_from_json(rep);
    return json{{"report", report}, {"text", render_text(report)}};
  }

  json healthz() const {
    json backends = json::array();
    bool all = true;
    for (const auto& d : gateway_->descriptors()) {
      bool ok = true;
      if (d.endpoint.rfind("mock://", 0) != 0) {
        try {
          const auto [base, prefix] = split_endpoint(d.endpoint);
          httplib::Client cli(base);
          cli.set_connection_timeout(std::chrono::seconds(1));
          cli.set_read_timeout(std::chrono::seconds(1));
          ok = static_cast<bool>(cli.Get(prefix.empty() ? "/" : prefix));
        } catch (const std::exception&) {
          ok = false;
        }
      }
      all = all && ok;
      backends.push_back({{"id", d.id}, {"kind", to_string(d.kind)}, {"reachable", ok}});
    }
    return json{{"status", all ? "ok" : "degraded"},
                {"backends", backends},
                {"index_passages", index_ ? index_->size() : 0},
                {"hs_messages", hs_.size()},
                {"cs_records", cs_.size()}};
  }

 private:
  std::string chat_backend(detail::Fields& f) const {
    auto model = f.str("model");
    if (!model) {
      if (cfg_.chat_backend.empty()) f.error("model", "no default chat backend configured");
      return cfg_.chat_backend;
    }
    if (!gateway_->contains(*model) || gateway_->descriptor(*model).kind != BackendKind::chat) {
      f.error("model", "unknown chat backend '" + *model + "'");
    }
    return *model;
  }

  GenerationTask task(TaskKind kind, const std::string& text, const std::string& chat, bool use_rag,
                      std::optional<std::uint64_t> seed, std::optional<std::uint64_t> k) const {
    GenerationTask t;
    t.kind = kind;
    t.message = text;
    t.chat_backend_id = chat;
    t.use_rag = use_rag;
    t.retrieval_cfg = cfg_.retrieval;
    if (k) t.retrieval_cfg.k = *k;
    t.seed = seed ? seed : cfg_.default_seed;
    return t;
  }

  static std::string view_of(const httplib::Request& req) {
    const auto v = detail::param(req, "view").value_or("hs");
    if (v != "hs" && v != "cs") throw RequestError(json{{"view", "must be hs or cs"}});
    return v;
  }

  static std::size_t parse_count(const std::string& v, const char* key) {
    std::size_t used = 0;
    unsigned long n = 0;
    try {
      n = std::stoul(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || n == 0) throw RequestError(json{{key, "must be a positive integer"}});
    return n;
  }

  static Criteria criteria_of(const httplib::Request& req) {
    Criteria c;
    json errors = json::object();
    if (auto v = detail::param(req, "hateful")) {
      c.hateful = peace::detail::parse_bool(*v);
      if (!c.hateful) errors["hateful"] = "must be true or false";
    }
    if (auto v = detail::param(req, "implicitness")) {
      c.implicitness = try_parse_implicitness(*v);
      if (!c.implicitness) errors["implicitness"] = "unknown implicitness '" + *v + "'";
    }
    if (auto v = detail::param(req, "source")) {
      c.source = try_parse_source(*v);
      if (!c.source) errors["source"] = "unknown source '" + *v + "'";
    }
    if (auto v = detail::param(req, "target")) c.target = *v;
    if (auto v = detail::param(req, "dataset")) c.dataset = *v;
    if (!errors.empty()) throw RequestError(errors);
    return c;
  }

  void audit(const httplib::Request& req, int status) {
    if (cfg_.audit_log_path.empty()) return;
    json line = {{"method", req.method}, {"path", req.path}, {"status", status}};
    if (!req.body.empty()) line["body"] = req.body;
    if (!cfg_.frozen_clock) {
      line["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    }
    std::lock_guard lock(audit_mu_);
    std::ofstream out(cfg_.audit_log_path, std::ios::app);
    out << line.dump() << "\n";
  }

  using JsonHandler = std::function<json(const httplib::Request&)>;

  httplib::Server::Handler wrap(JsonHandler fn) {
    return [this, fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      int status = 200;
      json out;
      try {
        out = fn(req);
      } catch (const Error& e) {
        status = http_status(e.code());
        out = error_payload(e);
      } catch (const json::exception& e) {
        status = 400;
        out = {{"error", "ParseError"}, {"message", e.what()}};
      } catch (const std::exception& e) {
        status = 500;
        out = {{"error", "InternalError"}, {"message", e.what()}};
      }
      res.status = status;
      res.set_content(out.dump(), "application/json");
      audit(req, status);
    };
  }

  static json parse_body(const httplib::Request& req) {
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      fail(Errc::parse, std::string("request body is not valid JSON: ") + e.what());
    }
  }

  void routes() {
    server_.set_payload_max_length(cfg_.max_body_bytes);
    const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.request_timeout);
    server_.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(secs).count(),
                             static_cast<time_t>(secs.count() % 1000000));
    server_.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(secs).count(),
                              static_cast<time_t>(secs.count() % 1000000));

    server_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (!token_ || req.path == "/healthz" || req.path == "/openapi.json") return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("X-Peace-Token") == *token_) return httplib::Server::HandlerResponse::Unhandled;
      res.status = 401;
      res.set_content(json{{"error", "Unauthorized"}, {"message", "missing or wrong X-Peace-Token"}}.dump(),
                      "application/json");
      return httplib::Server::HandlerResponse::Handled;
    });
    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const char* name = res.status == 404 ? "NotFound" : res.status == 413 ? "PayloadTooLarge" : "HttpError";
      res.set_content(json{{"error", name}, {"message", httplib::status_message(res.status)}}.dump(),
                      "application/json");
    });

    server_.Post("/analyze", wrap([this](const auto& r) { return analyze(parse_body(r)); }));
    server_.Post("/counterspeech", wrap([this](const auto& r) { return counterspeech(parse_body(r)); }));
    server_.Post("/compare", wrap([this](const auto& r) { return compare(parse_body(r)); }));
    server_.Get("/explore/sankey", wrap([this](const auto& r) { return sankey(r); }));
    server_.Get("/explore/words", wrap([this](const auto& r) { return words(r); }));
    server_.Get("/explore/targets", wrap([this](const auto& r) { return targets(r); }));
    server_.Post("/augment", wrap([this](const auto& r) { return augment_route(parse_body(r)); }));
    server_.Post("/eval/run", wrap([this](const auto& r) { return eval_run(parse_body(r)); }));
    server_.Get("/eval/report", [this](const httplib::Request& req, httplib::Response& res) {
      wrap([this](const auto&) { return eval_report(); })(req, res);
      if (res.status == 200 && detail::param(req, "format") == std::optional<std::string>("text")) {
        res.set_content(json::parse(res.body)["text"].get<std::string>(), "text/plain");
      }
    });
    server_.Get("/healthz", wrap([this](const auto&) { return healthz(); }));
    server_.Get("/openapi.json", wrap([](const auto&) { return openapi_document(); }));
  }

  ServiceConfig cfg_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<Index> index_;
  TemplateSet templates_;
  LexiconPack lexicons_;
  std::set<std::string> stopwords_;
  std::vector<Message> hs_;
  std::vector<CounterSpeechRecord> cs_;
  std::optional<TopicModel> hs_topics_, cs_topics_;
  std::unique_ptr<RagPipeline> pipeline_;
  std::optional<std::string> token_;
  std::mutex audit_mu_;
  httplib::Server server_;
};

// ---------------------------------------------------------------------------
// OpenAPI description

inline json openapi_document() {
  auto ref = [](const std::string& name) { return json{{"$ref", "#/components/schemas/" + name}}; };
  auto body = [&](const std::string& schema) {
    return json{{"required", true}, {"content", {{"application/json", {{"schema", ref(schema)}}}}}};
  };
  auto ok = [&](const std::string& schema, const std::string& desc) {
    return json{{"description", desc}, {"content", {{"application/json", {{"schema", ref(schema)}}}}}};
  };
  auto errors = [&](json responses, std::initializer_list<const char*> codes) {
    for (const char* c : codes) {
      std::string d = std::string(c) == "400"   ? "validation error with per-field messages"
                      : std::string(c) == "401" ? "missing or wrong X-Peace-Token"
                      : std::string(c) == "404" ? "unknown backend or resource"
                      : std::string(c) == "413" ? "body exceeds max_body_bytes"
                      : std::string(c) == "422" ? "request is valid but cannot be served (capability, data or index)"
                      : std::string(c) == "502" ? "backend error, passed through with backend_id"
                      : std::string(c) == "504" ? "backend timeout or transport failure"
                                                : "internal error";
      responses[c] = {{"description", d}, {"content", {{"application/json", {{"schema", ref("Error")}}}}}};
    }
    return responses;
  };
  auto qparam = [](const char* name, const char* type, const char* desc) {
    return json{{"name", name}, {"in", "query"}, {"required", false}, {"schema", {{"type", type}}}, {"description", desc}};
  };
  const json filters = json::array({
      qparam("view", "string", "hs or cs (default hs)"),
      qparam("dataset", "string", "dataset filter"),
      qparam("target", "string", "canonical target filter"),
      qparam("hateful", "boolean", "HS only"),
      qparam("implicitness", "string", "HS only: explicit, implicit, subtle, none"),
      qparam("source", "string", "CS only: expert, user, RAG, No-RAG"),
  });
  auto with = [&](json extra) {
    json p = filters;
    for (auto& e : extra) p.push_back(e);
    return p;
  };

  json paths;
  paths["/analyze"]["post"] = {{"summary", "Classify a message and explain it"},
                               {"requestBody", body("GenerateRequest")},
                               {"responses", errors({{"200", ok("AnalyzeResponse", "classification and explanation")}},
                                                    {"400", "401", "404", "413", "422", "502", "504"})}};
  paths["/counterspeech"]["post"] = {{"summary", "Generate counter-speech"},
                                     {"requestBody", body("GenerateRequest")},
                                     {"responses", errors({{"200", ok("GenerationResult", "generation with evidence")}},
                                                          {"400", "401", "404", "413", "422", "502", "504"})}};
  paths["/compare"]["post"] = {{"summary", "Same task with and without retrieval"},
                               {"requestBody", body("CompareRequest")},
                               {"responses", errors({{"200", ok("ComparisonResult", "both modes; failed side as error marker")}},
                                                    {"400", "401", "404", "413", "422"})}};
  paths["/explore/sankey"]["get"] = {
      {"summary", "Flows between adjacent layers"},
      {"parameters", with(json::array({qparam("layers", "string", "comma list of target, category, topic, source")}))},
      {"responses", errors({{"200", ok("SankeyGraph", "nodes and weighted links")}}, {"400", "401", "422"})}};
  paths["/explore/words"]["get"] = {
      {"summary", "Word frequencies"},
      {"parameters", with(json::array({qparam("top_n", "integer", "rows to return (default 20)")}))},
      {"responses", errors({{"200", ok("WordFrequencies", "count desc, word asc")}}, {"400", "401"})}};
  paths["/explore/targets"]["get"] = {
      {"summary", "Target frequency table"},
      {"parameters", with(json::array({qparam("group_by", "string", "comma list: dataset, implicitness (HS), source (CS)")}))},
      {"responses", errors({{"200", ok("FrequencyTable", "rows sorted by target then group values")}}, {"400", "401"})}};
  paths["/augment"]["post"] = {{"summary", "Produce text variants"},
                               {"requestBody", body("AugmentationRequest")},
                               {"responses", errors({{"200", ok("AugmentResult", "variants with edit traces")}},
                                                    {"400", "401", "413", "422", "502", "504"})}};
  paths["/eval/run"]["post"] = {{"summary", "Aggregate ratings and compute automatic metrics"},
                                {"requestBody", body("EvalRunRequest")},
                                {"responses", errors({{"200", ok("EvalRunResponse", "report, per-sample metrics, text tables")}},
                                                     {"400", "401", "413", "422", "502", "504"})}};
  paths["/eval/report"]["get"] = {
      {"summary", "Stored evaluation report"},
      {"parameters", json::array({qparam("format", "string", "json (default) or text")})},
      {"responses", errors({{"200", ok("EvalReportResponse", "report and its text rendering")}}, {"401", "404", "500"})}};
  paths["/healthz"]["get"] = {{"summary", "Backend reachability"},
                              {"responses", {{"200", ok("Health", "per-backend reachability")}}}};
  paths["/openapi.json"]["get"] = {{"summary", "This document"},
                                   {"responses", {{"200", {{"description", "OpenAPI 3.0 document"}}}}}};

  auto obj = [](json props, json required = json::array()) {
    json s = {{"type", "object"}, {"properties", std::move(props)}};
    if (!required.empty()) s["required"] = std::move(required);
    return s;
  };
  const json str = {{"type", "string"}}, num = {{"type", "number"}}, integer = {{"type", "integer"}},
             boolean = {{"type", "boolean"}};
  auto arr = [](json items) { return json{{"type", "array"}, {"items", std::move(items)}}; };
  auto nullable = [](json s) {
    s["nullable"] = true;
    return s;
  };

  json schemas;
  schemas["Error"] = obj({{"error", str}, {"message", str}, {"fields", {{"type", "object"}}}, {"backend_id", str},
                          {"backend_code", str}},
                         {"error", "message"});
  schemas["GenerateRequest"] = obj({{"text", str}, {"model", str}, {"use_rag", boolean}, {"seed", integer}, {"k", integer}},
                                   {"text"});
  schemas["CompareRequest"] = obj({{"text", str},
                                   {"kind", {{"type", "string"}, {"enum", {"explanation", "counter_speech"}}}},
                                   {"model", str},
                                   {"seed", integer},
                                   {"k", integer}},
                                  {"text", "kind"});
  schemas["Classification"] = obj({{"label", {{"type", "string"}, {"enum", {"hateful", "non_hateful"}}}}, {"confidence", num}});
  schemas["EvidencePassage"] = obj({{"doc_id", str}, {"para_index", integer}, {"text", str}, {"score", num}});
  schemas["GenerationResult"] = obj({{"task", {{"type", "object"}}},
                                     {"text", str},
                                     {"evidence", arr(ref("EvidencePassage"))},
                                     {"evidence_summary", nullable(str)},
                                     {"prompts", {{"type", "object"}}},
                                     {"backend_id", str},
                                     {"elapsed_ms", num},
                                     {"warnings", arr(str)}});
  schemas["AnalyzeResponse"] = obj({{"classification", ref("Classification")}, {"explanation", ref("GenerationResult")}});
  schemas["ComparisonResult"] = obj({{"classification", nullable(ref("Classification"))},
                                     {"rag", nullable(ref("GenerationResult"))},
                                     {"no_rag", nullable(ref("GenerationResult"))},
                                     {"errors", {{"type", "object"}}}});
  schemas["SankeyGraph"] = obj({{"nodes", arr(obj({{"id", str}, {"layer", str}, {"label", str}}))},
                                {"links", arr(obj({{"from", str}, {"to", str}, {"weight", integer}}))}});
  schemas["WordFrequencies"] =
      obj({{"view", str}, {"documents", integer}, {"words", arr(obj({{"word", str}, {"count", integer}}))}});
  schemas["FrequencyTable"] =
      obj({{"view", str}, {"group_by", arr(str)}, {"total", integer}, {"rows", arr({{"type", "object"}})}});
  schemas["AugmentationRequest"] = obj(
      {{"text", str},
       {"strategy", {{"type", "string"},
                     {"enum", {"eda", "ne_replace", "scalar_adverb", "adverbial_modifier", "adj_synonym",
                               "domain_expression", "back_translate"}}}},
       {"eda_mode", {{"type", "string"}, {"enum", {"replace", "insert", "swap", "delete"}}}},
       {"intensity", num},
       {"count", integer},
       {"seed", integer},
       {"direction", {{"type", "string"}, {"enum", {"up", "down"}}}},
       {"pivot_language", str},
       {"model", str}},
      {"text", "strategy"});
  schemas["AugmentResult"] = obj(
      {{"variants", arr(obj({{"variant", str},
                             {"edits", arr(obj({{"span", arr(integer)}, {"before", str}, {"after", str}}))},
                             {"pivot_text", nullable(str)}}))},
       {"reason", nullable(str)}});
  schemas["GenerationSample"] = obj({{"sample_id", str},
                                     {"hs_message", {{"type", "object"}}},
                                     {"output_text", str},
                                     {"task", str},
                                     {"mode", {{"type", "string"}, {"enum", {"RAG", "NoRAG"}}}},
                                     {"implicitness_class", {{"type", "string"}, {"enum", {"explicit", "implicit"}}}},
                                     {"evidence_texts", arr(str)}},
                                    {"hs_message", "output_text", "task", "mode", "implicitness_class"});
  schemas["LikertRating"] = obj({{"sample_id", str}, {"annotator_id", str}, {"F", integer}, {"SO", integer},
                                 {"I", integer}, {"SP", integer}, {"P", integer}},
                                {"sample_id", "annotator_id", "F", "SO", "I", "SP", "P"});
  schemas["EvalRunRequest"] =
      obj({{"samples", arr(ref("GenerationSample"))}, {"ratings", arr(ref("LikertRating"))}, {"metrics", boolean}},
          {"samples"});
  schemas["MetricReport"] = obj({{"columns", arr(str)},
                                 {"n_samples", integer},
                                 {"n_ratings", integer},
                                 {"sections", arr({{"type", "object"}})},
                                 {"agreement", arr({{"type", "object"}})}});
  schemas["EvalRunResponse"] =
      obj({{"report", ref("MetricReport")}, {"sample_metrics", arr({{"type", "object"}})}, {"text", str}});
  schemas["EvalReportResponse"] = obj({{"report", ref("MetricReport")}, {"text", str}});
  schemas["Health"] = obj({{"status", str},
                           {"backends", arr(obj({{"id", str}, {"kind", str}, {"reachable", boolean}}))},
                           {"index_passages", integer},
                           {"hs_messages", integer},
                           {"cs_records", integer}});

  return json{{"openapi", "3.0.3"},
              {"info", {{"title", "peace-engine API"}, {"version", "1.0.0"}}},
              {"paths", paths},
              {"components",
               {{"schemas", schemas},
                {"securitySchemes", {{"token", {{"type", "apiKey"}, {"in", "header"}, {"name", "X-Peace-Token"}}}}}}}};
}

}  // namespace peace
