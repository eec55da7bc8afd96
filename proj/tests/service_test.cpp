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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "peace/service.hpp"

namespace peace {
namespace {

namespace fs = std::filesystem;

// A service on an ephemeral port, served from a background thread.
struct Running {
  explicit Running(ServiceConfig cfg) : svc(std::make_unique<Service>(std::move(cfg), quiet())) {
    svc->config();
    port = svc->bind();
    thread = std::thread([this] { svc->serve(); });
    svc->server().wait_until_ready();
  }
  ~Running() {
    svc->stop();
    thread.join();
  }
  static Gateway::Options quiet() { return Gateway::Options{false, [](std::string_view) {}}; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(std::chrono::seconds(30));
    return c;
  }

  std::unique_ptr<Service> svc;
  int port = 0;
  std::thread thread;
};

ServiceConfig mock_cfg() {
  auto c = ServiceConfig::mock_defaults(PEACE_DATA_DIR);
  c.port = 0;
  return c;
}

// One shared mock deployment; startup builds the sample index and topic models.
Running& shared() {
  static Running r(mock_cfg());
  return r;
}

json post(const std::string& path, const json& body, int expect = 200) {
  auto c = shared().client();
  auto res = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << " -> " << res->body;
  return json::parse(res->body);
}

json get(const std::string& path, int expect = 200) {
  auto c = shared().client();
  auto res = c.Get(path);
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << " -> " << res->body;
  return json::parse(res->body);
}

TEST(Config, RelativePathsAndEnvOverrides) {
  auto c = ServiceConfig::from_json(json::parse(R"({"listen":"0.0.0.0:9001","index":"kb.idx","corpora":{"IHC":"d/ihc.csv"},
                                                   "backends":{"chat":"c1"},"seed":7,"topics":{"k":3}})"),
                                    "/etc/peace");
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.port, 9001);
  EXPECT_EQ(c.index_path, "/etc/peace/kb.idx");
  EXPECT_EQ(c.corpus_paths.at("IHC"), "/etc/peace/d/ihc.csv");
  EXPECT_EQ(c.chat_backend, "c1");
  EXPECT_EQ(c.default_seed, std::optional<std::uint64_t>(7));
  EXPECT_EQ(c.topics->k, 3u);

  ::setenv("PEACE_INDEX", "/tmp/other.idx", 1);
  c.apply_env();
  ::unsetenv("PEACE_INDEX");
  EXPECT_EQ(c.index_path, "/tmp/other.idx");
}

TEST(Config, FailsFastOnMissingPaths) {
  auto c = mock_cfg();
  c.kb_path = "/nonexistent/kb.jsonl";
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
  }
  ServiceConfig real;
  EXPECT_THROW(real.validate(), Error);  // no registry and not mock
}

TEST(Config, LoadHonoursPeaceConfig) {
  const auto dir = fs::temp_directory_path() / "peace_cfg_test";
  fs::create_directories(dir);
  std::ofstream(dir / "svc.json") << R"({"mock":true,"max_body_bytes":1234})";
  ::setenv("PEACE_CONFIG", (dir / "svc.json").c_str(), 1);
  auto c = ServiceConfig::load("ignored.json");
  ::unsetenv("PEACE_CONFIG");
  EXPECT_TRUE(c.mock);
  EXPECT_EQ(c.max_body_bytes, 1234u);
}

TEST(Status, EveryErrorCodeMaps) {
  std::set<int> seen;
  for (int i = 0; i <= static_cast<int>(Errc::io); ++i) {
    const int s = http_status(static_cast<Errc>(i));
    EXPECT_TRUE(s == 400 || s == 404 || s == 422 || s == 500 || s == 502 || s == 504);
    seen.insert(s);
  }
  EXPECT_EQ(seen.size(), 6u);
  EXPECT_EQ(http_status(Errc::backend), 502);
  EXPECT_EQ(http_status(Errc::transport), 504);
}

TEST(Routes, CompareHasBothModesAndEvidenceOnRagOnly) {
  auto j = post("/compare", {{"text", "They are vermin and should leave"}, {"kind", "cs"}});
  ASSERT_TRUE(j["rag"].is_object());
  ASSERT_TRUE(j["no_rag"].is_object());
  EXPECT_FALSE(j["rag"]["evidence"].empty());
  EXPECT_LE(j["rag"]["evidence"].size(), 3u);
  EXPECT_TRUE(j["no_rag"]["evidence"].empty());
  EXPECT_TRUE(j["errors"].empty());
}

TEST(Routes, AnalyzeShapeAndValidation) {
  auto j = post("/analyze", {{"text", "Those parasites are ruining the country"}});
  EXPECT_EQ(j["classification"]["label"], "hateful");
  EXPECT_EQ(j["explanation"]["task"]["kind"], "explanation");
  EXPECT_FALSE(j["explanation"]["evidence"].empty());

  auto bad = post("/analyze", {{"text", ""}}, 400);
  EXPECT_EQ(bad["error"], "InvalidArgument");
  EXPECT_TRUE(bad["fields"].contains("text"));

  auto both = post("/analyze", {{"text", 3}, {"model", "nope"}, {"use_rag", "yes"}}, 400);
  EXPECT_TRUE(both["fields"].contains("text"));
  EXPECT_TRUE(both["fields"].contains("model"));
  EXPECT_TRUE(both["fields"].contains("use_rag"));

  auto c = shared().client();
  auto res = c.Post("/analyze", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(Routes, CounterspeechWithoutRagHasNoEvidence) {
  auto j = post("/counterspeech", {{"text", "Migrants are invaders"}, {"use_rag", false}, {"seed", 3}});
  EXPECT_TRUE(j["evidence"].empty());
  EXPECT_FALSE(j["text"].get<std::string>().empty());
}

TEST(Routes, SameRequestSameBytes) {
  auto c = shared().client();
  const std::string body = json{{"text", "Women are inferior"}, {"seed", 11}}.dump();
  auto a = c.Post("/analyze", body, "application/json");
  auto b = c.Post("/analyze", body, "application/json");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->body, b->body);
  // a second process-equivalent instance built from the same config
  Running other(mock_cfg());
  auto o = other.client().Post("/analyze", body, "application/json");
  ASSERT_TRUE(o);
  EXPECT_EQ(o->body, a->body);
}

TEST(Routes, SankeyMatchesDirectCall) {
  const auto& svc = *shared().svc;
  auto j = get("/explore/sankey?view=hs&layers=target,category");
  const json direct = sankey_data(svc.hs_messages(), {SankeyLayer::target, SankeyLayer::category});
  EXPECT_EQ(j, direct);

  Criteria crit;
  crit.dataset = "IHC";
  auto f = get("/explore/sankey?view=hs&layers=category,target&dataset=IHC");
  EXPECT_EQ(f, json(sankey_data(filter(svc.hs_messages(), crit), {SankeyLayer::category, SankeyLayer::target})));

  auto cs = get("/explore/sankey?view=cs&layers=source,category,topic");
  EXPECT_FALSE(cs["links"].empty());
  get("/explore/sankey?view=cs&hateful=true", 400);
  get("/explore/sankey?view=xx", 400);
  get("/explore/sankey?layers=target,nope", 400);
}

TEST(Routes, WordsAndTargets) {
  auto w = get("/explore/words?view=hs&top_n=5");
  EXPECT_EQ(w["words"].size(), 5u);
  auto counts = w["words"];
  for (std::size_t i = 1; i < counts.size(); ++i) EXPECT_GE(counts[i - 1]["count"], counts[i]["count"]);
  get("/explore/words?top_n=0", 400);

  auto t = get("/explore/targets?view=cs&group_by=source");
  EXPECT_EQ(t["total"], shared().svc->cs_records().size());
  get("/explore/targets?view=cs&group_by=implicitness", 400);
}

TEST(Routes, AugmentVariants) {
  auto j = post("/augment", {{"text", "They are very lazy people"}, {"strategy", "scalar_adverb"}, {"count", 2}});
  ASSERT_FALSE(j["variants"].empty());
  EXPECT_TRUE(j["reason"].is_null());
  auto none = post("/augment", {{"text", "alone"}, {"strategy", "eda"}, {"eda_mode", "swap"}});
  EXPECT_EQ(none["reason"], "NoEligibleSite");
  post("/augment", {{"text", "x y"}, {"strategy", "eda"}}, 400);
  auto bt = post("/augment", {{"text", "hello there"}, {"strategy", "back_translate"}});
  EXPECT_TRUE(bt.contains("variants"));
}

TEST(Routes, EvalRunAndMissingReport) {
  json sample = {{"sample_id", "s1"},
                 {"hs_message", {{"id", "h1"}, {"text", "they are vermin"}, {"hateful", true}, {"implicitness", "explicit"}}},
                 {"output_text", "calling people vermin dehumanises them"},
                 {"task", "counter_speech"},
                 {"mode", "RAG"},
                 {"implicitness_class", "explicit"},
                 {"evidence_texts", {"All human beings are born free and equal in dignity and rights."}}};
  json rating = {{"sample_id", "s1"}, {"annotator_id", "A"}, {"F", 5}, {"SO", 4}, {"I", 4}, {"SP", 3}, {"P", 4}};
  auto j = post("/eval/run", {{"samples", {sample}}, {"ratings", {rating}}});
  EXPECT_EQ(j["report"]["n_samples"], 1);
  EXPECT_EQ(j["sample_metrics"].size(), 1u);
  EXPECT_NE(j["text"].get<std::string>().find("Counter-speech"), std::string::npos);
  EXPECT_DOUBLE_EQ(j["report"]["sections"][0]["likert"][5]["values"][0].get<double>(), 4.0);

  json bad_rating = rating;
  bad_rating["F"] = 9;
  auto e = post("/eval/run", {{"samples", {sample}}, {"ratings", {bad_rating}}}, 400);
  EXPECT_TRUE(e["fields"].contains("ratings"));
  get("/eval/report", 404);
}

TEST(Routes, EvalReportFromFile) {
  const auto path = fs::temp_directory_path() / "peace_report_test.json";
  auto s = GenerationSample{};
  s.sample_id = "x";
  s.hs_message.id = "h";
  s.hs_message.text = "t";
  s.output_text = "o";
  const json rep = aggregate_report({s}, {LikertRating{"x", "A", {5, 5, 4, 4, 3}}});
  std::ofstream(path) << rep.dump();
  auto cfg = mock_cfg();
  cfg.eval_report_path = path.string();
  cfg.topics.reset();
  Running r(cfg);
  auto res = r.client().Get("/eval/report");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["report"], rep);
  auto txt = r.client().Get("/eval/report?format=text");
  ASSERT_TRUE(txt);
  EXPECT_NE(txt->body.find("Overall"), std::string::npos);
}

TEST(Routes, HealthAndOpenApi) {
  auto h = get("/healthz");
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["backends"].size(), 5u);
  EXPECT_GT(h["index_passages"].get<int>(), 100);

  auto o = get("/openapi.json");
  for (const char* p : {"/analyze", "/counterspeech", "/compare", "/explore/sankey", "/explore/words",
                        "/explore/targets", "/augment", "/eval/run", "/eval/report", "/healthz"}) {
    EXPECT_TRUE(o["paths"].contains(p)) << p;
  }
  // every $ref resolves
  std::function<void(const json&)> walk = [&](const json& n) {
    if (n.is_object()) {
      if (n.contains("$ref")) {
        const auto name = n["$ref"].get<std::string>().substr(std::string("#/components/schemas/").size());
        EXPECT_TRUE(o["components"]["schemas"].contains(name)) << name;
      }
      for (const auto& [k, v] : n.items()) walk(v);
    } else if (n.is_array()) {
      for (const auto& v : n) walk(v);
    }
  };
  walk(o);
  get("/no/such/route", 404);
}

TEST(Limits, TokenAndBodySize) {
  ::setenv("PEACE_TEST_TOKEN", "s3cret", 1);
  auto cfg = mock_cfg();
  cfg.auth_token_env = "PEACE_TEST_TOKEN";
  cfg.max_body_bytes = 256;
  cfg.topics.reset();
  cfg.kb_path.clear();
  Running r(cfg);
  auto c = r.client();
  auto denied = c.Post("/counterspeech", R"({"text":"hi","use_rag":false})", "application/json");
  ASSERT_TRUE(denied);
  EXPECT_EQ(denied->status, 401);
  EXPECT_EQ(c.Get("/healthz")->status, 200);

  httplib::Headers h{{"X-Peace-Token", "s3cret"}};
  auto ok = c.Post("/counterspeech", h, R"({"text":"hi","use_rag":false})", "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  auto big = c.Post("/counterspeech", h, json{{"text", std::string(1000, 'a')}}.dump(), "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);
  // no index loaded: RAG is unprocessable, not a server error
  auto rag = c.Post("/counterspeech", h, R"({"text":"hi"})", "application/json");
  ASSERT_TRUE(rag);
  EXPECT_EQ(rag->status, 422);
  ::unsetenv("PEACE_TEST_TOKEN");
}

TEST(Backends, BackendErrorPassesThroughAs502) {
  MockConfig mc;
  mc.backend_error = std::make_pair(std::string("content_filter"), std::string("refused"));
  BackendServer bs(std::make_shared<MockBackend>(mc, "remote"));
  bs.start();
  const auto dir = fs::temp_directory_path() / "peace_502_test";
  fs::create_directories(dir);
  const json registry = {{"backends",
                          {{{"id", "remote-chat"}, {"kind", "chat"}, {"endpoint", bs.endpoint()}, {"model_name", "m"}},
                           {{"id", "local-classify"}, {"kind", "classify"}, {"endpoint", "mock://lexicon"}}}}};
  std::ofstream(dir / "registry.json") << registry.dump();
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.backend_registry_path = (dir / "registry.json").string();
  Running r(cfg);
  auto res = r.client().Post("/counterspeech", R"({"text":"hello","use_rag":false})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 502);
  auto j = json::parse(res->body);
  EXPECT_EQ(j["error"], "BackendError");
  EXPECT_EQ(j["backend_id"], "remote-chat");
  EXPECT_EQ(j["backend_code"], "content_filter");
  bs.stop();
}

}  // namespace
}  // namespace peace
