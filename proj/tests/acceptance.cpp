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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "oracles.hpp"
#include "peace/augmentation.hpp"
#include "peace/backends.hpp"
#include "peace/corpus.hpp"
#include "peace/index.hpp"
#include "peace/lda.hpp"
#include "peace/metrics.hpp"
#include "peace/pipeline.hpp"
#include "peace/report.hpp"
#include "peace/stats.hpp"

namespace fs = std::filesystem;
using namespace peace;

namespace {

const std::string kData = PEACE_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::size_t violations = 0;
  std::string first;

  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (violations++ == 0) first = what;
    pass = false;
  }
};

Gateway quiet() { return Gateway(Gateway::Options{false, [](std::string_view) {}}); }

BackendDescriptor describe(std::string id, BackendKind kind, std::set<Capability> caps = {}) {
  BackendDescriptor d;
  d.id = std::move(id);
  d.kind = kind;
  d.endpoint = "mock://";
  d.model_name = "mock";
  d.capabilities = std::move(caps);
  d.max_concurrency = 4;
  return d;
}

Embedding random_unit(Rng& rng, std::size_t dim) {
  Embedding v(dim);
  for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
  return l2_normalize(std::move(v));
}

std::string random_words(Rng& rng, const std::vector<std::string>& vocab, std::size_t lo, std::size_t hi) {
  std::string s;
  for (std::size_t i = 0, n = lo + rng.below(hi - lo + 1); i < n; ++i) {
    if (i) s += ' ';
    s += vocab[rng.below(vocab.size())];
  }
  return s;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1 ---------------------------------------------------------------------

Outcome retrieval_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  std::size_t queries = 0, max_n = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(10000), dim = 1 + rng.below(128);
    max_n = std::max(max_n, n);
    std::vector<EvidencePassage> ps;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      // every 7th row repeats an earlier vector so ties are exercised
      Embedding v = (i % 7 == 6) ? rows[rng.below(i)] : random_unit(rng, dim);
      ps.push_back({"d", i, "p" + std::to_string(i), v, 0.0});
      rows.push_back(v);
    }
    const auto idx = Index::build(ps);
    for (int q = 0; q < 100; ++q, ++queries) {
      const auto query = q % 10 == 0 ? rows[rng.below(n)] : random_unit(rng, dim);
      const std::size_t k = 1 + rng.below(20);
      const auto got = idx.search(query, k);
      const auto want = oracle::brute_top_k(rows, query, k);
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got[i].row == want[i].first &&
               std::memcmp(&got[i].score, &want[i].second, sizeof(double)) == 0;
      }
      o.check(same, "index " + std::to_string(trial) + " query " + std::to_string(q));
    }
  }
  const double secs = seconds_since(t0);
  o.check(secs < 60.0, "runtime " + text::fixed(secs, 1) + " s");
  o.detail = "50 indices (N<=" + std::to_string(max_n) + ", dim<=128) x 100 queries = " + std::to_string(queries) +
             " searches, " + text::fixed(secs, 1) + " s";
  return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome dedup_contract() {
  Outcome o;
  Rng rng(202);
  const std::vector<std::string> vocab = {"equal", "rights", "law", "dignity", "asylum", "freedom",
                                          "religion", "women", "work", "protection", "minority", "speech"};
  const std::size_t dim = 16;
  std::size_t planted = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    MockConfig mc;
    mc.embed_dim = dim;
    std::vector<KnowledgeDocument> docs;
    std::vector<std::string> paras;
    const std::size_t base = 3 + rng.below(25);
    for (std::size_t i = 0; i < base; ++i) {
      std::string t = random_words(rng, vocab, 2, 8) + " " + std::to_string(i);
      paras.push_back(t);
      const auto kind = rng.below(4);
      if (kind == 0) {  // byte-identical copy
        paras.push_back(t);
      } else if (kind == 1) {  // same text after case/space normalization
        std::string v = "  " + t + " ";
        for (auto& c : v) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        paras.push_back(v);
      } else if (kind == 2) {  // different text, near-identical vector
        auto v = random_unit(rng, dim);
        auto w = v;
        for (auto& x : w) x += 0.01 * (rng.uniform() - 0.5);
        mc.stub_vectors[t] = v;
        const std::string near = t + " indeed";
        mc.stub_vectors[near] = w;
        paras.push_back(near);
      } else {
        continue;
      }
      ++planted;
    }
    rng.shuffle(paras);
    for (std::size_t i = 0; i < paras.size(); ++i) {
      KnowledgeDocument d;
      d.doc_id = "doc" + std::to_string(i);
      d.body = paras[i];
      docs.push_back(d);
    }
    auto gw = quiet();
    gw.add(describe("emb", BackendKind::embed, {Capability::batch}), std::make_shared<MockBackend>(mc, "emb"));
    const auto idx = build_index_from_documents(docs, gw, "emb");
    RetrievalConfig cfg;
    cfg.k = 1 + rng.below(6);
    cfg.candidate_multiplier = 1 + rng.below(10);
    // query is often one of the planted texts so duplicates rank at the top
    const std::string query = rng.below(2) ? paras[rng.below(paras.size())] : random_words(rng, vocab, 1, 6);
    const auto ev = retrieve_evidence(idx, gw, "emb", query, cfg);
    const std::string at = "trial " + std::to_string(trial);
    o.check(ev.size() <= cfg.k, at + ": more than k passages");
    std::set<std::string> texts;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      o.check(texts.insert(text::normalize_for_dedup(ev[i].text)).second, at + ": repeated text");
      for (std::size_t j = 0; j < i; ++j) {
        o.check(oracle::dot(ev[i].embedding, ev[j].embedding) < 0.95, at + ": inner product >= 0.95");
      }
    }
  }
  o.detail = "1000 trials, " + std::to_string(planted) + " planted duplicates, " + std::to_string(o.violations) +
             " violations";
  return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome call_counts() {
  Outcome o;
  auto gw = quiet();
  auto chat = std::make_shared<MockBackend>(MockConfig{}, "chat");
  gw.add(describe("chat", BackendKind::chat, {Capability::seed}), chat);
  gw.add(describe("embed", BackendKind::embed, {Capability::batch}), std::make_shared<MockBackend>(MockConfig{}, "embed"));
  gw.add(describe("cls", BackendKind::classify), std::make_shared<MockBackend>(MockConfig{}, "cls"));
  const auto idx = build_index_from_documents(load_documents_jsonl(kData + "/samples/kb_sample.jsonl"), gw, "embed");
  PipelineConfig pc;
  pc.embed_backend = "embed";
  pc.classify_backend = "cls";
  pc.record_timing = false;
  RagPipeline p(gw, &idx, TemplateSet::defaults(), pc);

  Rng rng(303);
  const std::vector<std::string> vocab = {"they", "are", "not", "welcome", "women", "migrants", "vermin", "law",
                                          "equal", "religion", "work", "asylum", "dignity", "invaders", "é", "!"};
  int rag_tasks = 0;
  for (int i = 0; i < 200; ++i) {
    GenerationTask t;
    t.kind = rng.below(2) ? TaskKind::explanation : TaskKind::counter_speech;
    t.message = random_words(rng, vocab, 1, 20);
    t.use_rag = rng.below(2) == 1;
    t.chat_backend_id = "chat";
    if (rng.below(3)) t.seed = rng.next();
    t.retrieval_cfg.k = 1 + rng.below(8);
    t.retrieval_cfg.candidate_multiplier = 1 + rng.below(12);
    if (t.kind == TaskKind::explanation) t.classification = p.classify(t.message);
    chat->reset_counters();
    const auto r = p.run(t);
    const std::size_t want = t.use_rag ? 2 : 1;
    rag_tasks += t.use_rag;
    o.check(chat->chat_calls() == want, "task " + std::to_string(i) + ": " + std::to_string(chat->chat_calls()) +
                                            " chat calls, expected " + std::to_string(want));
    o.check(t.use_rag || r.evidence.empty(), "task " + std::to_string(i) + ": evidence without RAG");
  }
  o.detail = "200 fuzzed tasks (" + std::to_string(rag_tasks) + " RAG), " + std::to_string(o.violations) +
             " miscounts";
  return o;
}

// --- 4 ---------------------------------------------------------------------

struct ServerProcess {
  pid_t pid = -1;
  int port = 0;

  ServerProcess() {
    int fds[2];
    if (::pipe(fds) != 0) fail(Errc::io, "pipe failed");
    pid = ::fork();
    if (pid == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      if (int devnull = ::open("/dev/null", O_WRONLY); devnull >= 0) ::dup2(devnull, STDERR_FILENO);
      ::execl(PEACE_CLI, "peace", "serve", "--mock", "--port", "0", static_cast<char*>(nullptr));
      std::_Exit(127);
    }
    ::close(fds[1]);
    std::string line;
    char c;
    while (::read(fds[0], &c, 1) == 1 && c != '\n') line += c;
    ::close(fds[0]);
    if (line.empty()) fail(Errc::io, "server printed nothing");
    port = json::parse(line).at("port").get<int>();
  }

  ~ServerProcess() {
    if (pid > 0) {
      ::kill(pid, SIGTERM);
      int status = 0;
      ::waitpid(pid, &status, 0);
    }
  }
};

Outcome end_to_end_determinism() {
  Outcome o;
  const std::vector<std::pair<std::string, json>> requests = {
      {"/analyze", {{"text", "Immigrants are vermin and should go back"}, {"seed", 7}}},
      {"/analyze", {{"text", "Women are too emotional to lead"}, {"seed", 7}, {"use_rag", false}}},
      {"/counterspeech", {{"text", "Muslims are invaders"}, {"seed", 3}}},
      {"/counterspeech", {{"text", "Muslims are invaders"}, {"seed", 3}, {"use_rag", false}, {"k", 5}}},
      {"/compare", {{"text", "Refugees are parasites"}, {"kind", "cs"}, {"seed", 1}}},
      {"/compare", {{"text", "Refugees are parasites"}, {"kind", "explanation"}, {"seed", 1}}},
  };
  std::vector<std::vector<std::string>> runs;
  for (int restart = 0; restart < 3; ++restart) {
    ServerProcess server;
    httplib::Client cli("127.0.0.1", server.port);
    cli.set_read_timeout(30, 0);
    std::vector<std::string> bodies;
    for (const auto& [path, body] : requests) {
      auto res = cli.Post(path, body.dump(), "application/json");
      o.check(res && res->status == 200, "restart " + std::to_string(restart) + " " + path + " failed");
      bodies.push_back(res ? res->body : std::string());
    }
    runs.push_back(std::move(bodies));
  }
  for (std::size_t r = 1; r < runs.size(); ++r) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      o.check(runs[r][i] == runs[0][i], requests[i].first + " differs on restart " + std::to_string(r));
    }
  }
  o.detail = "3 restarts of `peace serve --mock`, " + std::to_string(requests.size()) +
             " requests each over /analyze, /counterspeech, /compare";
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome metric_closed_forms() {
  Outcome o;
  // hand enumeration
  o.check(distinct_n({"the cat sat on the mat"}, 3) == 4.0 / 4.0, "distinct-3 'the cat sat on the mat'");
  o.check(distinct_n({"a a a a a"}, 3) == 1.0 / 3.0, "distinct-3 'a a a a a'");
  o.check(distinct_n({"one two three"}, 3) == 1.0 / 1.0, "distinct-3 three tokens");

  Rng rng(505);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> lp(1 + rng.below(60));
    for (auto& x : lp) x = -8.0 * rng.uniform();
    const double mean = std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size());
    o.check(std::abs(perplexity_from_logprobs(lp) - std::exp(-mean)) <= 1e-9, "perplexity sequence " + std::to_string(t));

    auto gw = quiet();
    MockConfig mc;
    mc.chat_mode = MockConfig::ChatMode::echo;
    mc.fixed_logprobs = lp;
    gw.add(describe("lp", BackendKind::chat, {Capability::logprobs}), std::make_shared<MockBackend>(mc, "lp"));
    o.check(std::abs(perplexity(gw, "lp", "text to score") - std::exp(-mean)) <= 1e-9,
            "perplexity via gateway " + std::to_string(t));
  }

  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 2 + rng.below(30);
    std::vector<double> a(dim), b(dim);
    for (auto& x : a) x = rng.uniform() * 4.0 - 2.0;
    for (auto& x : b) x = rng.uniform() * 4.0 - 2.0;
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    const double cosine = ab / std::sqrt(aa * bb);
    MockConfig mc;
    mc.embed_dim = dim;
    mc.stub_vectors = {{"first", a}, {"second", b}};
    auto gw = quiet();
    gw.add(describe("emb", BackendKind::embed), std::make_shared<MockBackend>(mc, "emb"));
    o.check(std::abs(semantic_similarity(gw, "emb", "first", "second") - cosine) <= 1e-4,
            "similarity stub " + std::to_string(t));
  }
  o.detail = "3 Distinct-3 examples exact; 400 perplexity checks <= 1e-9; 200 cosine checks <= 1e-4";
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome wilcoxon_exact() {
  Outcome o;
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> x(n), y(n), d(n);
    bool nonzero = false;
    for (std::size_t i = 0; i < n; ++i) {
      // small integer grid: ties and zero differences are common
      x[i] = static_cast<double>(rng.below(6));
      y[i] = static_cast<double>(rng.below(6));
      if (trial % 3 == 0) x[i] += rng.uniform();
      d[i] = x[i] - y[i];
      nonzero |= d[i] != 0.0;
    }
    if (!nonzero) {
      x[0] += 1.0;
      d[0] = x[0] - y[0];
    }
    const auto r = wilcoxon_signed_rank(x, y);
    const double want = oracle::wilcoxon_exact_enum(d);
    worst = std::max(worst, std::abs(r.p_value - want));
    o.check(r.method == StatMethod::exact, "trial " + std::to_string(trial) + ": not exact");
    o.check(std::abs(r.p_value - want) <= 1e-12, "trial " + std::to_string(trial));
  }
  const std::vector<double> d{1, 2, 3, 4, 5}, zero(5, 0.0);
  const double p = wilcoxon_signed_rank(d, zero).p_value;
  o.check(p == 0.0625, "d=[1..5] gave p=" + std::to_string(p));
  o.detail = "1000 trials n<=12, max |p - enumeration| = " + sci(worst) + "; d=[+1..+5] p = " +
             text::fixed(p, 4);
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome krippendorff() {
  Outcome o;
  using Matrix = std::vector<std::vector<std::optional<double>>>;
  const Matrix perfect = {{1, 1, 1, 1}, {3, 3, 3, std::nullopt}, {5, 5, 5, 5}, {2, 2, std::nullopt, 2}};
  const double a1 = krippendorff_alpha(perfect, AlphaLevel::ordinal);
  o.check(a1 == 1.0, "perfect agreement gave " + std::to_string(a1));

  Rng rng(707);
  int compared = 0, degenerate = 0;
  double worst = 0.0;
  while (compared < 500) {
    Matrix m(1 + rng.below(10), std::vector<std::optional<double>>(1 + rng.below(4)));
    for (auto& row : m)
      for (auto& c : row)
        if (rng.uniform() > 0.25) c = static_cast<double>(1 + rng.below(5));
    std::vector<std::vector<double>> units;
    std::size_t pairable = 0;
    std::set<double> values;
    for (const auto& row : m) {
      std::vector<double> u;
      for (const auto& c : row)
        if (c) u.push_back(*c);
      if (u.size() >= 2) {
        ++pairable;
        values.insert(u.begin(), u.end());
      }
      units.push_back(u);
    }
    // the oracle is undefined with < 2 pairable units or a single value
    if (pairable < 2 || values.size() < 2) {
      ++degenerate;
      try {
        krippendorff_alpha(m, AlphaLevel::ordinal);
        o.check(false, "degenerate matrix accepted");
      } catch (const Error& e) {
        o.check(e.code() == Errc::insufficient_data || e.code() == Errc::no_variance, "wrong error on degenerate");
      }
      continue;
    }
    const double got = krippendorff_alpha(m, AlphaLevel::ordinal);
    const double want = oracle::krippendorff_literal(units, 2);
    worst = std::max(worst, std::abs(got - want));
    o.check(std::abs(got - want) <= 1e-9, "matrix " + std::to_string(compared));
    ++compared;
  }
  o.detail = "perfect agreement = " + text::fixed(a1, 1) + "; 500 ordinal matrices (<=10x4, missing cells), max diff " +
             sci(worst) + "; " + std::to_string(degenerate) + " degenerate draws rejected";
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome table_arithmetic() {
  Outcome o;
  // Reference dimension means (F, SO, I, SP, P) and Overall, column order
  // Exp_RAG, Exp_NoRAG, Imp_RAG, Imp_NoRAG; explanations then counter-speech.
  struct Column {
    std::array<double, 5> dims;
    double overall;
  };
  const std::array<Column, 8> reference = {{
      {{5.00, 4.88, 4.38, 4.86, 4.68}, 4.76},
      {{5.00, 4.56, 2.84, 3.78, 3.52}, 3.94},
      {{5.00, 4.80, 4.64, 4.88, 4.72}, 4.81},
      {{5.00, 4.58, 2.72, 4.40, 3.86}, 4.11},
      {{5.00, 4.82, 4.66, 4.90, 4.68}, 4.81},
      {{5.00, 3.92, 2.52, 2.98, 2.64}, 3.41},
      {{5.00, 4.88, 4.80, 4.90, 4.94}, 4.90},
      {{5.00, 4.52, 2.86, 3.32, 3.22}, 3.78},
  }};
  std::string got;
  for (const auto& c : reference) {
    const double v = likert_overall(c.dims);
    o.check(std::abs(v - c.overall) <= 0.005 + 1e-12, "overall " + text::fixed(v, 4) + " vs " + text::fixed(c.overall, 2));
    got += (got.empty() ? "" : " ") + text::fixed(v, 2);
  }
  o.detail = "Overall " + got;
  return o;
}

// --- 9 ---------------------------------------------------------------------

Outcome sampling_protocol() {
  Outcome o;
  const std::pair<const char*, const char*> fixtures[] = {
      {"ihc.csv", "IHC"}, {"ishate.jsonl", "ISHate"}, {"toxigen.csv", "TOXIGEN"}, {"dyna.csv", "DYNA"}, {"sbic.jsonl", "SBIC"}};
  std::vector<std::vector<Message>> corpora;
  for (const auto& [file, schema] : fixtures) {
    auto map = SchemaMap::load(kData + "/schemas/" + schema + ".json");
    corpora.push_back(ingest_messages(kData + "/fixtures/" + file, map, true).records);
  }
  for (std::uint64_t seed : {0u, 1u, 42u}) {
    const auto a = sample_eval_set(corpora, 20, seed);
    o.check(a.size() == 100, "seed " + std::to_string(seed) + ": " + std::to_string(a.size()) + " messages");
    std::map<Dataset, std::pair<int, int>> per;
    for (const auto& m : a) (m.implicitness == Implicitness::explicit_ ? per[m.dataset].first : per[m.dataset].second)++;
    o.check(per.size() == 5, "seed " + std::to_string(seed) + ": datasets != 5");
    for (const auto& [d, c] : per) {
      o.check(c.first == 10 && c.second == 10, std::string(to_string(d)) + " not 10+10");
    }
    o.check(json(a).dump() == json(sample_eval_set(corpora, 20, seed)).dump(), "seed " + std::to_string(seed) + " not reproducible");
  }
  o.detail = "5 fixtures, seeds 0/1/42: 100 messages, 10 explicit + 10 implicit per dataset, repeat runs identical";
  return o;
}

// --- 10 --------------------------------------------------------------------

Outcome lda_recovery() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::string> A = {"river", "boat", "fish", "water", "shore", "sail", "harbor", "net", "tide", "anchor"};
  const std::vector<std::string> B = {"oven", "bread", "flour", "yeast", "bake", "dough", "crust", "loaf", "butter", "salt"};
  Rng rng(1010);
  std::vector<std::string> docs;
  std::vector<int> truth;
  for (int d = 0; d < 200; ++d) {
    const int g = static_cast<int>(rng.below(2));
    docs.push_back(random_words(rng, g ? B : A, 8, 20));
    truth.push_back(g);
  }
  LdaConfig cfg;
  cfg.K = 2;
  cfg.iterations = 300;
  cfg.seed = 11;
  const auto a = fit_lda(docs, cfg);
  const auto b = fit_lda(docs, cfg);
  int agree = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) agree += (a.doc_topic[d][1] > a.doc_topic[d][0]) == truth[d];
  const double purity = std::max(agree, 200 - agree) / 200.0;
  o.check(purity >= 0.9, "purity " + text::fixed(purity, 3));
  double worst = 0.0;
  for (const auto* m : {&a.model.topic_word, &a.doc_topic}) {
    for (const auto& row : *m) {
      worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
      for (double x : row) o.check(x >= 0.0, "negative probability");
    }
  }
  o.check(worst <= 1e-6, "row sum off by " + sci(worst));
  o.check(a.model.topic_word == b.model.topic_word && a.doc_topic == b.doc_topic, "seeded runs differ");
  const double secs = seconds_since(t0);
  o.check(secs < 120.0, "runtime " + text::fixed(secs, 1) + " s");
  o.detail = "200 docs, purity " + text::fixed(purity, 3) + ", max row-sum error " + sci(worst) + ", " +
             text::fixed(secs, 2) + " s";
  return o;
}

// --- 11 --------------------------------------------------------------------

Outcome augmentation_invariants() {
  Outcome o;
  const auto lex = LexiconPack::load_dir(kData + "/lexicons");
  const std::vector<std::string> words = {"they", "are", "very", "bad", "John", "is", "lazy", "Paris", "taking", "over",
                                          "the", "new", "somewhat", "strange", "we", "go", "back", "women", "é", "x"};
  const std::vector<Strategy> strategies = {Strategy::eda, Strategy::ne_replace, Strategy::scalar_adverb,
                                            Strategy::adverbial_modifier, Strategy::adj_synonym,
                                            Strategy::domain_expression};
  Rng rng(1111);
  std::size_t variants = 0;
  for (int i = 0; i < 1000; ++i) {
    AugmentationRequest r;
    r.text = random_words(rng, words, 1, 14);
    r.strategy = strategies[rng.below(strategies.size())];
    if (r.strategy == Strategy::eda) r.eda_mode = static_cast<EdaMode>(rng.below(4));
    r.intensity = 0.05 + 0.95 * rng.uniform();
    r.count = 1 + rng.below(5);
    r.seed = rng.next();
    const std::string at = "request " + std::to_string(i);
    const auto a = augment(r, lex);
    const auto b = augment(r, lex);
    o.check(a.variants == b.variants, at + ": same seed, different variants");
    o.check(a.variants.empty() == a.reason.has_value(), at + ": empty result without reason");
    const auto in_tokens = text::whitespace_tokens(r.text);
    for (const auto& v : a.variants) {
      ++variants;
      o.check(!text::trim(v.variant).empty(), at + ": empty variant");
      std::vector<oracle::Edit> edits;
      bool spans_ok = true;
      for (const auto& e : v.edits) {
        spans_ok &= e.end <= r.text.size() && r.text.substr(e.begin, e.end - e.begin) == e.before;
        edits.push_back({e.begin, e.end, e.after});
      }
      const auto replayed = oracle::replay(r.text, edits);
      o.check(spans_ok && replayed && *replayed == v.variant, at + ": edit trace does not replay");
      if (r.strategy == Strategy::eda && *r.eda_mode == EdaMode::swap) {
        auto got = text::whitespace_tokens(v.variant), want = in_tokens;
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        o.check(got == want, at + ": swap changed the token multiset");
      }
    }
  }
  o.detail = "1000 fuzzed requests, " + std::to_string(variants) + " variants checked, " +
             std::to_string(o.violations) + " violations";
  return o;
}

// --- 12 --------------------------------------------------------------------

Outcome index_persistence() {
  Outcome o;
  Rng rng(1212);
  const std::size_t dim = 48;
  std::vector<EvidencePassage> ps;
  for (std::size_t i = 0; i < 800; ++i) {
    ps.push_back({"doc-" + std::to_string(i / 10), i % 10, "paragraph " + std::to_string(i) + " égalité «§»",
                  random_unit(rng, dim), 0.0});
  }
  const auto idx = Index::build(ps);
  const auto path = fs::temp_directory_path() / ("peace_acceptance_" + std::to_string(::getpid()) + ".idx");
  idx.save(path.string());
  const auto back = Index::load(path.string());
  auto dump = [](const Index& ix, const std::vector<SearchHit>& hits) {
    json j = json::array();
    for (const auto& h : hits) j.push_back(ix.passage(h.row, h.score));
    return j.dump();
  };
  for (int q = 0; q < 100; ++q) {
    const auto query = random_unit(rng, dim);
    const std::size_t k = 1 + rng.below(25);
    o.check(dump(idx, idx.search(query, k)) == dump(back, back.search(query, k)), "query " + std::to_string(q));
  }

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  auto rejected = [&](const std::string& corrupt) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << corrupt;
    try {
      Index::load(path.string());
    } catch (const Error& e) {
      return e.code() == Errc::corrupt_index || e.code() == Errc::version_mismatch;
    }
    return false;
  };
  int corruptions = 0;
  for (int t = 0; t < 200; ++t, ++corruptions) {
    auto c = bytes;
    c[rng.below(c.size())] ^= static_cast<char>(1 + rng.below(255));
    o.check(rejected(c), "bit flip " + std::to_string(t) + " accepted");
  }
  for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{24}, bytes.size() / 2, bytes.size() - 1}) {
    o.check(rejected(bytes.substr(0, cut)), "truncation at " + std::to_string(cut) + " accepted");
    ++corruptions;
  }
  o.check(rejected(bytes + "x"), "trailing byte accepted");
  ++corruptions;
  fs::remove(path);
  o.detail = "800 passages, 100 queries byte-identical after save/load; " + std::to_string(corruptions) +
             " corrupted files rejected";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"retrieval-oracle-equivalence", retrieval_oracle},
      {"dedup-contract", dedup_contract},
      {"pipeline-call-counts", call_counts},
      {"end-to-end-determinism", end_to_end_determinism},
      {"metric-closed-forms", metric_closed_forms},
      {"wilcoxon-exact", wilcoxon_exact},
      {"krippendorff-alpha", krippendorff},
      {"table-arithmetic", table_arithmetic},
      {"sampling-protocol", sampling_protocol},
      {"lda-recovery", lda_recovery},
      {"augmentation-invariants", augmentation_invariants},
      {"index-persistence", index_persistence},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.first = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail;
    if (!o.pass) std::cout << " [first failure: " << o.first << "]";
    std::cout << std::endl;
    failed += !o.pass;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
