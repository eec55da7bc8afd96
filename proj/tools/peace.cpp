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

// peace: command-line front end. JSON on stdout, logs on stderr.
// Exit codes: 0 success, 1 validation/usage/data error, 2 backend or transport error.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "peace/service.hpp"

namespace fs = std::filesystem;
using peace::json;

namespace {

int exit_code(const peace::Error& e) {
  return e.code() == peace::Errc::backend || e.code() == peace::Errc::transport ? 2 : 1;
}

void emit(const json& j) { std::cout << j.dump() << std::endl; }

struct BackendOpts {
  bool mock = false;
  std::string registry;
  std::string data_dir;
};

void add_backend_opts(CLI::App* cmd, BackendOpts& o) {
  cmd->add_flag("--mock", o.mock, "use the in-process mock backends");
  cmd->add_option("--backends", o.registry, "backend registry JSON (default: $PEACE_BACKENDS)");
  cmd->add_option("--data-dir", o.data_dir, "directory holding templates/, lexicons/, schemas/, samples/");
}

fs::path data_dir(const BackendOpts& o) {
  if (!o.data_dir.empty()) return o.data_dir;
  if (const char* env = std::getenv("PEACE_DATA_DIR"); env && *env) return env;
  return PEACE_DATA_DIR;
}

// Generation commands reuse the service handlers without opening a socket.
peace::ServiceConfig base_config(const BackendOpts& o) {
  auto cfg = peace::ServiceConfig::mock_defaults(data_dir(o));
  cfg.corpus_paths.clear();
  cfg.topics.reset();
  // Without --index/--kb/$PEACE_INDEX the shipped sample KB is embedded at startup.
  cfg.apply_env();
  if (!o.registry.empty()) cfg.backend_registry_path = o.registry;
  cfg.mock = o.mock || cfg.backend_registry_path.empty();
  if (cfg.mock && !o.mock) std::cerr << "peace: no backend registry given, using mock backends\n";
  return cfg;
}

std::unique_ptr<peace::Gateway> gateway(const BackendOpts& o) {
  std::string reg = o.registry;
  if (reg.empty()) {
    if (const char* env = std::getenv("PEACE_BACKENDS"); env && *env) reg = env;
  }
  if (o.mock || reg.empty()) {
    if (!o.mock) std::cerr << "peace: no backend registry given, using mock backends\n";
    return peace::make_gateway(peace::default_mock_registry());
  }
  return peace::make_gateway(peace::load_registry(reg));
}

std::string backend_of(const peace::Gateway& gw, std::string id, peace::BackendKind kind) {
  if (id.empty()) id = gw.first_of(kind).value_or("");
  if (id.empty()) peace::fail(peace::Errc::missing_backend, "no " + std::string(peace::to_string(kind)) + " backend configured");
  return id;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peace: hate-speech analysis, counter-speech generation and evaluation"};
  app.require_subcommand(1);

  // index-build
  BackendOpts ib_be;
  std::string ib_kb, ib_out = "kb.idx", ib_embed;
  auto* ib = app.add_subcommand("index-build", "embed a knowledge-base JSONL file into an index");
  ib->add_option("kb", ib_kb, "knowledge-base JSONL (one document per line)")->required();
  ib->add_option("--out,-o", ib_out, "index file to write");
  ib->add_option("--embed", ib_embed, "embed backend id");
  add_backend_opts(ib, ib_be);

  // index-search
  BackendOpts is_be;
  std::string is_query, is_index, is_embed;
  std::size_t is_k = 3;
  auto* is = app.add_subcommand("index-search", "retrieve evidence passages for a message");
  is->add_option("query", is_query, "message text")->required();
  is->add_option("--index", is_index, "index file (default: $PEACE_INDEX or kb.idx)");
  is->add_option("-k", is_k, "passages to return");
  is->add_option("--embed", is_embed, "embed backend id");
  add_backend_opts(is, is_be);

  // analyze / counterspeech / compare
  struct GenOpts {
    BackendOpts be;
    std::string text, model, index, kb, kind = "cs";
    bool no_rag = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
  };
  GenOpts an, cs, cmp;
  auto gen_cmd = [&](const char* name, const char* desc, GenOpts& g, bool with_kind) {
    auto* c = app.add_subcommand(name, desc);
    c->add_option("text", g.text, "message text")->required();
    c->add_option("--model", g.model, "chat backend id");
    c->add_option("--index", g.index, "index file (default: $PEACE_INDEX)");
    c->add_option("--kb", g.kb, "build the index from this KB JSONL at startup");
    c->add_option("--seed", g.seed, "generation seed");
    c->add_option("-k", g.k, "evidence passages");
    if (with_kind) {
      c->add_option("--kind", g.kind, "explanation|exp or counter_speech|cs")->check(
          CLI::IsMember({"explanation", "exp", "counter_speech", "counterspeech", "cs"}));
    } else {
      c->add_flag("--no-rag", g.no_rag, "generate without retrieval");
    }
    add_backend_opts(c, g.be);
    return c;
  };
  auto* an_cmd = gen_cmd("analyze", "classify and explain a message", an, false);
  auto* cs_cmd = gen_cmd("counterspeech", "generate counter-speech", cs, false);
  auto* cmp_cmd = gen_cmd("compare", "same task with and without retrieval", cmp, true);

  // augment
  BackendOpts au_be;
  std::string au_strategy, au_mode, au_direction, au_pivot = "French", au_lexicons, au_model;
  double au_intensity = 0.1;
  std::size_t au_count = 1;
  std::uint64_t au_seed = 0;
  auto* au = app.add_subcommand("augment", "variants for each stdin line, one JSON object per line");
  au->add_option("--strategy", au_strategy, "eda, ne_replace, scalar_adverb, adverbial_modifier, adj_synonym, "
                                            "domain_expression, back_translate")
      ->required();
  au->add_option("--eda-mode", au_mode, "replace, insert, swap, delete (eda only)");
  au->add_option("--intensity", au_intensity, "share of eligible sites to edit");
  au->add_option("--count", au_count, "variants per input");
  au->add_option("--seed", au_seed, "seed");
  au->add_option("--direction", au_direction, "up or down (scalar_adverb)");
  au->add_option("--pivot", au_pivot, "pivot language (back_translate)");
  au->add_option("--lexicons", au_lexicons, "lexicon directory");
  au->add_option("--model", au_model, "chat backend for back_translate");
  add_backend_opts(au, au_be);

  // eval run / eval report
  auto* ev = app.add_subcommand("eval", "evaluation reports");
  ev->require_subcommand(1);
  BackendOpts er_be;
  std::string er_samples, er_ratings, er_out, er_format = "json";
  bool er_no_metrics = false;
  auto* er = ev->add_subcommand("run", "aggregate ratings and compute automatic metrics");
  er->add_option("--samples", er_samples, "GenerationSample JSONL")->required();
  er->add_option("--ratings", er_ratings, "Likert ratings CSV");
  er->add_option("--out", er_out, "also write the JSON result here");
  er->add_flag("--no-metrics", er_no_metrics, "skip backend-computed metrics");
  er->add_option("--format", er_format, "json or text")->check(CLI::IsMember({"json", "text"}));
  add_backend_opts(er, er_be);
  std::string rp_in, rp_format = "text";
  auto* rp = ev->add_subcommand("report", "render a stored report");
  rp->add_option("--in", rp_in, "report JSON written by eval run")->required();
  rp->add_option("--format", rp_format, "text or json")->check(CLI::IsMember({"json", "text"}));

  // serve
  std::string sv_config, sv_host;
  std::optional<int> sv_port;
  bool sv_mock = false;
  std::string sv_data;
  auto* sv = app.add_subcommand("serve", "run the HTTP service");
  sv->add_option("--config", sv_config, "service config JSON (default: $PEACE_CONFIG)");
  sv->add_flag("--mock", sv_mock, "mock backends with the shipped sample data");
  sv->add_option("--host", sv_host, "listen host");
  sv->add_option("--port", sv_port, "listen port (0 picks a free one)");
  sv->add_option("--data-dir", sv_data, "data directory for --mock");

  // mock-backend
  int mb_port = 0;
  std::string mb_mode = "template";
  auto* mb = app.add_subcommand("mock-backend", "serve a mock backend over the HTTP wire protocol");
  mb->add_option("--port", mb_port, "port (0 picks a free one)");
  mb->add_option("--mode", mb_mode, "template, echo, hash, lexicon, overlap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*ib) {
      auto gw = gateway(ib_be);
      const auto embed = backend_of(*gw, ib_embed, peace::BackendKind::embed);
      const auto docs = peace::load_documents_jsonl(ib_kb);
      const auto index = peace::build_index_from_documents(docs, *gw, embed);
      index.save(ib_out);
      emit({{"out", ib_out}, {"documents", docs.size()}, {"passages", index.size()}, {"embed_backend", embed}});
    } else if (*is) {
      std::string path = is_index;
      if (path.empty()) {
        const char* env = std::getenv("PEACE_INDEX");
        path = env && *env ? env : "kb.idx";
      }
      auto gw = gateway(is_be);
      const auto embed = backend_of(*gw, is_embed, peace::BackendKind::embed);
      const auto index = peace::Index::load(path);
      peace::RetrievalConfig rc;
      rc.k = is_k;
      json results = json::array();
      for (const auto& p : peace::retrieve_evidence(index, *gw, embed, is_query, rc)) {
        results.push_back({{"doc_id", p.doc_id}, {"para_index", p.para_index}, {"score", p.score}, {"text", p.text}});
      }
      emit({{"query", is_query}, {"index", path}, {"results", results}});
    } else if (*an_cmd || *cs_cmd || *cmp_cmd) {
      GenOpts& g = *an_cmd ? an : *cs_cmd ? cs : cmp;
      auto cfg = base_config(g.be);
      if (!g.index.empty()) cfg.index_path = g.index;
      if (!g.kb.empty()) {
        cfg.kb_path = g.kb;
        cfg.index_path.clear();
      }
      peace::Service svc(cfg);
      json body = {{"text", g.text}};
      if (!g.model.empty()) body["model"] = g.model;
      if (g.seed) body["seed"] = *g.seed;
      if (g.k) body["k"] = *g.k;
      if (*cmp_cmd) {
        body["kind"] = g.kind;
        emit(svc.compare(body));
      } else {
        body["use_rag"] = !g.no_rag;
        emit(*an_cmd ? svc.analyze(body) : svc.counterspeech(body));
      }
    } else if (*au) {
      std::unique_ptr<peace::Gateway> gw;
      std::string chat;
      if (au_strategy == "back_translate") {
        gw = gateway(au_be);
        chat = backend_of(*gw, au_model, peace::BackendKind::chat);
      }
      const auto lex_dir = au_lexicons.empty() ? (data_dir(au_be) / "lexicons").string() : au_lexicons;
      const auto lex = peace::LexiconPack::load_dir(lex_dir);
      const auto templates = peace::TemplateSet::load_dir(data_dir(au_be) / "templates");
      peace::AugmentContext ctx{gw.get(), chat, &templates};
      std::string line;
      while (std::getline(std::cin, line)) {
        if (peace::text::trim(line).empty()) continue;
        json req = {{"text", line},     {"strategy", au_strategy}, {"intensity", au_intensity},
                    {"count", au_count}, {"seed", au_seed},         {"pivot_language", au_pivot}};
        if (!au_mode.empty()) req["eda_mode"] = au_mode;
        if (!au_direction.empty()) req["direction"] = au_direction;
        json out = peace::augment(peace::augmentation_request_from_json(req), lex, ctx);
        out["text"] = line;
        emit(out);
      }
    } else if (*er) {
      const auto samples = peace::load_samples_jsonl(er_samples);
      std::vector<peace::LikertRating> ratings;
      if (!er_ratings.empty()) ratings = peace::load_ratings_csv(er_ratings);
      std::vector<peace::SampleMetrics> metrics;
      if (!er_no_metrics) {
        auto gw = gateway(er_be);
        peace::EvalBackends b;
        b.embed = backend_of(*gw, "", peace::BackendKind::embed);
        b.nli = backend_of(*gw, "", peace::BackendKind::nli);
        for (const auto& d : gw->descriptors()) {
          if (d.kind == peace::BackendKind::chat && d.has(peace::Capability::logprobs)) {
            b.chat_logprobs = d.id;
            break;
          }
        }
        metrics = peace::evaluate_samples(samples, *gw, b);
      }
      const auto report = peace::aggregate_report(samples, ratings, metrics);
      const json result = {{"report", report}, {"sample_metrics", metrics}, {"text", peace::render_text(report)}};
      if (!er_out.empty()) {
        std::ofstream out(er_out);
        if (!out) peace::fail(peace::Errc::io, "cannot write '" + er_out + "'");
        out << result.dump(2) << "\n";
      }
      if (er_format == "text") std::cout << peace::render_text(report);
      else emit(result);
    } else if (*rp) {
      std::ifstream in(rp_in);
      if (!in) peace::fail(peace::Errc::io, "cannot open '" + rp_in + "'");
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        peace::fail(peace::Errc::parse, rp_in + ": " + e.what());
      }
      const auto report = peace::report_from_json(j.contains("report") ? j["report"] : j);
      if (rp_format == "text") std::cout << peace::render_text(report);
      else emit(report);
    } else if (*sv) {
      peace::ServiceConfig cfg;
      if (sv_mock) {
        BackendOpts o;
        o.data_dir = sv_data;
        cfg = peace::ServiceConfig::mock_defaults(data_dir(o));
        cfg.apply_env();
        cfg.mock = true;
      } else {
        const char* env = std::getenv("PEACE_CONFIG");
        if (sv_config.empty() && !(env && *env)) {
          peace::fail(peace::Errc::invalid_argument, "serve needs --config, $PEACE_CONFIG or --mock");
        }
        cfg = peace::ServiceConfig::load(sv_config);
      }
      if (!sv_host.empty()) cfg.host = sv_host;
      if (sv_port) cfg.port = *sv_port;

      // Route SIGINT/SIGTERM to a waiter thread so the server shuts down cleanly.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);

      peace::Service svc(cfg);
      const int port = svc.bind();
      emit({{"host", cfg.host}, {"port", port}});
      std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        std::cerr << "peace: shutting down\n";
        svc.stop();
      });
      svc.serve();
      // serve() returned without a signal (e.g. bind lost): release the waiter
      pthread_kill(waiter.native_handle(), SIGTERM);
      waiter.join();
    } else if (*mb) {
      peace::BackendDescriptor d;
      d.id = "mock-" + mb_mode;
      d.endpoint = "mock://" + mb_mode;
      auto transport = peace::mock_from_endpoint(d);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      peace::BackendServer server(transport);
      const int port = server.start("127.0.0.1", mb_port);
      emit({{"endpoint", server.endpoint()}, {"port", port}, {"mode", mb_mode}});
      int sig = 0;
      sigwait(&set, &sig);
      server.stop();
    }
  } catch (const peace::Error& e) {
    emit({{"error", peace::errc_name(e.code())}, {"message", e.what()}, {"detail", e.detail()}});
    std::cerr << "peace: " << e.what() << "\n";
    return exit_code(e);
  } catch (const json::exception& e) {
    emit({{"error", "ParseError"}, {"message", e.what()}});
    std::cerr << "peace: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    emit({{"error", "InternalError"}, {"message", e.what()}});
    std::cerr << "peace: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
