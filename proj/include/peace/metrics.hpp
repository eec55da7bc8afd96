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

// Automatic generation metrics: Distinct-n, semantic similarity, perplexity,
// faithfulness, NLI rates.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/corpus.hpp"
#include "peace/gateway.hpp"
#include "peace/pipeline.hpp"

namespace peace {

using json = nlohmann::json;

enum class GenMode { rag, no_rag };

inline std::string_view to_string(GenMode m) { return m == GenMode::rag ? "RAG" : "NoRAG"; }

inline GenMode parse_gen_mode(std::string_view s) {
  if (s == "RAG" || s == "rag") return GenMode::rag;
  if (s == "NoRAG" || s == "no_rag" || s == "norag") return GenMode::no_rag;
  fail(Errc::invalid_argument, "unknown generation mode '" + std::string(s) + "'");
}

enum class ImplicitClass { explicit_, implicit };

inline std::string_view to_string(ImplicitClass c) { return c == ImplicitClass::explicit_ ? "explicit" : "implicit"; }

inline ImplicitClass parse_implicit_class(std::string_view s) {
  if (s == "explicit") return ImplicitClass::explicit_;
  if (s == "implicit") return ImplicitClass::implicit;
  fail(Errc::invalid_argument, "implicitness_class must be explicit or implicit, got '" + std::string(s) + "'");
}

struct GenerationSample {
  std::string sample_id;
  Message hs_message;
  std::string output_text;
  TaskKind task = TaskKind::explanation;
  GenMode mode = GenMode::rag;
  ImplicitClass implicitness_class = ImplicitClass::explicit_;
  std::vector<std::string> evidence_texts;  // rank order

  void validate() const {
    require(!sample_id.empty(), "sample_id must be non-empty");
    require(mode == GenMode::rag || evidence_texts.empty(),
            "sample '" + sample_id + "': NoRAG samples carry no evidence");
  }
};

inline std::string default_sample_id(const Message& m, TaskKind task, GenMode mode) {
  return m.id + ":" + std::string(to_string(task)) + ":" + std::string(to_string(mode));
}

inline void to_json(json& j, const GenerationSample& s) {
  j = json{{"sample_id", s.sample_id},
           {"hs_message", s.hs_message},
           {"output_text", s.output_text},
           {"task", to_string(s.task)},
           {"mode", to_string(s.mode)},
           {"implicitness_class", to_string(s.implicitness_class)},
           {"evidence_texts", s.evidence_texts}};
}

inline void from_json(const json& j, GenerationSample& s) {
  s.hs_message = j.at("hs_message").get<Message>();
  s.output_text = j.at("output_text").get<std::string>();
  s.task = parse_task_kind(j.at("task").get<std::string>());
  s.mode = parse_gen_mode(j.at("mode").get<std::string>());
  s.implicitness_class = parse_implicit_class(j.at("implicitness_class").get<std::string>());
  s.evidence_texts = j.value("evidence_texts", std::vector<std::string>{});
  s.sample_id = j.contains("sample_id") ? j["sample_id"].get<std::string>()
                                        : default_sample_id(s.hs_message, s.task, s.mode);
  s.validate();
}

inline std::vector<GenerationSample> load_samples_jsonl(std::istream& in, const std::string& name = "<samples>") {
  std::vector<GenerationSample> out;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (text::trim(line).empty()) continue;
    try {
      auto s = json::parse(line).get<GenerationSample>();
      require(ids.insert(s.sample_id).second, "duplicate sample_id '" + s.sample_id + "'");
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      fail(Errc::parse, name + ":" + std::to_string(ln) + ": " + e.what(), std::to_string(ln));
    } catch (const Error& e) {
      if (e.code() == Errc::parse) throw;
      fail(Errc::parse, name + ":" + std::to_string(ln) + ": " + e.what(), std::to_string(ln));
    }
  }
  return out;
}

inline std::vector<GenerationSample> load_samples_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open samples file '" + path + "'");
  return load_samples_jsonl(in, path);
}

// ---------------------------------------------------------------------------

/// Corpus-level (pooled) unique/total ratio over lowercase whitespace tokens.
inline double distinct_n(const std::vector<std::string>& texts, int n = 3) {
  require(n >= 1, "n must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  for (const auto& t : texts) {
    const auto toks = text::whitespace_tokens(text::lower(t));
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      unique.emplace(toks.begin() + static_cast<std::ptrdiff_t>(i),
                     toks.begin() + static_cast<std::ptrdiff_t>(i) + n);
      ++total;
    }
  }
  if (total == 0) fail(Errc::no_ngrams, "no text has " + std::to_string(n) + " or more tokens");
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

inline double semantic_similarity(const Gateway& gw, std::string_view embed_id, const std::string& a,
                                  const std::string& b) {
  require(!a.empty() && !b.empty(), "semantic_similarity needs two non-empty texts");
  const std::vector<std::string> texts{a, b};
  const auto v = gw.embed(embed_id, texts);
  return dot(v[0], v[1]);
}

inline constexpr std::string_view kScoringSystemPrompt =
    "Repeat the user's text exactly as written. Do not add or change anything.";

inline double perplexity_from_logprobs(std::span<const double> logprobs) {
  if (logprobs.empty()) fail(Errc::empty_logprobs, "no token logprobs to score");
  double sum = 0.0;
  for (double lp : logprobs) {
    require(std::isfinite(lp), "token logprobs must be finite");
    sum += lp;
  }
  return std::exp(-(sum / static_cast<double>(logprobs.size())));
}

/// Backend-relative: the text is scored as the reply to a fixed copy prompt.
inline double perplexity(const Gateway& gw, std::string_view chat_id, const std::string& text) {
  require(!text.empty(), "perplexity needs non-empty text");
  if (!gw.descriptor(chat_id).has(Capability::logprobs)) {
    fail(Errc::capability, "backend '" + std::string(chat_id) + "' does not report logprobs", std::string(chat_id));
  }
  ChatRequest req;
  req.system_prompt = std::string(kScoringSystemPrompt);
  req.user_prompt = text;
  req.temperature = 0.0;
  req.max_tokens = 1024;
  req.want_logprobs = true;
  const auto resp = gw.chat_complete(chat_id, req);
  std::vector<double> lps;
  for (const auto& t : resp.token_logprobs.value_or(std::vector<TokenLogprob>{})) lps.push_back(t.logprob);
  return perplexity_from_logprobs(lps);
}

inline std::string evidence_concat(const GenerationSample& s) { return text::join(s.evidence_texts, "\n\n"); }

inline double faithfulness(const GenerationSample& s, const Gateway& gw, std::string_view embed_id) {
  if (s.mode != GenMode::rag || s.evidence_texts.empty()) {
    fail(Errc::not_applicable, "faithfulness applies to RAG samples with evidence only", s.sample_id);
  }
  return semantic_similarity(gw, embed_id, s.output_text, evidence_concat(s));
}

/// Which side of the hate-entailment pair is the premise.
enum class HatePremise { hs_message, output };

struct NliRates {
  double hate_entail = 0.0;
  std::optional<double> evidence_entail;
  std::optional<double> evidence_contradict;
};

inline void to_json(json& j, const NliRates& r) {
  j = json{{"hate_entail", r.hate_entail},
           {"evidence_entail", r.evidence_entail ? json(*r.evidence_entail) : json(nullptr)},
           {"evidence_contradict", r.evidence_contradict ? json(*r.evidence_contradict) : json(nullptr)}};
}

inline NliScores hate_nli(const GenerationSample& s, const Gateway& gw, std::string_view nli_id, HatePremise dir) {
  return dir == HatePremise::hs_message ? gw.nli_score(nli_id, s.hs_message.text, s.output_text)
                                        : gw.nli_score(nli_id, s.output_text, s.hs_message.text);
}

inline NliScores evidence_nli(const GenerationSample& s, const Gateway& gw, std::string_view nli_id) {
  return gw.nli_score(nli_id, evidence_concat(s), s.output_text);
}

/// Mean probabilities, not thresholded rates. Evidence rows only over RAG
/// samples with evidence; absent when there are none.
inline NliRates nli_rates(const std::vector<GenerationSample>& samples, const Gateway& gw, std::string_view nli_id,
                          HatePremise dir = HatePremise::hs_message) {
  require(!samples.empty(), "nli_rates needs at least one sample");
  NliRates r;
  double ent = 0.0, contr = 0.0;
  std::size_t n_ev = 0;
  for (const auto& s : samples) {
    r.hate_entail += hate_nli(s, gw, nli_id, dir).entailment;
    if (s.mode == GenMode::rag && !s.evidence_texts.empty()) {
      const auto e = evidence_nli(s, gw, nli_id);
      ent += e.entailment;
      contr += e.contradiction;
      ++n_ev;
    }
  }
  r.hate_entail /= static_cast<double>(samples.size());
  if (n_ev) {
    r.evidence_entail = ent / static_cast<double>(n_ev);
    r.evidence_contradict = contr / static_cast<double>(n_ev);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Per-sample battery feeding the report

struct EvalBackends {
  std::string embed;
  std::string nli;
  std::optional<std::string> chat_logprobs;  // perplexity skipped when unset
  HatePremise hate_premise = HatePremise::hs_message;
};

struct SampleMetrics {
  std::string sample_id;
  std::optional<double> sem_sim;
  std::optional<double> faithfulness;
  std::optional<double> perplexity;
  std::optional<double> hate_ent;
  std::optional<double> ev_contr;
  std::optional<double> ev_ent;
};

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline void to_json(json& j, const SampleMetrics& m) {
  j = json{{"sample_id", m.sample_id},         {"sem_sim", opt_json(m.sem_sim)},
           {"faithfulness", opt_json(m.faithfulness)}, {"perplexity", opt_json(m.perplexity)},
           {"hate_ent", opt_json(m.hate_ent)},   {"ev_contr", opt_json(m.ev_contr)},
           {"ev_ent", opt_json(m.ev_ent)}};
}

inline SampleMetrics evaluate_sample(const GenerationSample& s, const Gateway& gw, const EvalBackends& b) {
  SampleMetrics m;
  m.sample_id = s.sample_id;
  m.sem_sim = semantic_similarity(gw, b.embed, s.hs_message.text, s.output_text);
  if (s.mode == GenMode::rag && !s.evidence_texts.empty()) {
    m.faithfulness = faithfulness(s, gw, b.embed);
    const auto e = evidence_nli(s, gw, b.nli);
    m.ev_ent = e.entailment;
    m.ev_contr = e.contradiction;
  }
  if (b.chat_logprobs) m.perplexity = perplexity(gw, *b.chat_logprobs, s.output_text);
  m.hate_ent = hate_nli(s, gw, b.nli, b.hate_premise).entailment;
  return m;
}

inline std::vector<SampleMetrics> evaluate_samples(const std::vector<GenerationSample>& samples, const Gateway& gw,
                                                   const EvalBackends& b) {
  std::vector<SampleMetrics> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(evaluate_sample(s, gw, b));
  return out;
}

}  // namespace peace
