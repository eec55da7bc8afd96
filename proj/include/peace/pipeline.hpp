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

// Detection-explanation and counter-speech flows. With retrieval enabled a
// task runs retrieve -> summarize -> generate (two chat calls on the selected
// backend); without it, a single generate call.

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "peace/gateway.hpp"
#include "peace/index.hpp"
#include "peace/templates.hpp"
#include "peace/text.hpp"

namespace peace {

enum class TaskKind { explanation, counter_speech };

inline std::string_view to_string(TaskKind k) {
  return k == TaskKind::explanation ? "explanation" : "counter_speech";
}

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "explanation" || s == "exp") return TaskKind::explanation;
  if (s == "counter_speech" || s == "counterspeech" || s == "cs") return TaskKind::counter_speech;
  fail(Errc::invalid_argument, "unknown task kind '" + std::string(s) + "'");
}

struct GenerationTask {
  TaskKind kind = TaskKind::counter_speech;
  std::string message;
  bool use_rag = true;
  std::string chat_backend_id;
  std::optional<ClassificationResult> classification;
  RetrievalConfig retrieval_cfg;
  std::optional<std::uint64_t> seed;

  void validate() const {
    require(!text::trim(message).empty(), "message must be non-empty");
    require(!chat_backend_id.empty(), "chat_backend_id must be set");
    require(kind != TaskKind::explanation || classification.has_value(),
            "explanation tasks require a classification");
    retrieval_cfg.validate();
  }
};

struct GenerationPrompts {
  std::optional<std::string> summarize;
  std::string generate;
};

struct GenerationResult {
  GenerationTask task;
  std::string text;
  std::vector<EvidencePassage> evidence;
  std::optional<std::string> evidence_summary;
  GenerationPrompts prompts;
  std::string backend_id;
  std::chrono::microseconds elapsed{0};
  // "empty_retrieval": RAG requested but nothing retrieved, ran without it.
  // "non_deterministic": no seed, or the backend does not honour seeds.
  std::vector<std::string> warnings;
};

/// Error placeholder for one side of a comparison.
struct ErrorMarker {
  std::string error;
  std::string message;
  std::string backend_id;
};

struct ComparisonResult {
  std::optional<ClassificationResult> classification;
  std::optional<GenerationResult> rag;
  std::optional<GenerationResult> no_rag;
  std::optional<ErrorMarker> rag_error;
  std::optional<ErrorMarker> no_rag_error;
};

inline void to_json(json& j, const GenerationTask& t) {
  j = json{{"kind", to_string(t.kind)},
           {"message", t.message},
           {"use_rag", t.use_rag},
           {"chat_backend_id", t.chat_backend_id},
           {"classification", t.classification ? json(*t.classification) : json(nullptr)},
           {"retrieval_cfg", t.retrieval_cfg},
           {"seed", t.seed ? json(*t.seed) : json(nullptr)}};
}

inline void to_json(json& j, const GenerationResult& r) {
  j = json{{"task", r.task},
           {"text", r.text},
           {"evidence", r.evidence},
           {"evidence_summary", r.evidence_summary ? json(*r.evidence_summary) : json(nullptr)},
           {"prompts",
            {{"summarize", r.prompts.summarize ? json(*r.prompts.summarize) : json(nullptr)},
             {"generate", r.prompts.generate}}},
           {"backend_id", r.backend_id},
           {"elapsed_ms", static_cast<double>(r.elapsed.count()) / 1000.0},
           {"warnings", r.warnings}};
}

inline void to_json(json& j, const ErrorMarker& e) {
  j = json{{"error", e.error}, {"message", e.message}, {"backend_id", e.backend_id}};
}

inline void to_json(json& j, const ComparisonResult& c) {
  j = json{{"classification", c.classification ? json(*c.classification) : json(nullptr)},
           {"rag", c.rag ? json(*c.rag) : json(nullptr)},
           {"no_rag", c.no_rag ? json(*c.no_rag) : json(nullptr)}};
  json errors = json::object();
  if (c.rag_error) errors["rag"] = *c.rag_error;
  if (c.no_rag_error) errors["no_rag"] = *c.no_rag_error;
  j["errors"] = errors;
}

inline ErrorMarker to_marker(const Error& e) {
  return {std::string(errc_name(e.code())), e.what(), e.code() == Errc::backend || e.code() == Errc::transport ? e.detail() : std::string{}};
}

struct PipelineConfig {
  std::string embed_backend;
  std::string classify_backend;
  // Empty: summarize on the task's chat backend.
  std::string summarize_backend;
  double temperature = 0.7;
  int max_tokens = 256;
  std::string system_prompt =
      "You help content moderators understand and respond to online hate speech. "
      "Be factual, respectful and concise.";
  // When false, elapsed is reported as zero (snapshot-stable output).
  bool record_timing = true;
};

class RagPipeline {
 public:
  RagPipeline(const Gateway& gateway, const Index* index, TemplateSet templates, PipelineConfig cfg)
      : gateway_(gateway), index_(index), templates_(std::move(templates)), cfg_(std::move(cfg)) {}

  const PipelineConfig& config() const { return cfg_; }
  const Index* index() const { return index_; }

  /// Passages joined in rank order, each prefixed "[doc_id §para_index]".
  std::string summarize_prompt(const std::vector<EvidencePassage>& passages) const {
    require(!passages.empty(), "summarize_evidence requires at least one passage");
    std::string joined;
    for (std::size_t i = 0; i < passages.size(); ++i) {
      if (i) joined += "\n\n";
      joined += "[" + passages[i].doc_id + " §" + std::to_string(passages[i].para_index) + "] " +
                passages[i].text;
    }
    return templates_.render("summarize", {{"passages", joined}});
  }

  std::string summarize_evidence(const std::vector<EvidencePassage>& passages, const std::string& chat_backend,
                                 std::optional<std::uint64_t> seed = std::nullopt) const {
    return chat(summarizer(chat_backend), summarize_prompt(passages), seed);
  }

  GenerationResult generate_explanation(const GenerationTask& task) const {
    require(task.kind == TaskKind::explanation, "generate_explanation needs an explanation task");
    return run(task);
  }

  GenerationResult generate_counterspeech(const GenerationTask& task) const {
    require(task.kind == TaskKind::counter_speech, "generate_counterspeech needs a counter_speech task");
    return run(task);
  }

  GenerationResult run(const GenerationTask& task) const {
    task.validate();
    require(gateway_.contains(task.chat_backend_id), "unknown chat backend '" + task.chat_backend_id + "'");
    const auto start = std::chrono::steady_clock::now();

    GenerationResult result;
    result.task = task;
    result.backend_id = task.chat_backend_id;

    Slots slots{{"message", task.message}};
    if (task.kind == TaskKind::explanation) {
      slots["label"] = std::string(to_string(task.classification->label));
      slots["confidence"] = text::fixed(task.classification->confidence, 2);
    }

    bool grounded = false;
    if (task.use_rag) {
      if (index_ == nullptr) fail(Errc::empty_index, "retrieval requested but no knowledge index is loaded");
      result.evidence = retrieve_evidence(*index_, gateway_, cfg_.embed_backend, task.message, task.retrieval_cfg);
      if (result.evidence.empty()) {
        result.warnings.push_back("empty_retrieval");
      } else {
        result.prompts.summarize = summarize_prompt(result.evidence);
        result.evidence_summary = chat(summarizer(task.chat_backend_id), *result.prompts.summarize, task.seed);
        slots["evidence_summary"] = *result.evidence_summary;
        grounded = true;
      }
    }

    const char* tmpl = task.kind == TaskKind::explanation ? (grounded ? "explanation_rag" : "explanation")
                                                           : (grounded ? "counterspeech_rag" : "counterspeech");
    result.prompts.generate = templates_.render(tmpl, slots);
    result.text = chat(task.chat_backend_id, result.prompts.generate, task.seed);

    if (!task.seed || !gateway_.descriptor(task.chat_backend_id).has(Capability::seed)) {
      result.warnings.push_back("non_deterministic");
    }
    if (cfg_.record_timing) {
      result.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
    }
    return result;
  }

  ClassificationResult classify(const std::string& message) const {
    require(!cfg_.classify_backend.empty(), "no classification backend configured");
    return gateway_.classify_hate(cfg_.classify_backend, message);
  }

  /// Runs the same task with and without retrieval on one backend and seed.
  /// Explanation tasks classify once and share the result. A failing side is
  /// replaced by an ErrorMarker.
  ComparisonResult compare_modes(const std::string& message, TaskKind kind, const std::string& chat_backend_id,
                                 const RetrievalConfig& retrieval_cfg,
                                 std::optional<std::uint64_t> seed = std::nullopt) const {
    require(!text::trim(message).empty(), "message must be non-empty");
    ComparisonResult out;
    GenerationTask task;
    task.kind = kind;
    task.message = message;
    task.chat_backend_id = chat_backend_id;
    task.retrieval_cfg = retrieval_cfg;
    task.seed = seed;
    if (kind == TaskKind::explanation) {
      try {
        out.classification = classify(message);
        task.classification = out.classification;
      } catch (const Error& e) {
        out.rag_error = out.no_rag_error = to_marker(e);
        return out;
      }
    }
    for (bool use_rag : {true, false}) {
      task.use_rag = use_rag;
      try {
        (use_rag ? out.rag : out.no_rag) = run(task);
      } catch (const Error& e) {
        (use_rag ? out.rag_error : out.no_rag_error) = to_marker(e);
      }
    }
    return out;
  }

 private:
  const std::string& summarizer(const std::string& chat_backend) const {
    return cfg_.summarize_backend.empty() ? chat_backend : cfg_.summarize_backend;
  }

  std::string chat(const std::string& backend, const std::string& prompt, std::optional<std::uint64_t> seed) const {
    ChatRequest req;
    req.system_prompt = cfg_.system_prompt;
    req.user_prompt = prompt;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;
    req.seed = seed;
    auto resp = gateway_.chat_complete(backend, req);
    if (text::trim(resp.text).empty()) throw BackendError(backend, "empty_response", "backend returned empty text");
    return resp.text;
  }

  const Gateway& gateway_;
  const Index* index_;
  TemplateSet templates_;
  PipelineConfig cfg_;
};

}  // namespace peace
