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

// Uniform client layer over external inference backends. A backend is
// described by a BackendDescriptor and reached through a BackendTransport
// (in-process mock or HTTP). The Gateway owns admission control, retries,
// capability checks and output post-processing (embedding normalization,
// NLI triple validation), so every transport gets identical guarantees.

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/error.hpp"
#include "peace/text.hpp"

namespace peace {

using json = nlohmann::json;
using Embedding = std::vector<double>;

enum class BackendKind { chat, embed, classify, nli };
enum class Capability { logprobs, batch, seed };

inline std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::chat: return "chat";
    case BackendKind::embed: return "embed";
    case BackendKind::classify: return "classify";
    case BackendKind::nli: return "nli";
  }
  return "chat";
}

inline BackendKind parse_backend_kind(std::string_view s) {
  if (s == "chat") return BackendKind::chat;
  if (s == "embed") return BackendKind::embed;
  if (s == "classify") return BackendKind::classify;
  if (s == "nli") return BackendKind::nli;
  fail(Errc::invalid_argument, "unknown backend kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::logprobs: return "logprobs";
    case Capability::batch: return "batch";
    case Capability::seed: return "seed";
  }
  return "logprobs";
}

inline Capability parse_capability(std::string_view s) {
  if (s == "logprobs") return Capability::logprobs;
  if (s == "batch") return Capability::batch;
  if (s == "seed") return Capability::seed;
  fail(Errc::invalid_argument, "unknown capability '" + std::string(s) + "'");
}

struct RetryPolicy {
  int max_attempts = 1;
  std::chrono::milliseconds backoff{0};
};

struct BackendDescriptor {
  std::string id;
  BackendKind kind = BackendKind::chat;
  std::string endpoint;
  std::string model_name;
  std::set<Capability> capabilities;
  int max_concurrency = 1;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry_policy;
  // Name of the environment variable holding the API key, if any.
  std::string api_key_env;

  bool has(Capability c) const { return capabilities.count(c) != 0; }

  void validate() const {
    require(!id.empty(), "backend id must be non-empty");
    require(max_concurrency >= 1, "backend '" + id + "': max_concurrency must be >= 1");
    require(retry_policy.max_attempts >= 1, "backend '" + id + "': max_attempts must be >= 1");
    require(timeout.count() > 0, "backend '" + id + "': timeout must be positive");
  }
};

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.7;
  int max_tokens = 256;
  bool want_logprobs = false;
  std::optional<std::uint64_t> seed;

  void validate() const {
    require(!user_prompt.empty(), "chat request user_prompt must be non-empty");
    require(temperature >= 0.0 && std::isfinite(temperature), "temperature must be >= 0");
    require(max_tokens > 0, "max_tokens must be positive");
  }
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  bool operator==(const TokenLogprob&) const = default;
};

enum class FinishReason { stop, length, error };

inline std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "stop";
}

inline FinishReason parse_finish_reason(std::string_view s) {
  if (s == "length") return FinishReason::length;
  if (s == "error") return FinishReason::error;
  return FinishReason::stop;
}

struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  FinishReason finish_reason = FinishReason::stop;
};

enum class HateLabel { hateful, non_hateful };

inline std::string_view to_string(HateLabel l) {
  return l == HateLabel::hateful ? "hateful" : "non_hateful";
}

inline HateLabel parse_hate_label(std::string_view s) {
  if (s == "hateful") return HateLabel::hateful;
  if (s == "non_hateful") return HateLabel::non_hateful;
  fail(Errc::invalid_argument, "unknown classification label '" + std::string(s) + "'");
}

struct ClassificationResult {
  HateLabel label = HateLabel::non_hateful;
  double confidence = 0.0;
  bool operator==(const ClassificationResult&) const = default;
};

struct NliScores {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;
  double sum() const { return entailment + neutral + contradiction; }
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const ClassificationResult& c) {
  j = json{{"label", to_string(c.label)}, {"confidence", c.confidence}};
}

inline void from_json(const json& j, ClassificationResult& c) {
  c.label = parse_hate_label(j.at("label").get<std::string>());
  c.confidence = j.at("confidence").get<double>();
}

inline void to_json(json& j, const NliScores& s) {
  j = json{{"entailment", s.entailment}, {"neutral", s.neutral}, {"contradiction", s.contradiction}};
}

inline void to_json(json& j, const BackendDescriptor& d) {
  json caps = json::array();
  for (auto c : d.capabilities) caps.push_back(to_string(c));
  j = json{{"id", d.id},
           {"kind", to_string(d.kind)},
           {"endpoint", d.endpoint},
           {"model_name", d.model_name},
           {"capabilities", caps},
           {"max_concurrency", d.max_concurrency},
           {"timeout_ms", d.timeout.count()},
           {"retry_policy",
            {{"max_attempts", d.retry_policy.max_attempts},
             {"backoff_ms", d.retry_policy.backoff.count()}}}};
  if (!d.api_key_env.empty()) j["api_key_env"] = d.api_key_env;
}

inline BackendDescriptor descriptor_from_json(const json& j) {
  BackendDescriptor d;
  d.id = j.at("id").get<std::string>();
  d.kind = parse_backend_kind(j.at("kind").get<std::string>());
  d.endpoint = j.value("endpoint", std::string{});
  d.model_name = j.value("model_name", std::string{});
  for (const auto& c : j.value("capabilities", json::array())) {
    d.capabilities.insert(parse_capability(c.get<std::string>()));
  }
  d.max_concurrency = j.value("max_concurrency", 1);
  d.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  if (j.contains("retry_policy")) {
    const auto& r = j.at("retry_policy");
    d.retry_policy.max_attempts = r.value("max_attempts", 1);
    d.retry_policy.backoff = std::chrono::milliseconds(r.value("backoff_ms", 0));
  }
  d.api_key_env = j.value("api_key_env", std::string{});
  d.validate();
  return d;
}

/// Parses a registry document: either `{"backends": [...]}` or a bare array.
inline std::vector<BackendDescriptor> parse_registry(const json& doc) {
  const json& list = doc.is_array() ? doc : doc.at("backends");
  std::vector<BackendDescriptor> out;
  std::set<std::string> seen;
  for (const auto& entry : list) {
    auto d = descriptor_from_json(entry);
    require(seen.insert(d.id).second, "duplicate backend id '" + d.id + "' in registry");
    out.push_back(std::move(d));
  }
  return out;
}

/// Loads the registry from `path`, or from $PEACE_BACKENDS when set.
inline std::vector<BackendDescriptor> load_registry(std::string path) {
  if (const char* env = std::getenv("PEACE_BACKENDS"); env && *env) path = env;
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open backend registry '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::parse, "backend registry '" + path + "': " + e.what());
  }
  return parse_registry(doc);
}

// ---------------------------------------------------------------------------
// Transport

/// One concrete connection to a backend. Implementations report transient
/// failures as Errc::transport and well-formed error payloads as BackendError.
/// Post-processing and retries belong to the Gateway, not to transports.
class BackendTransport {
 public:
  virtual ~BackendTransport() = default;

  virtual ChatResponse chat(const ChatRequest&) {
    fail(Errc::capability, "transport does not serve chat");
  }
  virtual std::vector<Embedding> embed(std::span<const std::string>) {
    fail(Errc::capability, "transport does not serve embeddings");
  }
  virtual ClassificationResult classify(std::string_view) {
    fail(Errc::capability, "transport does not serve classification");
  }
  virtual NliScores nli(std::string_view, std::string_view) {
    fail(Errc::capability, "transport does not serve NLI");
  }
};

/// Counting admission gate bounding in-flight requests to one backend.
class Admission {
 public:
  explicit Admission(int capacity) : capacity_(capacity) {}

  class Ticket {
   public:
    explicit Ticket(Admission& a) : owner_(&a) {}
    Ticket(const Ticket&) = delete;
    Ticket& operator=(const Ticket&) = delete;
    ~Ticket() { owner_->release(); }

   private:
    Admission* owner_;
  };

  [[nodiscard]] Ticket acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < capacity_; });
    ++in_flight_;
    return Ticket(*this);
  }

 private:
  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  int capacity_;
  int in_flight_ = 0;
};

/// Scales `v` to unit L2 norm. Zero or non-finite vectors cannot be
/// normalized and are reported as an invariant violation.
inline Embedding l2_normalize(Embedding v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    fail(Errc::invariant, "embedding has zero or non-finite norm");
  }
  for (double& x : v) x /= norm;
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class Gateway {
 public:
  struct Options {
    // Reject NLI triples whose sum is off by more than 1e-3 instead of
    // renormalizing them.
    bool strict_nli = false;
    std::function<void(std::string_view)> log = [](std::string_view msg) {
      std::cerr << "[peace] " << msg << '\n';
    };
  };

  Gateway() = default;
  explicit Gateway(Options options) : options_(std::move(options)) {}

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void add(BackendDescriptor descriptor, std::shared_ptr<BackendTransport> transport) {
    descriptor.validate();
    require(transport != nullptr, "backend '" + descriptor.id + "' has no transport");
    require(!slots_.count(descriptor.id), "duplicate backend id '" + descriptor.id + "'");
    auto slot = std::make_unique<Slot>(std::move(descriptor), std::move(transport));
    std::string id = slot->descriptor.id;
    order_.push_back(id);
    slots_.emplace(std::move(id), std::move(slot));
  }

  bool contains(std::string_view id) const { return slots_.count(std::string(id)) != 0; }

  const BackendDescriptor& descriptor(std::string_view id) const { return slot(id).descriptor; }

  std::vector<BackendDescriptor> descriptors() const {
    std::vector<BackendDescriptor> out;
    for (const auto& id : order_) out.push_back(slots_.at(id)->descriptor);
    return out;
  }

  /// First registered backend of the given kind, in registry order.
  std::optional<std::string> first_of(BackendKind kind) const {
    for (const auto& id : order_) {
      if (slots_.at(id)->descriptor.kind == kind) return id;
    }
    return std::nullopt;
  }

  ChatResponse chat_complete(std::string_view backend_id, const ChatRequest& req) const {
    Slot& s = slot_of_kind(backend_id, BackendKind::chat);
    req.validate();
    if (req.want_logprobs && !s.descriptor.has(Capability::logprobs)) {
      fail(Errc::capability, "backend '" + s.descriptor.id + "' does not report logprobs",
           s.descriptor.id);
    }
    ChatResponse resp = call(s, [&](BackendTransport& t) { return t.chat(req); });
    resp.text = std::string(text::trim_right(resp.text));
    if (req.want_logprobs && !resp.token_logprobs) {
      fail(Errc::capability, "backend '" + s.descriptor.id + "' returned no logprobs",
           s.descriptor.id);
    }
    if (!req.want_logprobs) resp.token_logprobs.reset();
    return resp;
  }

  /// One unit-norm vector per input text, in input order.
  std::vector<Embedding> embed(std::string_view backend_id, std::span<const std::string> texts) const {
    Slot& s = slot_of_kind(backend_id, BackendKind::embed);
    require(!texts.empty(), "embed requires at least one text");
    for (const auto& t : texts) require(!t.empty(), "embed texts must be non-empty");
    std::vector<Embedding> raw;
    if (s.descriptor.has(Capability::batch)) {
      raw = call(s, [&](BackendTransport& t) { return t.embed(texts); });
    } else {
      // one text per request for backends that do not batch
      for (const auto& text : texts) {
        auto one = call(s, [&](BackendTransport& t) { return t.embed(std::span<const std::string>(&text, 1)); });
        if (one.size() != 1) {
          throw BackendError(s.descriptor.id, "count_mismatch", "expected 1 vector, got " + std::to_string(one.size()));
        }
        raw.push_back(std::move(one.front()));
      }
    }
    if (raw.size() != texts.size()) {
      throw BackendError(s.descriptor.id, "count_mismatch",
                         "expected " + std::to_string(texts.size()) + " vectors, got " +
                             std::to_string(raw.size()));
    }
    const std::size_t dim = raw.front().size();
    for (auto& v : raw) {
      if (v.size() != dim || dim == 0) {
        fail(Errc::dimension_mismatch, "backend '" + s.descriptor.id + "' returned ragged vectors",
             s.descriptor.id);
      }
      v = l2_normalize(std::move(v));
    }
    return raw;
  }

  Embedding embed_one(std::string_view backend_id, const std::string& text) const {
    return embed(backend_id, std::span<const std::string>(&text, 1)).front();
  }

  ClassificationResult classify_hate(std::string_view backend_id, std::string_view text) const {
    Slot& s = slot_of_kind(backend_id, BackendKind::classify);
    require(!text::trim(text).empty(), "classify text must be non-empty");
    auto r = call(s, [&](BackendTransport& t) { return t.classify(text); });
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      fail(Errc::invariant, "backend '" + s.descriptor.id + "' returned confidence outside [0,1]",
           s.descriptor.id);
    }
    return r;
  }

  NliScores nli_score(std::string_view backend_id, std::string_view premise,
                      std::string_view hypothesis) const {
    Slot& s = slot_of_kind(backend_id, BackendKind::nli);
    require(!premise.empty() && !hypothesis.empty(), "NLI premise and hypothesis must be non-empty");
    NliScores r = call(s, [&](BackendTransport& t) { return t.nli(premise, hypothesis); });
    for (double p : {r.entailment, r.neutral, r.contradiction}) {
      if (!(p >= 0.0 && p <= 1.0)) {
        fail(Errc::invariant, "backend '" + s.descriptor.id + "' returned NLI probability outside [0,1]",
             s.descriptor.id);
      }
    }
    const double sum = r.sum();
    if (std::abs(sum - 1.0) > 1e-3) {
      if (options_.strict_nli) {
        fail(Errc::invariant, "backend '" + s.descriptor.id + "' NLI triple sums to " + std::to_string(sum),
             s.descriptor.id);
      }
      options_.log("backend '" + s.descriptor.id + "' NLI triple sums to " + std::to_string(sum) +
                   "; renormalizing");
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      if (!(sum > 0.0)) fail(Errc::invariant, "NLI triple sums to zero", s.descriptor.id);
      r.entailment /= sum;
      r.neutral /= sum;
      r.contradiction /= sum;
    }
    return r;
  }

 private:
  struct Slot {
    Slot(BackendDescriptor d, std::shared_ptr<BackendTransport> t)
        : descriptor(std::move(d)), transport(std::move(t)), admission(descriptor.max_concurrency) {}
    BackendDescriptor descriptor;
    std::shared_ptr<BackendTransport> transport;
    Admission admission;
  };

  Slot& slot(std::string_view id) const {
    auto it = slots_.find(std::string(id));
    if (it == slots_.end()) fail(Errc::not_found, "unknown backend '" + std::string(id) + "'", std::string(id));
    return *it->second;
  }

  Slot& slot_of_kind(std::string_view id, BackendKind kind) const {
    Slot& s = slot(id);
    if (s.descriptor.kind != kind) {
      fail(Errc::capability,
           "backend '" + s.descriptor.id + "' is a " + std::string(to_string(s.descriptor.kind)) +
               " backend, not " + std::string(to_string(kind)),
           s.descriptor.id);
    }
    return s;
  }

  // Admission + retry. Only transport failures are retried; every other
  // error, BackendError included, surfaces after the attempt that raised it.
  template <class F>
  auto call(Slot& s, F&& fn) const -> decltype(fn(*s.transport)) {
    const int attempts = s.descriptor.retry_policy.max_attempts;
    auto backoff = s.descriptor.retry_policy.backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        auto ticket = s.admission.acquire();
        return fn(*s.transport);
      } catch (const Error& e) {
        if (e.code() != Errc::transport || attempt >= attempts) throw;
        options_.log("backend '" + s.descriptor.id + "' transport failure (attempt " +
                     std::to_string(attempt) + "/" + std::to_string(attempts) + "): " + e.what());
      }
      if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }

  Options options_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::vector<std::string> order_;
};

}  // namespace peace
