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

// Rule-based, seeded backend for offline runs and tests. Every response is a
// pure function of (request, seed, configuration), so identical requests give
// byte-identical responses.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "peace/gateway.hpp"
#include "peace/random.hpp"
#include "peace/text.hpp"

namespace peace {

struct MockConfig {
  enum class ChatMode {
    echo,       // reply with the user prompt
    templated,  // reply with a fixed sentence carrying the prompt hash
    fixed,      // reply with fixed_text
  };

  ChatMode chat_mode = ChatMode::templated;
  std::string fixed_text;
  // Replaces the derived per-token logprobs.
  std::optional<std::vector<double>> fixed_logprobs;

  std::size_t embed_dim = 64;
  // Exact-text overrides for the hash embedder; returned raw (unnormalized).
  std::map<std::string, Embedding> stub_vectors;

  std::set<std::string> hate_lexicon = {"vermin", "subhuman", "parasites", "invaders", "scum"};

  // Returned verbatim by nli() when set.
  std::optional<NliScores> fixed_nli;

  // Failure injection.
  int transport_failures = 0;  // first N calls fail with a transport error
  std::optional<std::pair<std::string, std::string>> backend_error;  // {code, message}
  std::chrono::milliseconds latency{0};
};

inline std::string_view to_string(MockConfig::ChatMode m) {
  switch (m) {
    case MockConfig::ChatMode::echo: return "echo";
    case MockConfig::ChatMode::templated: return "template";
    case MockConfig::ChatMode::fixed: return "fixed";
  }
  return "template";
}

class MockBackend : public BackendTransport {
 public:
  explicit MockBackend(MockConfig config = {}, std::string id = "mock")
      : config_(std::move(config)), id_(std::move(id)) {}

  ChatResponse chat(const ChatRequest& req) override {
    Call call(*this);
    {
      std::lock_guard lock(mu_);
      chat_log_.push_back(req);
    }
    ChatResponse resp;
    switch (config_.chat_mode) {
      case MockConfig::ChatMode::echo:
        resp.text = req.user_prompt;
        break;
      case MockConfig::ChatMode::fixed:
        resp.text = config_.fixed_text;
        break;
      case MockConfig::ChatMode::templated:
        resp.text = templated_reply(req);
        break;
    }
    resp.token_logprobs = logprobs_for(resp.text);
    return resp;
  }

  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    Call call(*this);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embedding(t));
    return out;
  }

  ClassificationResult classify(std::string_view text) override {
    Call call(*this);
    for (const auto& tok : text::word_tokens(text)) {
      if (config_.hate_lexicon.count(tok)) return {HateLabel::hateful, 0.99};
    }
    return {HateLabel::non_hateful, 0.99};
  }

  // Token-overlap rule: identical texts entail; disjoint token sets are
  // neutral; otherwise the overlap share of the hypothesis goes to entailment,
  // or to contradiction when exactly one side carries a negation.
  NliScores nli(std::string_view premise, std::string_view hypothesis) override {
    Call call(*this);
    if (config_.fixed_nli) return *config_.fixed_nli;
    if (premise == hypothesis) return {1.0, 0.0, 0.0};
    auto p = text::word_tokens(premise);
    auto h = text::word_tokens(hypothesis);
    std::set<std::string> ps(p.begin(), p.end()), hs(h.begin(), h.end());
    if (hs.empty()) return {0.0, 1.0, 0.0};
    std::size_t shared = 0;
    for (const auto& t : hs) shared += ps.count(t);
    const double overlap = static_cast<double>(shared) / static_cast<double>(hs.size());
    auto negated = [](const std::set<std::string>& s) {
      return s.count("not") || s.count("no") || s.count("never") || s.count("n't");
    };
    if (negated(ps) != negated(hs)) return {0.0, 1.0 - overlap, overlap};
    return {overlap, 1.0 - overlap, 0.0};
  }

  std::size_t calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

  std::vector<ChatRequest> chat_log() const {
    std::lock_guard lock(mu_);
    return chat_log_;
  }
  std::size_t chat_calls() const {
    std::lock_guard lock(mu_);
    return chat_log_.size();
  }
  void reset_counters() {
    std::lock_guard lock(mu_);
    chat_log_.clear();
    calls_ = 0;
    max_in_flight_ = 0;
  }

  const MockConfig& config() const { return config_; }

  static std::string templated_reply(const ChatRequest& req) {
    std::string key = req.system_prompt + '\x1f' + req.user_prompt + '\x1f' +
                      (req.seed ? std::to_string(*req.seed) : std::string("-")) + '\x1f' +
                      text::fixed(req.temperature, 3);
    const auto h = fnv1a64(key.data(), key.size());
    return "This is a deterministic mock response (ref " + text::hex64(h) +
           "): respect and facts matter more than anger.";
  }

  Embedding hash_embedding(const std::string& t) const {
    if (auto it = config_.stub_vectors.find(t); it != config_.stub_vectors.end()) return it->second;
    Embedding v(config_.embed_dim, 0.0);
    auto tokens = text::word_tokens(t);
    if (tokens.empty()) tokens.push_back(t);
    for (const auto& tok : tokens) {
      const auto h = fnv1a64(tok.data(), tok.size());
      const std::size_t slot = static_cast<std::size_t>(h % config_.embed_dim);
      v[slot] += ((h >> 63) & 1U) ? -1.0 : 1.0;
      // A second, weaker slot spreads mass so distinct tokens rarely collide fully.
      const auto h2 = fnv1a64(tok.data(), tok.size(), 0x9e3779b97f4a7c15ULL);
      v[static_cast<std::size_t>(h2 % config_.embed_dim)] += 0.5;
    }
    bool zero = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    if (zero) v[0] = 1.0;
    return v;
  }

 private:
  // Per-call bookkeeping: instrumentation, latency and failure injection.
  class Call {
   public:
    explicit Call(MockBackend& m) : m_(m) {
      const int now = ++m_.in_flight_;
      int prev = m_.max_in_flight_.load();
      while (now > prev && !m_.max_in_flight_.compare_exchange_weak(prev, now)) {
      }
      const auto n = ++m_.calls_;
      if (m_.config_.latency.count() > 0) std::this_thread::sleep_for(m_.config_.latency);
      if (static_cast<long long>(n) <= m_.config_.transport_failures) {
        --m_.in_flight_;
        fail(Errc::transport, "mock '" + m_.id_ + "' injected transport failure", m_.id_);
      }
      if (m_.config_.backend_error) {
        --m_.in_flight_;
        throw BackendError(m_.id_, m_.config_.backend_error->first, m_.config_.backend_error->second);
      }
    }
    ~Call() { --m_.in_flight_; }
    Call(const Call&) = delete;
    Call& operator=(const Call&) = delete;

   private:
    MockBackend& m_;
  };

  std::vector<TokenLogprob> logprobs_for(const std::string& text) const {
    std::vector<TokenLogprob> out;
    const auto tokens = text::whitespace_tokens(text);
    if (config_.fixed_logprobs) {
      const auto& lp = *config_.fixed_logprobs;
      for (std::size_t i = 0; i < lp.size(); ++i) {
        out.push_back({i < tokens.size() ? tokens[i] : std::string("<t") + std::to_string(i) + ">", lp[i]});
      }
      return out;
    }
    for (const auto& tok : tokens) {
      const auto h = fnv1a64(tok.data(), tok.size());
      out.push_back({tok, -(0.05 + static_cast<double>(h % 2000) / 1000.0)});
    }
    return out;
  }

  MockConfig config_;
  std::string id_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  mutable std::mutex mu_;
  std::vector<ChatRequest> chat_log_;
};

/// Builds a mock transport from a `mock://<mode>` endpoint. Modes: template,
/// echo (chat); hash (embed); lexicon (classify); overlap (nli). The optional
/// query string `?dim=N` sets the embedding dimension.
inline std::shared_ptr<MockBackend> mock_from_endpoint(const BackendDescriptor& d) {
  std::string_view ep = d.endpoint;
  constexpr std::string_view scheme = "mock://";
  require(ep.substr(0, scheme.size()) == scheme, "not a mock endpoint: " + d.endpoint);
  ep.remove_prefix(scheme.size());
  std::string_view mode = ep.substr(0, ep.find('?'));
  MockConfig cfg;
  if (auto q = ep.find("dim="); q != std::string_view::npos) {
    cfg.embed_dim = std::stoul(std::string(ep.substr(q + 4)));
    require(cfg.embed_dim > 0, "mock embed dimension must be positive");
  }
  if (mode == "echo") {
    cfg.chat_mode = MockConfig::ChatMode::echo;
  } else if (mode == "template" || mode == "hash" || mode == "lexicon" || mode == "overlap" || mode.empty()) {
    cfg.chat_mode = MockConfig::ChatMode::templated;
  } else {
    fail(Errc::invalid_argument, "unknown mock mode '" + std::string(mode) + "'");
  }
  return std::make_shared<MockBackend>(std::move(cfg), d.id);
}

}  // namespace peace
