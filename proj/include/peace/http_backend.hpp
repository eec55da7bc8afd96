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

// HTTP+JSON wire protocol for inference backends (see docs/backend-protocol.md):
// a client transport and a server that exposes any BackendTransport over the
// same routes.

#include <atomic>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include "httplib.h"
#include "peace/gateway.hpp"

namespace peace {

namespace wire {

inline constexpr const char* kChatRoute = "/v1/chat/completions";
inline constexpr const char* kEmbedRoute = "/v1/embeddings";
inline constexpr const char* kClassifyRoute = "/classify";
inline constexpr const char* kNliRoute = "/nli";

inline json chat_request_body(const std::string& model, const ChatRequest& req) {
  json messages = json::array();
  if (!req.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
  json body{{"model", model},
            {"messages", messages},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens},
            {"logprobs", req.want_logprobs}};
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

inline ChatRequest chat_request_from_body(const json& body) {
  ChatRequest req;
  for (const auto& m : body.at("messages")) {
    const auto role = m.at("role").get<std::string>();
    if (role == "system") req.system_prompt = m.at("content").get<std::string>();
    if (role == "user") req.user_prompt = m.at("content").get<std::string>();
  }
  req.temperature = body.value("temperature", 0.7);
  req.max_tokens = body.value("max_tokens", 256);
  req.want_logprobs = body.value("logprobs", false);
  if (body.contains("seed") && !body["seed"].is_null()) req.seed = body["seed"].get<std::uint64_t>();
  return req;
}

inline json chat_response_body(const std::string& model, const ChatResponse& resp, bool with_logprobs) {
  json choice{{"index", 0},
              {"message", {{"role", "assistant"}, {"content", resp.text}}},
              {"finish_reason", to_string(resp.finish_reason)}};
  if (with_logprobs && resp.token_logprobs) {
    json content = json::array();
    for (const auto& t : *resp.token_logprobs) content.push_back({{"token", t.token}, {"logprob", t.logprob}});
    choice["logprobs"] = {{"content", content}};
  } else {
    choice["logprobs"] = nullptr;
  }
  return json{{"object", "chat.completion"}, {"model", model}, {"choices", json::array({choice})}};
}

inline ChatResponse chat_response_from_body(const json& body) {
  const auto& choice = body.at("choices").at(0);
  ChatResponse resp;
  resp.text = choice.at("message").at("content").get<std::string>();
  resp.finish_reason = parse_finish_reason(choice.value("finish_reason", std::string("stop")));
  if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
    std::vector<TokenLogprob> lps;
    for (const auto& t : choice["logprobs"].at("content")) {
      lps.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
    }
    resp.token_logprobs = std::move(lps);
  }
  return resp;
}

inline json error_body(std::string_view code, std::string_view message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace wire

/// Splits "http://host:port/prefix" into {"http://host:port", "/prefix"}.
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  require(scheme_end != std::string::npos, "endpoint must be a URL: " + endpoint);
  const std::string scheme = endpoint.substr(0, scheme_end);
  require(scheme == "http", "unsupported endpoint scheme '" + scheme + "' (plain http only)");
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, path_start), prefix};
}

class HttpBackend : public BackendTransport {
 public:
  explicit HttpBackend(BackendDescriptor descriptor) : d_(std::move(descriptor)) {
    std::tie(base_, prefix_) = split_endpoint(d_.endpoint);
  }

  ChatResponse chat(const ChatRequest& req) override {
    auto body = post(wire::kChatRoute, wire::chat_request_body(d_.model_name, req));
    return parse_or_fail([&] { return wire::chat_response_from_body(body); });
  }

  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    json input = json::array();
    for (const auto& t : texts) input.push_back(t);
    auto body = post(wire::kEmbedRoute, json{{"model", d_.model_name}, {"input", input}});
    return parse_or_fail([&] {
      const auto& data = body.at("data");
      std::vector<Embedding> out(data.size());
      for (const auto& item : data) {
        const auto idx = item.at("index").get<std::size_t>();
        if (idx >= out.size()) throw std::out_of_range("embedding index out of range");
        out[idx] = item.at("embedding").get<Embedding>();
      }
      return out;
    });
  }

  ClassificationResult classify(std::string_view text) override {
    auto body = post(wire::kClassifyRoute, json{{"text", text}});
    return parse_or_fail([&] { return body.get<ClassificationResult>(); });
  }

  NliScores nli(std::string_view premise, std::string_view hypothesis) override {
    auto body = post(wire::kNliRoute, json{{"premise", premise}, {"hypothesis", hypothesis}});
    return parse_or_fail([&] {
      return NliScores{body.at("entailment").get<double>(), body.at("neutral").get<double>(),
                       body.at("contradiction").get<double>()};
    });
  }

 private:
  json post(const char* route, const json& payload) {
    httplib::Client client(base_);
    const auto secs = d_.timeout.count() / 1000;
    const auto usecs = (d_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!d_.api_key_env.empty()) {
      if (const char* key = std::getenv(d_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    auto res = client.Post(prefix_ + route, headers, payload.dump(), "application/json");
    if (!res) {
      fail(Errc::transport, "backend '" + d_.id + "' unreachable: " + httplib::to_string(res.error()), d_.id);
    }
    json body = json::parse(res->body, nullptr, false);
    if (res->status >= 200 && res->status < 300) {
      if (body.is_discarded()) {
        throw BackendError(d_.id, "malformed_response", "response body is not JSON");
      }
      return body;
    }
    // Only a well-formed error payload is a definitive backend answer.
    if (!body.is_discarded() && body.is_object() && body.contains("error") && body["error"].is_object()) {
      const auto& e = body["error"];
      std::string code = e.contains("code") ? (e["code"].is_string() ? e["code"].get<std::string>()
                                                                      : e["code"].dump())
                                            : std::to_string(res->status);
      throw BackendError(d_.id, code, e.value("message", std::string("backend error")));
    }
    fail(Errc::transport, "backend '" + d_.id + "' answered HTTP " + std::to_string(res->status), d_.id);
  }

  template <class F>
  auto parse_or_fail(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(d_.id, "malformed_response", e.what());
    }
  }

  BackendDescriptor d_;
  std::string base_;
  std::string prefix_;
};

/// Serves a BackendTransport over the wire protocol. Used for local mock
/// deployments and to exercise HttpBackend end to end.
class BackendServer {
 public:
  explicit BackendServer(std::shared_ptr<BackendTransport> transport, std::string model_name = "mock")
      : transport_(std::move(transport)), model_(std::move(model_name)) {
    routes();
  }

  ~BackendServer() { stop(); }
  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  // First `n` requests get a bare 503 with a non-JSON body.
  void inject_unavailable(int n) { unavailable_ = n; }

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) fail(Errc::io, "cannot bind backend server on " + host);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void listen_blocking(const std::string& host, int port) { server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t requests() const { return requests_.load(); }

 private:
  template <class F>
  void handle(const httplib::Request& req, httplib::Response& res, F&& f) {
    ++requests_;
    if (unavailable_.load() > 0 && unavailable_.fetch_sub(1) > 0) {
      res.status = 503;
      res.set_content("service unavailable", "text/plain");
      return;
    }
    try {
      json body = json::parse(req.body);
      res.set_content(f(body).dump(), "application/json");
    } catch (const BackendError& e) {
      res.status = 422;
      res.set_content(wire::error_body(e.backend_code(), e.what()).dump(), "application/json");
    } catch (const Error& e) {
      if (e.code() == Errc::transport) {
        res.status = 503;
        res.set_content("service unavailable", "text/plain");
        return;
      }
      res.status = 400;
      res.set_content(wire::error_body(errc_name(e.code()), e.what()).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(wire::error_body("bad_request", e.what()).dump(), "application/json");
    }
  }

  void routes() {
    server_.Post(wire::kChatRoute, [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        auto creq = wire::chat_request_from_body(body);
        auto resp = transport_->chat(creq);
        return wire::chat_response_body(model_, resp, creq.want_logprobs);
      });
    });
    server_.Post(wire::kEmbedRoute, [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        auto input = body.at("input").get<std::vector<std::string>>();
        auto vecs = transport_->embed(input);
        json data = json::array();
        for (std::size_t i = 0; i < vecs.size(); ++i) {
          data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vecs[i]}});
        }
        return json{{"object", "list"}, {"model", model_}, {"data", data}};
      });
    });
    server_.Post(wire::kClassifyRoute, [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        return json(transport_->classify(body.at("text").get<std::string>()));
      });
    });
    server_.Post(wire::kNliRoute, [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&](const json& body) {
        return json(transport_->nli(body.at("premise").get<std::string>(),
                                    body.at("hypothesis").get<std::string>()));
      });
    });
  }

  std::shared_ptr<BackendTransport> transport_;
  std::string model_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<int> unavailable_{0};
  std::atomic<std::size_t> requests_{0};
};

}  // namespace peace
