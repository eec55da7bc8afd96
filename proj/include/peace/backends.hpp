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

#include <memory>
#include <vector>

#include "peace/gateway.hpp"
#include "peace/http_backend.hpp"
#include "peace/mock_backend.hpp"

namespace peace {

inline std::shared_ptr<BackendTransport> make_transport(const BackendDescriptor& d) {
  if (d.endpoint.rfind("mock://", 0) == 0) return mock_from_endpoint(d);
  return std::make_shared<HttpBackend>(d);
}

inline std::unique_ptr<Gateway> make_gateway(const std::vector<BackendDescriptor>& registry,
                                             Gateway::Options options = {}) {
  auto gw = std::make_unique<Gateway>(std::move(options));
  for (const auto& d : registry) gw->add(d, make_transport(d));
  return gw;
}

/// In-process mock deployment: one backend of every kind.
inline std::vector<BackendDescriptor> default_mock_registry() {
  auto make = [](std::string id, BackendKind kind, std::string endpoint, std::set<Capability> caps) {
    BackendDescriptor d;
    d.id = std::move(id);
    d.kind = kind;
    d.endpoint = std::move(endpoint);
    d.model_name = "mock";
    d.capabilities = std::move(caps);
    d.max_concurrency = 8;
    d.timeout = std::chrono::milliseconds(5000);
    return d;
  };
  return {
      make("mock-chat", BackendKind::chat, "mock://template", {Capability::logprobs, Capability::seed}),
      make("mock-echo", BackendKind::chat, "mock://echo", {Capability::logprobs, Capability::seed}),
      make("mock-embed", BackendKind::embed, "mock://hash?dim=64", {Capability::batch}),
      make("mock-classify", BackendKind::classify, "mock://lexicon", {}),
      make("mock-nli", BackendKind::nli, "mock://overlap", {}),
  };
}

}  // namespace peace
