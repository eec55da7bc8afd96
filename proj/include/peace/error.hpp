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

#include <stdexcept>
#include <string>
#include <string_view>

namespace peace {

/// Every failure the library reports carries one of these codes. The service
/// maps them to HTTP statuses and the CLI to exit codes.
enum class Errc {
  invalid_argument,
  not_found,
  transport,
  backend,
  capability,
  dimension_mismatch,
  invariant,
  empty_index,
  empty_document,
  corrupt_index,
  version_mismatch,
  missing_slot,
  unknown_template,
  parse,
  schema,
  insufficient_data,
  degenerate_corpus,
  missing_topic_model,
  no_ngrams,
  not_applicable,
  empty_logprobs,
  all_zero_differences,
  no_variance,
  missing_backend,
  empty_pool,
  io,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::not_found: return "NotFound";
    case Errc::transport: return "TransportError";
    case Errc::backend: return "BackendError";
    case Errc::capability: return "CapabilityError";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::invariant: return "InvariantError";
    case Errc::empty_index: return "EmptyIndex";
    case Errc::empty_document: return "EmptyDocument";
    case Errc::corrupt_index: return "CorruptIndex";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::missing_slot: return "MissingSlot";
    case Errc::unknown_template: return "UnknownTemplate";
    case Errc::parse: return "ParseError";
    case Errc::schema: return "SchemaError";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::degenerate_corpus: return "DegenerateCorpus";
    case Errc::missing_topic_model: return "MissingTopicModel";
    case Errc::no_ngrams: return "NoNgrams";
    case Errc::not_applicable: return "NotApplicable";
    case Errc::empty_logprobs: return "EmptyLogprobs";
    case Errc::all_zero_differences: return "AllZeroDifferences";
    case Errc::no_variance: return "NoVariance";
    case Errc::missing_backend: return "MissingBackend";
    case Errc::empty_pool: return "EmptyPool";
    case Errc::io: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  Errc code() const noexcept { return code_; }

  // Structured payload: slot name for MissingSlot, backend id for backend
  // errors, line number for ParseError.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

/// Non-retryable failure reported by a backend in a well-formed error payload.
class BackendError : public Error {
 public:
  BackendError(std::string backend_id, std::string code, const std::string& message)
      : Error(Errc::backend, backend_id + " [" + code + "] " + message, backend_id),
        backend_code_(std::move(code)) {}

  const std::string& backend_id() const noexcept { return detail(); }
  const std::string& backend_code() const noexcept { return backend_code_; }

 private:
  std::string backend_code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message, std::string detail = {}) {
  throw Error(code, message, std::move(detail));
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(Errc::invalid_argument, message);
}

}  // namespace peace
