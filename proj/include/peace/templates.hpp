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

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "peace/error.hpp"

namespace peace {

using Slots = std::map<std::string, std::string>;

namespace detail {

inline bool is_slot_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
inline bool is_slot_char(char c) { return is_slot_start(c) || (c >= '0' && c <= '9'); }

}  // namespace detail

/// Single-pass `{name}` substitution. Slot values are inserted verbatim and
/// never re-scanned; braces that do not enclose an identifier are literal.
inline std::string render_template(std::string_view tmpl, const Slots& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 1 < tmpl.size() && detail::is_slot_start(tmpl[i + 1])) {
      std::size_t j = i + 1;
      while (j < tmpl.size() && detail::is_slot_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}') {
        std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = slots.find(name);
        if (it == slots.end()) fail(Errc::missing_slot, "template slot '" + name + "' has no value", name);
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

/// Named prompt templates. Defaults are compiled in; a template directory
/// overrides any subset by file name (`<id>.txt`).
class TemplateSet {
 public:
  static TemplateSet defaults() {
    TemplateSet t;
    t.templates_ = {
        {"explanation",
         "A hate speech classifier labelled the message below as {label} with confidence {confidence}.\n"
         "Explain in two or three concise sentences why the message is or is not hateful. "
         "Refer to the specific wording and, if relevant, the targeted group.\n\n"
         "Message: {message}"},
        {"explanation_rag",
         "A hate speech classifier labelled the message below as {label} with confidence {confidence}.\n"
         "Using the factual context, explain in two or three concise sentences why the message is or is "
         "not hateful. Ground the explanation in the context and refer to the specific wording.\n\n"
         "Context: {evidence_summary}\n\n"
         "Message: {message}"},
        {"counterspeech",
         "Write a respectful and persuasive reply to the hateful message below, suitable for posting on "
         "social media. Keep it under 60 words, challenge the claim, and avoid insults.\n\n"
         "Message: {message}"},
        {"counterspeech_rag",
         "Write a respectful and persuasive reply to the hateful message below, suitable for posting on "
         "social media. Keep it under 60 words. Use the facts in the evidence summary to challenge the "
         "claim, and avoid insults.\n\n"
         "Evidence summary: {evidence_summary}\n\n"
         "Message: {message}"},
        {"summarize",
         "Summarize the following evidence passages into a concise factual summary of at most four "
         "sentences. Keep only information relevant to human rights and non-discrimination.\n\n"
         "{passages}"},
        {"translate",
         "Translate the following text into {language}. Reply with the translation only.\n\n{text}"},
    };
    return t;
  }

  static TemplateSet load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(Errc::io, "template directory '" + dir.string() + "' not found");
    TemplateSet t = defaults();
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      std::ifstream in(entry.path());
      std::ostringstream ss;
      ss << in.rdbuf();
      std::string body = ss.str();
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
      t.templates_[entry.path().stem().string()] = std::move(body);
    }
    return t;
  }

  bool contains(std::string_view id) const { return templates_.count(std::string(id)) != 0; }

  const std::string& get(std::string_view id) const {
    auto it = templates_.find(std::string(id));
    if (it == templates_.end()) fail(Errc::unknown_template, "unknown template '" + std::string(id) + "'", std::string(id));
    return it->second;
  }

  std::string render(std::string_view id, const Slots& slots) const { return render_template(get(id), slots); }

  void set(std::string id, std::string body) { templates_[std::move(id)] = std::move(body); }

 private:
  std::map<std::string, std::string> templates_;
};

}  // namespace peace
