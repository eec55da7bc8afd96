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

// Adversarial surface-form variants. Every variant is described by a set of
// non-overlapping edits on the original text; applying them reproduces it.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>

#include "peace/gateway.hpp"
#include "peace/random.hpp"
#include "peace/templates.hpp"
#include "peace/text.hpp"

namespace peace {

using json = nlohmann::json;

enum class Strategy { ne_replace, scalar_adverb, adverbial_modifier, adj_synonym, domain_expression, eda, back_translate };
enum class EdaMode { replace, insert, swap, del };
enum class Direction { up, down };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ne_replace: return "ne_replace";
    case Strategy::scalar_adverb: return "scalar_adverb";
    case Strategy::adverbial_modifier: return "adverbial_modifier";
    case Strategy::adj_synonym: return "adj_synonym";
    case Strategy::domain_expression: return "domain_expression";
    case Strategy::eda: return "eda";
    case Strategy::back_translate: return "back_translate";
  }
  return "eda";
}

inline std::string_view to_string(EdaMode m) {
  switch (m) {
    case EdaMode::replace: return "replace";
    case EdaMode::insert: return "insert";
    case EdaMode::swap: return "swap";
    case EdaMode::del: return "delete";
  }
  return "swap";
}

inline Strategy parse_strategy(std::string_view s) {
  for (auto v : {Strategy::ne_replace, Strategy::scalar_adverb, Strategy::adverbial_modifier, Strategy::adj_synonym,
                 Strategy::domain_expression, Strategy::eda, Strategy::back_translate}) {
    if (to_string(v) == s) return v;
  }
  fail(Errc::invalid_argument, "unknown augmentation strategy '" + std::string(s) + "'");
}

inline EdaMode parse_eda_mode(std::string_view s) {
  for (auto v : {EdaMode::replace, EdaMode::insert, EdaMode::swap, EdaMode::del}) {
    if (to_string(v) == s) return v;
  }
  fail(Errc::invalid_argument, "unknown eda mode '" + std::string(s) + "'");
}

inline Direction parse_direction(std::string_view s) {
  if (s == "up") return Direction::up;
  if (s == "down") return Direction::down;
  fail(Errc::invalid_argument, "direction must be 'up' or 'down'");
}

// ---------------------------------------------------------------------------
// Lexicons

struct LexiconPack {
  std::map<std::string, std::vector<std::string>> gazetteer;  // category -> entities
  std::vector<std::string> scalar_adverbs;                    // weakest first
  std::vector<std::string> modifiers;
  std::map<std::string, std::vector<std::string>> adj_synonyms;
  std::map<std::string, std::vector<std::string>> domain_expressions;

  void validate() const {
    auto check_map = [](const auto& m, const char* what) {
      for (const auto& [k, v] : m) {
        require(!k.empty(), std::string(what) + " has an empty key");
        require(!v.empty(), std::string(what) + " entry '" + k + "' has no alternatives");
      }
    };
    check_map(gazetteer, "gazetteer");
    check_map(adj_synonyms, "adj_synonyms");
    check_map(domain_expressions, "domain_expressions");
    std::set<std::string> seen;
    for (const auto& a : scalar_adverbs) {
      require(seen.insert(text::lower(a)).second, "scalar adverb scale repeats '" + a + "'");
    }
  }

  /// Pool for EDA replace/insert: every word listed as a synonym or variant.
  std::vector<std::string> unigram_pool() const {
    std::set<std::string> pool;
    auto add = [&](const std::string& phrase) {
      for (auto& w : text::whitespace_tokens(phrase)) pool.insert(w);
    };
    for (const auto& [k, v] : adj_synonyms) {
      add(k);
      for (const auto& s : v) add(s);
    }
    return {pool.begin(), pool.end()};
  }

  static LexiconPack load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(Errc::io, "lexicon directory '" + dir.string() + "' not found");
    auto read_json = [&](const char* name) {
      std::ifstream in(dir / name);
      if (!in) fail(Errc::io, "missing lexicon file " + (dir / name).string());
      try {
        return json::parse(in).get<std::map<std::string, std::vector<std::string>>>();
      } catch (const json::exception& e) {
        fail(Errc::parse, (dir / name).string() + ": " + e.what());
      }
    };
    auto read_lines = [&](const char* name) {
      std::ifstream in(dir / name);
      if (!in) fail(Errc::io, "missing lexicon file " + (dir / name).string());
      std::vector<std::string> out;
      std::string line;
      while (std::getline(in, line)) {
        auto t = text::trim(line);
        if (!t.empty() && t[0] != '#') out.emplace_back(t);
      }
      return out;
    };
    LexiconPack p;
    p.gazetteer = read_json("gazetteer.json");
    p.scalar_adverbs = read_lines("scalar_adverbs.txt");
    p.modifiers = read_lines("modifiers.txt");
    p.adj_synonyms = read_json("adj_synonyms.json");
    p.domain_expressions = read_json("domain_expressions.json");
    p.validate();
    return p;
  }
};

// ---------------------------------------------------------------------------
// Requests and results

struct AugmentationRequest {
  std::string text;
  Strategy strategy = Strategy::eda;
  std::optional<EdaMode> eda_mode;
  double intensity = 0.1;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  // scalar_adverb only; unset draws a direction per variant.
  std::optional<Direction> direction;
  std::string pivot_language = "French";

  void validate() const {
    require(!text::trim(text).empty(), "text must be non-empty");
    require(intensity > 0.0 && intensity <= 1.0, "intensity must be in (0, 1]");
    require(count >= 1, "count must be >= 1");
    require(eda_mode.has_value() == (strategy == Strategy::eda), "eda_mode must be set iff strategy is eda");
    require(!pivot_language.empty(), "pivot_language must be non-empty");
  }
};

inline AugmentationRequest augmentation_request_from_json(const json& j) {
  AugmentationRequest r;
  r.text = j.at("text").get<std::string>();
  r.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("eda_mode") && !j["eda_mode"].is_null()) r.eda_mode = parse_eda_mode(j["eda_mode"].get<std::string>());
  r.intensity = j.value("intensity", 0.1);
  r.count = j.value("count", std::size_t{1});
  r.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("direction") && !j["direction"].is_null()) r.direction = parse_direction(j["direction"].get<std::string>());
  r.pivot_language = j.value("pivot_language", std::string("French"));
  r.validate();
  return r;
}

struct TextEdit {
  std::size_t begin = 0, end = 0;  // byte span in the original text
  std::string before, after;
  bool operator==(const TextEdit&) const = default;
};

struct Variant {
  std::string variant;
  std::vector<TextEdit> edits;
  std::optional<std::string> pivot_text;
  bool operator==(const Variant&) const = default;
};

struct AugmentResult {
  std::vector<Variant> variants;
  std::optional<std::string> reason;  // "NoEligibleSite" | "NoDistinctVariant"
};

inline void to_json(json& j, const TextEdit& e) {
  j = json{{"span", {e.begin, e.end}}, {"before", e.before}, {"after", e.after}};
}

inline void to_json(json& j, const Variant& v) {
  j = json{{"variant", v.variant}, {"edits", v.edits}};
  if (v.pivot_text) j["pivot_text"] = *v.pivot_text;
}

inline void to_json(json& j, const AugmentResult& r) {
  j = json{{"variants", r.variants}, {"reason", r.reason ? json(*r.reason) : json(nullptr)}};
}

/// Applies edits (sorted, non-overlapping) to the original text.
inline std::string apply_edits(std::string_view original, std::vector<TextEdit> edits) {
  std::sort(edits.begin(), edits.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t pos = 0;
  for (const auto& e : edits) {
    if (e.begin < pos || e.end < e.begin || e.end > original.size()) {
      fail(Errc::invariant, "overlapping or out-of-range edit");
    }
    out.append(original.substr(pos, e.begin - pos));
    out += e.after;
    pos = e.end;
  }
  out.append(original.substr(pos));
  return out;
}

inline std::size_t edit_budget(double intensity, std::size_t sites) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(intensity * static_cast<double>(sites))));
}

namespace detail {

inline std::string upper(std::string_view s) {
  auto u = text::to_unicode(s);
  u.toUpper(icu::Locale::getRoot());
  return text::to_utf8(u);
}

/// Carries the capitalization pattern of `original` over to `replacement`.
inline std::string match_case(std::string_view original, const std::string& replacement) {
  auto u = text::to_unicode(original);
  if (u.isEmpty() || replacement.empty()) return replacement;
  if (text::lower(original) == original) return replacement;
  if (u.length() > 1 && upper(original) == original) return upper(replacement);
  if (u_isupper(u.char32At(0))) {
    auto r = text::to_unicode(replacement);
    int32_t first_len = U16_LENGTH(r.char32At(0));
    auto head = r.tempSubString(0, first_len);
    head.toUpper(icu::Locale::getRoot());
    return text::to_utf8(head + r.tempSubString(first_len));
  }
  return replacement;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

inline bool at_word_boundary(const std::vector<text::Span>& words, std::size_t b, std::size_t e) {
  bool start = false, end = false;
  for (const auto& w : words) {
    start = start || w.begin == b;
    end = end || w.end == e;
  }
  return start && end;
}

/// Case-insensitive, word-aligned, non-overlapping phrase occurrences;
/// longer phrases win when two start at the same place.
inline std::vector<std::pair<text::Span, std::string>> find_phrases(std::string_view s, const std::vector<std::string>& phrases) {
  const auto words = text::word_spans(s);
  const std::string low = text::lower(s);
  std::vector<std::pair<text::Span, std::string>> hits;
  // lowercasing can change byte lengths outside ASCII; fall back to exact match then
  const bool same_len = low.size() == s.size();
  for (const auto& p : phrases) {
    const std::string needle = same_len ? text::lower(p) : p;
    const std::string& hay = same_len ? low : std::string(s);
    for (std::size_t pos = hay.find(needle); pos != std::string::npos && !needle.empty(); pos = hay.find(needle, pos + 1)) {
      if (at_word_boundary(words, pos, pos + needle.size())) hits.push_back({{pos, pos + needle.size()}, p});
    }
  }
  std::sort(hits.begin(), hits.end(), [](auto& a, auto& b) {
    return a.first.begin != b.first.begin ? a.first.begin < b.first.begin : a.first.size() > b.first.size();
  });
  std::vector<std::pair<text::Span, std::string>> out;
  std::size_t last_end = 0;
  for (auto& h : hits) {
    if (!out.empty() && h.first.begin < last_end) continue;
    last_end = h.first.end;
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// EDA

/// A concrete draw of EDA operations over n tokens.
struct EdaPlan {
  EdaMode mode = EdaMode::swap;
  std::vector<std::size_t> order;                           // swap: token order
  std::set<std::size_t> deleted;                            // delete
  std::map<std::size_t, std::vector<std::string>> inserts;  // insert: gap -> words
  std::map<std::size_t, std::string> replaced;              // replace
};

inline EdaPlan plan_eda(std::size_t n_tokens, EdaMode mode, std::size_t n_edits, Rng& rng,
                        const std::vector<std::string>& pool) {
  EdaPlan plan;
  plan.mode = mode;
  if ((mode == EdaMode::replace || mode == EdaMode::insert) && pool.empty() && n_edits > 0) {
    fail(Errc::empty_pool, std::string("eda ") + std::string(to_string(mode)) + " needs a non-empty unigram pool");
  }
  switch (mode) {
    case EdaMode::swap:
      plan.order.resize(n_tokens);
      for (std::size_t i = 0; i < n_tokens; ++i) plan.order[i] = i;
      if (n_tokens >= 2) {
        for (std::size_t e = 0; e < n_edits; ++e) {
          auto i = static_cast<std::size_t>(rng.below(n_tokens));
          auto j = static_cast<std::size_t>(rng.below(n_tokens - 1));
          if (j >= i) ++j;
          std::swap(plan.order[i], plan.order[j]);
        }
      }
      break;
    case EdaMode::del:
      if (n_tokens >= 2) {
        for (auto i : rng.sample_indices(n_tokens, std::min(n_edits, n_tokens - 1))) plan.deleted.insert(i);
      }
      break;
    case EdaMode::insert:
      for (std::size_t e = 0; e < n_edits; ++e) {
        auto gap = static_cast<std::size_t>(rng.below(n_tokens + 1));
        plan.inserts[gap].push_back(detail::pick(rng, pool));
      }
      break;
    case EdaMode::replace:
      for (auto i : rng.sample_indices(n_tokens, std::min(n_edits, n_tokens))) {
        plan.replaced[i] = detail::pick(rng, pool);
      }
      break;
  }
  return plan;
}

inline std::vector<std::string> apply_plan(const std::vector<std::string>& tokens, const EdaPlan& plan) {
  std::vector<std::string> out;
  switch (plan.mode) {
    case EdaMode::swap:
      for (auto i : plan.order) out.push_back(tokens[i]);
      break;
    case EdaMode::del:
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (!plan.deleted.count(i)) out.push_back(tokens[i]);
      break;
    case EdaMode::insert:
      for (std::size_t g = 0; g <= tokens.size(); ++g) {
        if (auto it = plan.inserts.find(g); it != plan.inserts.end()) out.insert(out.end(), it->second.begin(), it->second.end());
        if (g < tokens.size()) out.push_back(tokens[g]);
      }
      break;
    case EdaMode::replace:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto it = plan.replaced.find(i);
        out.push_back(it == plan.replaced.end() ? tokens[i] : it->second);
      }
      break;
  }
  return out;
}

/// Token-level EDA: swap keeps the multiset, delete never empties the list,
/// insert and replace draw from `pool`.
inline std::vector<std::string> eda_op(const std::vector<std::string>& tokens, EdaMode mode, std::size_t n_edits,
                                       std::uint64_t seed, const std::vector<std::string>& pool) {
  require(!tokens.empty(), "eda_op needs at least one token");
  Rng rng(seed);
  return apply_plan(tokens, plan_eda(tokens.size(), mode, n_edits, rng, pool));
}

/// Expresses a plan as edits on the original text. Deleted runs take the
/// whitespace after them, or before them when the run ends the text.
inline std::vector<TextEdit> plan_edits(std::string_view s, const std::vector<text::Span>& spans, const EdaPlan& plan) {
  std::vector<TextEdit> edits;
  const std::size_t n = spans.size();
  auto tok = [&](std::size_t i) { return std::string(spans[i].of(s)); };
  auto add = [&](std::size_t b, std::size_t e, std::string after) {
    edits.push_back({b, e, std::string(s.substr(b, e - b)), std::move(after)});
  };
  switch (plan.mode) {
    case EdaMode::swap:
      for (std::size_t i = 0; i < n; ++i)
        if (plan.order[i] != i && tok(plan.order[i]) != tok(i)) add(spans[i].begin, spans[i].end, tok(plan.order[i]));
      break;
    case EdaMode::replace:
      for (const auto& [i, w] : plan.replaced)
        if (w != tok(i)) add(spans[i].begin, spans[i].end, w);
      break;
    case EdaMode::insert:
      for (const auto& [g, words] : plan.inserts) {
        std::string joined = text::join(words, " ");
        if (g < n) add(spans[g].begin, spans[g].begin, joined + " ");
        else add(spans[n - 1].end, spans[n - 1].end, " " + joined);
      }
      break;
    case EdaMode::del:
      for (std::size_t i = 0; i < n;) {
        if (!plan.deleted.count(i)) {
          ++i;
          continue;
        }
        std::size_t r = i;
        while (r + 1 < n && plan.deleted.count(r + 1)) ++r;
        if (r + 1 < n) add(spans[i].begin, spans[r + 1].begin, "");
        else add(spans[i - 1].end, spans[r].end, "");  // i > 0: never all deleted
        i = r + 1;
      }
      break;
  }
  return edits;
}

// ---------------------------------------------------------------------------
// Lexical strategies: each yields candidate sites and a replacement drawer.

namespace detail {

struct Site {
  text::Span span;
  std::vector<std::string> options;  // replacement texts (already cased/spaced)
};

inline std::vector<Site> ne_sites(std::string_view s, const LexiconPack& lex) {
  std::vector<std::string> all;
  std::map<std::string, std::string> category_of;
  for (const auto& [cat, ents] : lex.gazetteer) {
    for (const auto& e : ents) {
      all.push_back(e);
      category_of.emplace(text::lower(e), cat);
    }
  }
  std::vector<Site> out;
  for (auto& [span, phrase] : find_phrases(s, all)) {
    const auto found = span.of(s);
    std::vector<std::string> opts;
    for (const auto& e : lex.gazetteer.at(category_of.at(text::lower(phrase)))) {
      if (text::lower(e) != text::lower(found)) opts.push_back(e);
    }
    if (!opts.empty()) out.push_back({span, std::move(opts)});
  }
  return out;
}

inline std::vector<Site> scalar_sites(std::string_view s, const LexiconPack& lex, Direction dir) {
  std::vector<Site> out;
  for (const auto& w : text::word_spans(s)) {
    const auto low = text::lower(w.of(s));
    for (std::size_t i = 0; i < lex.scalar_adverbs.size(); ++i) {
      if (text::lower(lex.scalar_adverbs[i]) != low) continue;
      std::optional<std::size_t> j;
      if (dir == Direction::up && i + 1 < lex.scalar_adverbs.size()) j = i + 1;
      if (dir == Direction::down && i > 0) j = i - 1;
      if (j) out.push_back({w, {match_case(w.of(s), lex.scalar_adverbs[*j])}});
    }
  }
  return out;
}

inline bool is_copula(const std::string& w) {
  static const std::set<std::string> v = {"is", "are", "was", "were", "am", "be", "been", "being", "'re", "’re", "'s", "’s"};
  return v.count(w) != 0;
}

inline bool is_pronoun(const std::string& w) {
  static const std::set<std::string> v = {"i", "you", "he", "she", "it", "we", "they"};
  return v.count(w) != 0;
}

/// Zero-width sites before the word that follows a copula or a subject
/// pronoun (predicate adjective or main verb, heuristically).
inline std::vector<Site> modifier_sites(std::string_view s, const LexiconPack& lex) {
  std::vector<Site> out;
  if (lex.modifiers.empty()) return out;
  const auto words = text::word_spans(s);
  std::set<std::string> mods;
  for (const auto& m : lex.modifiers) mods.insert(text::lower(m));
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    const auto w = text::lower(words[i].of(s));
    const auto next = text::lower(words[i + 1].of(s));
    if (!(is_copula(w) || is_pronoun(w)) || mods.count(next) || is_copula(next)) continue;
    // only within the same clause: the gap must be plain whitespace
    auto gap = s.substr(words[i].end, words[i + 1].begin - words[i].end);
    if (!text::trim(gap).empty() || gap.empty()) continue;
    std::vector<std::string> opts;
    for (const auto& m : lex.modifiers) opts.push_back(m + " ");
    out.push_back({{words[i + 1].begin, words[i + 1].begin}, std::move(opts)});
  }
  return out;
}

inline std::vector<Site> synonym_sites(std::string_view s, const LexiconPack& lex) {
  std::vector<Site> out;
  for (const auto& w : text::word_spans(s)) {
    auto it = lex.adj_synonyms.find(text::lower(w.of(s)));
    if (it == lex.adj_synonyms.end()) continue;
    std::vector<std::string> opts;
    for (const auto& syn : it->second) opts.push_back(match_case(w.of(s), syn));
    out.push_back({w, std::move(opts)});
  }
  return out;
}

inline std::vector<Site> domain_sites(std::string_view s, const LexiconPack& lex) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : lex.domain_expressions) keys.push_back(k);
  std::vector<Site> out;
  for (auto& [span, phrase] : find_phrases(s, keys)) {
    std::vector<std::string> opts;
    for (const auto& v : lex.domain_expressions.at(phrase)) opts.push_back(match_case(span.of(s), v));
    out.push_back({span, std::move(opts)});
  }
  return out;
}

inline Variant variant_from_sites(std::string_view s, const std::vector<Site>& sites, std::size_t n_edits, Rng& rng) {
  Variant v;
  for (auto i : rng.sample_indices(sites.size(), std::min(n_edits, sites.size()))) {
    const auto& site = sites[i];
    v.edits.push_back({site.span.begin, site.span.end, std::string(site.span.of(s)), pick(rng, site.options)});
  }
  std::sort(v.edits.begin(), v.edits.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
  v.variant = apply_edits(s, v.edits);
  return v;
}

}  // namespace detail

/// Every scale adverb moved one step in `dir`; nullopt when none can move.
inline std::optional<Variant> scalar_adverb_shift(std::string_view s, const LexiconPack& lex, Direction dir) {
  auto sites = detail::scalar_sites(s, lex, dir);
  if (sites.empty()) return std::nullopt;
  Variant v;
  for (const auto& site : sites) v.edits.push_back({site.span.begin, site.span.end, std::string(site.span.of(s)), site.options[0]});
  v.variant = apply_edits(s, v.edits);
  return v;
}

/// Two chat calls: into the pivot language and back to English.
inline Variant back_translate(const std::string& s, const std::string& pivot, const Gateway& gateway,
                              const std::string& chat_backend, const TemplateSet& templates,
                              std::optional<std::uint64_t> seed) {
  auto call = [&](const std::string& prompt) {
    ChatRequest req;
    req.user_prompt = prompt;
    req.temperature = 0.7;
    req.seed = seed;
    auto r = gateway.chat_complete(chat_backend, req);
    if (text::trim(r.text).empty()) throw BackendError(chat_backend, "empty_response", "backend returned empty text");
    return r.text;
  };
  Variant v;
  v.pivot_text = call(templates.render("translate", {{"language", pivot}, {"text", s}}));
  v.variant = call(templates.render("translate", {{"language", "English"}, {"text", *v.pivot_text}}));
  v.edits.push_back({0, s.size(), s, v.variant});
  return v;
}

struct AugmentContext {
  const Gateway* gateway = nullptr;
  std::string chat_backend;
  const TemplateSet* templates = nullptr;
};

/// Up to `count` distinct variants, each different from the input. The
/// variant stream is a pure function of the request for every strategy but
/// back_translate.
inline AugmentResult augment(const AugmentationRequest& req, const LexiconPack& lex, const AugmentContext& ctx = {}) {
  req.validate();
  AugmentResult out;
  std::set<std::string> seen{req.text};
  auto accept = [&](Variant v) {
    if (seen.insert(v.variant).second) out.variants.push_back(std::move(v));
  };
  const std::size_t attempts = req.count * 10;
  Rng rng(req.seed);

  if (req.strategy == Strategy::back_translate) {
    if (ctx.gateway == nullptr || ctx.chat_backend.empty()) {
      fail(Errc::missing_backend, "back_translate requires a chat backend");
    }
    const TemplateSet defaults = TemplateSet::defaults();
    const TemplateSet& tmpl = ctx.templates ? *ctx.templates : defaults;
    for (std::size_t i = 0; i < req.count; ++i) {
      accept(back_translate(req.text, req.pivot_language, *ctx.gateway, ctx.chat_backend, tmpl, req.seed + i));
    }
    if (out.variants.empty()) out.reason = "NoDistinctVariant";
    return out;
  }

  if (req.strategy == Strategy::eda) {
    const auto spans = text::whitespace_spans(req.text);
    std::vector<std::string> tokens;
    for (const auto& sp : spans) tokens.emplace_back(sp.of(req.text));
    const auto mode = *req.eda_mode;
    const bool eligible = !((mode == EdaMode::swap || mode == EdaMode::del) && tokens.size() < 2);
    if (!eligible) {
      out.reason = "NoEligibleSite";
      return out;
    }
    const auto pool = lex.unigram_pool();
    const std::size_t n = edit_budget(req.intensity, tokens.size());
    for (std::size_t a = 0; a < attempts && out.variants.size() < req.count; ++a) {
      auto plan = plan_eda(tokens.size(), mode, n, rng, pool);
      Variant v;
      v.edits = plan_edits(req.text, spans, plan);
      v.variant = apply_edits(req.text, v.edits);
      accept(std::move(v));
    }
    if (out.variants.empty()) out.reason = "NoDistinctVariant";
    return out;
  }

  bool any_site = false;
  for (std::size_t a = 0; a < attempts && out.variants.size() < req.count; ++a) {
    std::vector<detail::Site> sites;
    switch (req.strategy) {
      case Strategy::ne_replace: sites = detail::ne_sites(req.text, lex); break;
      case Strategy::scalar_adverb: {
        auto dir = req.direction ? *req.direction : (rng.below(2) ? Direction::up : Direction::down);
        sites = detail::scalar_sites(req.text, lex, dir);
        if (sites.empty() && !req.direction) {
          sites = detail::scalar_sites(req.text, lex, dir == Direction::up ? Direction::down : Direction::up);
        }
        break;
      }
      case Strategy::adverbial_modifier: sites = detail::modifier_sites(req.text, lex); break;
      case Strategy::adj_synonym: sites = detail::synonym_sites(req.text, lex); break;
      case Strategy::domain_expression: sites = detail::domain_sites(req.text, lex); break;
      default: break;
    }
    if (sites.empty()) break;
    any_site = true;
    accept(detail::variant_from_sites(req.text, sites, edit_budget(req.intensity, sites.size()), rng));
  }
  if (!any_site) out.reason = "NoEligibleSite";
  else if (out.variants.empty()) out.reason = "NoDistinctVariant";
  return out;
}

}  // namespace peace
