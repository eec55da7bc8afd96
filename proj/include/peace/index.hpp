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

// Paragraph-level knowledge base: exact top-k inner-product search over
// unit-norm embeddings, deduplicated evidence selection, binary persistence.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/error.hpp"
#include "peace/gateway.hpp"
#include "peace/random.hpp"
#include "peace/text.hpp"

namespace peace {

enum class KbSource { UN_digital_library, eur_lex, EU_fundamental_rights, other };

inline std::string_view to_string(KbSource s) {
  switch (s) {
    case KbSource::UN_digital_library: return "UN_digital_library";
    case KbSource::eur_lex: return "eur_lex";
    case KbSource::EU_fundamental_rights: return "EU_fundamental_rights";
    case KbSource::other: return "other";
  }
  return "other";
}

inline KbSource parse_kb_source(std::string_view s) {
  if (s == "UN_digital_library") return KbSource::UN_digital_library;
  if (s == "eur_lex") return KbSource::eur_lex;
  if (s == "EU_fundamental_rights") return KbSource::EU_fundamental_rights;
  if (s == "other") return KbSource::other;
  fail(Errc::invalid_argument, "unknown knowledge source '" + std::string(s) + "'");
}

struct KnowledgeDocument {
  std::string doc_id;
  KbSource source = KbSource::other;
  int year = 0;
  std::string title;
  std::string body;
};

struct EvidencePassage {
  std::string doc_id;
  std::size_t para_index = 0;
  std::string text;
  Embedding embedding;
  double score = 0.0;  // inner product with the query; set at retrieval time

  bool operator==(const EvidencePassage&) const = default;
};

inline void to_json(json& j, const EvidencePassage& p) {
  j = json{{"doc_id", p.doc_id},
           {"para_index", p.para_index},
           {"text", p.text},
           {"embedding", p.embedding},
           {"score", p.score}};
}

inline void from_json(const json& j, EvidencePassage& p) {
  p.doc_id = j.at("doc_id").get<std::string>();
  p.para_index = j.at("para_index").get<std::size_t>();
  p.text = j.at("text").get<std::string>();
  p.embedding = j.value("embedding", Embedding{});
  p.score = j.value("score", 0.0);
}

struct RetrievalConfig {
  std::size_t k = 3;
  std::size_t candidate_multiplier = 10;
  bool dedup_text_normalize = true;
  double dedup_sim_threshold = 0.95;

  void validate() const {
    require(k >= 1, "retrieval k must be >= 1");
    require(candidate_multiplier >= 1, "candidate_multiplier must be >= 1");
    require(dedup_sim_threshold > 0.0 && dedup_sim_threshold <= 1.0,
            "dedup_sim_threshold must be in (0, 1]");
  }
};

inline void to_json(json& j, const RetrievalConfig& c) {
  j = json{{"k", c.k},
           {"candidate_multiplier", c.candidate_multiplier},
           {"dedup_text_normalize", c.dedup_text_normalize},
           {"dedup_sim_threshold", c.dedup_sim_threshold}};
}

inline void from_json(const json& j, RetrievalConfig& c) {
  c.k = j.value("k", std::size_t{3});
  c.candidate_multiplier = j.value("candidate_multiplier", std::size_t{10});
  c.dedup_text_normalize = j.value("dedup_text_normalize", true);
  c.dedup_sim_threshold = j.value("dedup_sim_threshold", 0.95);
  c.validate();
}

// ---------------------------------------------------------------------------
// Ingestion

/// Paragraphs split on blank lines, trimmed, empties dropped; indices are
/// 0-based positions after dropping.
inline std::vector<std::pair<std::size_t, std::string>> chunk_document(const KnowledgeDocument& doc) {
  require(!doc.body.empty(), "document '" + doc.doc_id + "' has an empty body");
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string current;
  auto flush = [&] {
    auto t = text::trim(current);
    if (!t.empty()) out.emplace_back(out.size(), std::string(t));
    current.clear();
  };
  for (const auto& line : text::split(doc.body, '\n')) {
    if (text::trim(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
  }
  flush();
  if (out.empty()) fail(Errc::empty_document, "document '" + doc.doc_id + "' has no paragraphs", doc.doc_id);
  return out;
}

inline KnowledgeDocument document_from_json(const json& j) {
  KnowledgeDocument d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.source = parse_kb_source(j.value("source", std::string("other")));
  d.year = j.value("year", 0);
  d.title = j.value("title", std::string{});
  d.body = j.at("body").get<std::string>();
  return d;
}

/// One KnowledgeDocument per line; blank lines skipped; doc ids unique.
inline std::vector<KnowledgeDocument> load_documents_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open '" + path + "'");
  std::vector<KnowledgeDocument> docs;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (text::trim(line).empty()) continue;
    try {
      docs.push_back(document_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(Errc::parse, path + ":" + std::to_string(lineno) + ": " + e.what(), std::to_string(lineno));
    }
    require(ids.insert(docs.back().doc_id).second,
            path + ":" + std::to_string(lineno) + ": duplicate doc_id '" + docs.back().doc_id + "'");
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Index

struct SearchHit {
  std::size_t row = 0;
  double score = 0.0;
  bool operator==(const SearchHit&) const = default;
};

class Index {
 public:
  static constexpr char kMagic[8] = {'P', 'E', 'A', 'C', 'E', 'I', 'D', 'X'};
  static constexpr std::uint32_t kVersion = 1;

  /// Insertion order is preserved and is the tie-break order for search.
  /// Passage scores are ignored.
  static Index build(const std::vector<EvidencePassage>& passages) {
    if (passages.empty()) fail(Errc::empty_index, "cannot build an index without passages");
    Index idx;
    idx.dim_ = passages.front().embedding.size();
    if (idx.dim_ == 0) fail(Errc::dimension_mismatch, "passage embeddings must be non-empty");
    idx.vectors_.reserve(passages.size() * idx.dim_);
    for (std::size_t i = 0; i < passages.size(); ++i) {
      const auto& p = passages[i];
      if (p.embedding.size() != idx.dim_) {
        fail(Errc::dimension_mismatch, "passage " + std::to_string(i) + " has dimension " +
                                           std::to_string(p.embedding.size()) + ", expected " +
                                           std::to_string(idx.dim_));
      }
      require(!text::normalize_for_dedup(p.text).empty(),
              "passage " + std::to_string(i) + " has empty text");
      const double norm = std::sqrt(dot(p.embedding, p.embedding));
      if (std::abs(norm - 1.0) > 1e-6) {
        fail(Errc::invariant, "passage " + std::to_string(i) + " embedding is not unit-norm");
      }
      idx.vectors_.insert(idx.vectors_.end(), p.embedding.begin(), p.embedding.end());
      idx.meta_.push_back({p.doc_id, p.para_index, p.text});
    }
    return idx;
  }

  std::size_t size() const { return meta_.size(); }
  std::size_t dimension() const { return dim_; }

  std::span<const double> vector(std::size_t row) const {
    return std::span<const double>(vectors_).subspan(row * dim_, dim_);
  }

  EvidencePassage passage(std::size_t row, double score = 0.0) const {
    const auto& m = meta_.at(row);
    auto v = vector(row);
    return {m.doc_id, m.para_index, m.text, Embedding(v.begin(), v.end()), score};
  }

  /// Exact top-k by inner product; ties go to the lower insertion index.
  /// Scores are sequential left-to-right dot products.
  std::vector<SearchHit> search(std::span<const double> query, std::size_t k) const {
    require(k >= 1, "search k must be >= 1");
    if (query.size() != dim_) {
      fail(Errc::dimension_mismatch, "query dimension " + std::to_string(query.size()) +
                                         " != index dimension " + std::to_string(dim_));
    }
    for (double x : query) require(std::isfinite(x), "query contains non-finite values");
    const std::size_t n = size();
    std::vector<double> scores(n);
    for (std::size_t r = 0; r < n; ++r) scores[r] = dot(vector(r), query);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    const std::size_t take = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) hits.push_back({order[i], scores[order[i]]});
    return hits;
  }

  // Layout (little-endian): magic[8] u32:version u32:dimension u64:count
  // f64[count*dimension] then per passage {u32 len, doc_id, u64 para_index,
  // u32 len, text}, then u64 FNV-1a of every preceding byte.
  std::string serialize() const {
    std::string out(kMagic, kMagic + 8);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u64(out, meta_.size());
    for (double x : vectors_) put_u64(out, std::bit_cast<std::uint64_t>(x));
    for (const auto& m : meta_) {
      put_str(out, m.doc_id);
      put_u64(out, m.para_index);
      put_str(out, m.text);
    }
    put_u64(out, fnv1a64(out.data(), out.size()));
    return out;
  }

  static Index deserialize(std::string_view bytes) {
    Reader r{bytes};
    if (bytes.size() < 8 + 4 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
      fail(Errc::corrupt_index, "bad magic bytes");
    }
    r.pos = 8;
    const auto version = r.u32();
    if (version != kVersion) {
      fail(Errc::version_mismatch, "index format version " + std::to_string(version) + ", expected " +
                                       std::to_string(kVersion));
    }
    if (bytes.size() < 8 + 4 + 4 + 8 + 8) fail(Errc::corrupt_index, "truncated header");
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 7; i >= 0; --i) stored = (stored << 8) | static_cast<unsigned char>(bytes[body + i]);
    if (stored != fnv1a64(bytes.data(), body)) fail(Errc::corrupt_index, "checksum mismatch");

    r.limit = body;
    Index idx;
    idx.dim_ = r.u32();
    const auto count = r.u64();
    if (idx.dim_ == 0 || count == 0) fail(Errc::corrupt_index, "empty index payload");
    if (count > (r.limit - r.pos) / 8 / idx.dim_) fail(Errc::corrupt_index, "vector block truncated");
    idx.vectors_.resize(count * idx.dim_);
    for (auto& x : idx.vectors_) x = std::bit_cast<double>(r.u64());
    idx.meta_.resize(count);
    for (auto& m : idx.meta_) {
      m.doc_id = r.str();
      m.para_index = r.u64();
      m.text = r.str();
    }
    if (r.pos != r.limit) fail(Errc::corrupt_index, "trailing bytes before checksum");
    return idx;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write index '" + path + "'");
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::io, "short write on '" + path + "'");
  }

  static Index load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io, "cannot open index '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
  }

 private:
  struct Meta {
    std::string doc_id;
    std::size_t para_index;
    std::string text;
  };

  struct Reader {
    std::string_view bytes;
    std::size_t pos = 0;
    std::size_t limit = 0;

    void need(std::size_t n) {
      const std::size_t end = limit ? limit : bytes.size();
      if (pos + n > end || pos + n < pos) fail(Errc::corrupt_index, "truncated index file");
    }
    std::uint64_t le(std::size_t n) {
      need(n);
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{static_cast<unsigned char>(bytes[pos + i])} << (8 * i);
      pos += n;
      return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::string str() {
      const auto n = u32();
      need(n);
      std::string s(bytes.substr(pos, n));
      pos += n;
      return s;
    }
  };

  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  static void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  static void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
  }

  std::size_t dim_ = 0;
  std::vector<double> vectors_;
  std::vector<Meta> meta_;
};

// ---------------------------------------------------------------------------
// Evidence selection

/// Greedy rank-order dedup over a candidate_multiplier*k pool: a candidate is
/// dropped when its (normalized) text equals a kept passage's text, or its
/// inner product with any kept passage reaches dedup_sim_threshold.
inline std::vector<EvidencePassage> select_evidence(const Index& index, std::span<const double> query,
                                                    const RetrievalConfig& cfg) {
  cfg.validate();
  if (index.size() == 0) fail(Errc::empty_index, "index is empty");
  const auto hits = index.search(query, cfg.candidate_multiplier * cfg.k);
  std::vector<EvidencePassage> kept;
  std::vector<std::string> kept_keys;
  for (const auto& hit : hits) {
    if (kept.size() == cfg.k) break;
    auto cand = index.passage(hit.row, hit.score);
    std::string key = cfg.dedup_text_normalize ? text::normalize_for_dedup(cand.text) : cand.text;
    bool duplicate = std::find(kept_keys.begin(), kept_keys.end(), key) != kept_keys.end();
    for (std::size_t i = 0; !duplicate && i < kept.size(); ++i) {
      duplicate = dot(kept[i].embedding, cand.embedding) >= cfg.dedup_sim_threshold;
    }
    if (duplicate) continue;
    kept_keys.push_back(std::move(key));
    kept.push_back(std::move(cand));
  }
  return kept;
}

inline std::vector<EvidencePassage> retrieve_evidence(const Index& index, const Gateway& gateway,
                                                      std::string_view embed_backend,
                                                      const std::string& message,
                                                      const RetrievalConfig& cfg) {
  require(!text::trim(message).empty(), "message must be non-empty");
  cfg.validate();
  if (index.size() == 0) fail(Errc::empty_index, "index is empty");
  const auto query = gateway.embed_one(embed_backend, message);
  return select_evidence(index, query, cfg);
}

/// Chunks and embeds documents in batches, then builds the index.
inline Index build_index_from_documents(const std::vector<KnowledgeDocument>& docs, const Gateway& gateway,
                                        std::string_view embed_backend, std::size_t batch_size = 32) {
  std::vector<EvidencePassage> passages;
  for (const auto& doc : docs) {
    for (auto& [idx, para] : chunk_document(doc)) passages.push_back({doc.doc_id, idx, para, {}, 0.0});
  }
  if (passages.empty()) fail(Errc::empty_index, "no passages to index");
  for (std::size_t b = 0; b < passages.size(); b += batch_size) {
    const std::size_t e = std::min(passages.size(), b + batch_size);
    std::vector<std::string> texts;
    for (std::size_t i = b; i < e; ++i) texts.push_back(passages[i].text);
    auto vecs = gateway.embed(embed_backend, texts);
    for (std::size_t i = b; i < e; ++i) passages[i].embedding = std::move(vecs[i - b]);
  }
  return Index::build(passages);
}

}  // namespace peace
