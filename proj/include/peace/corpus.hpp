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

// HS and CS corpus records, schema-mapped ingestion with label sanitization,
// filtering and the evaluation sampling protocol.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/error.hpp"
#include "peace/random.hpp"
#include "peace/text.hpp"

namespace peace {

using json = nlohmann::json;

enum class Implicitness { explicit_, implicit, subtle, none };
enum class Dataset { IHC, ISHate, TOXIGEN, DYNA, SBIC, other };
enum class Split { train, dev, test };
enum class CsSource { expert, user, rag, no_rag };

inline std::string_view to_string(Implicitness v) {
  switch (v) {
    case Implicitness::explicit_: return "explicit";
    case Implicitness::implicit: return "implicit";
    case Implicitness::subtle: return "subtle";
    case Implicitness::none: return "none";
  }
  return "none";
}

inline std::string_view to_string(Dataset v) {
  switch (v) {
    case Dataset::IHC: return "IHC";
    case Dataset::ISHate: return "ISHate";
    case Dataset::TOXIGEN: return "TOXIGEN";
    case Dataset::DYNA: return "DYNA";
    case Dataset::SBIC: return "SBIC";
    case Dataset::other: return "other";
  }
  return "other";
}

inline std::string_view to_string(Split v) {
  switch (v) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

inline std::string_view to_string(CsSource v) {
  switch (v) {
    case CsSource::expert: return "expert";
    case CsSource::user: return "user";
    case CsSource::rag: return "RAG";
    case CsSource::no_rag: return "No-RAG";
  }
  return "expert";
}

namespace detail {

template <class E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const std::array<E, N>& values) {
  const auto key = text::lower(text::trim(s));
  for (E v : values) {
    if (text::lower(to_string(v)) == key) return v;
  }
  return std::nullopt;
}

template <class E>
E parse_or_throw(std::optional<E> v, std::string_view what, std::string_view s) {
  if (!v) fail(Errc::invalid_argument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
  return *v;
}

}  // namespace detail

inline std::optional<Implicitness> try_parse_implicitness(std::string_view s) {
  return detail::parse_enum(s, std::array{Implicitness::explicit_, Implicitness::implicit, Implicitness::subtle,
                                          Implicitness::none});
}
inline std::optional<Dataset> try_parse_dataset(std::string_view s) {
  return detail::parse_enum(s, std::array{Dataset::IHC, Dataset::ISHate, Dataset::TOXIGEN, Dataset::DYNA,
                                          Dataset::SBIC, Dataset::other});
}
inline std::optional<Split> try_parse_split(std::string_view s) {
  return detail::parse_enum(s, std::array{Split::train, Split::dev, Split::test});
}
inline std::optional<CsSource> try_parse_source(std::string_view s) {
  return detail::parse_enum(s, std::array{CsSource::expert, CsSource::user, CsSource::rag, CsSource::no_rag});
}

inline Implicitness parse_implicitness(std::string_view s) {
  return detail::parse_or_throw(try_parse_implicitness(s), "implicitness", s);
}
inline Dataset parse_dataset(std::string_view s) { return detail::parse_or_throw(try_parse_dataset(s), "dataset", s); }
inline CsSource parse_source(std::string_view s) { return detail::parse_or_throw(try_parse_source(s), "source", s); }

/// Closed canonical target vocabulary shared by every dataset.
inline const std::vector<std::string>& canonical_targets() {
  static const std::vector<std::string> v = {"women",   "migrants", "jews",     "muslims",
                                             "black people", "LGBT+", "disabled", "other"};
  return v;
}

/// Canonical counter-speech strategy labels.
inline const std::vector<std::string>& canonical_strategies() {
  static const std::vector<std::string> v = {"facts",       "denouncing", "humor",       "question",
                                             "affiliation", "positive_tone", "hypocrisy", "consequences",
                                             "counter_examples", "other"};
  return v;
}

inline std::optional<std::string> canonical_from(const std::vector<std::string>& table, std::string_view raw) {
  const auto key = text::lower(text::trim(raw));
  for (const auto& c : table) {
    if (text::lower(c) == key) return c;
  }
  return std::nullopt;
}

struct Message {
  std::string id;
  std::string text;
  bool hateful = false;
  Implicitness implicitness = Implicitness::none;
  std::string target = "other";
  Dataset dataset = Dataset::other;
  std::optional<Split> split;

  bool operator==(const Message&) const = default;
};

struct CounterSpeechRecord {
  std::string id;
  std::optional<std::string> hs_id;
  std::string text;
  std::string target = "other";
  CsSource source = CsSource::expert;
  std::optional<std::string> strategy;
  std::string dataset;

  bool operator==(const CounterSpeechRecord&) const = default;
};

inline void to_json(json& j, const Message& m) {
  j = json{{"id", m.id},
           {"text", m.text},
           {"hateful", m.hateful},
           {"implicitness", to_string(m.implicitness)},
           {"target", m.target},
           {"dataset", to_string(m.dataset)},
           {"split", m.split ? json(to_string(*m.split)) : json(nullptr)}};
}

inline void from_json(const json& j, Message& m) {
  m.id = j.at("id").get<std::string>();
  m.text = j.at("text").get<std::string>();
  m.hateful = j.at("hateful").get<bool>();
  m.implicitness = parse_implicitness(j.at("implicitness").get<std::string>());
  m.target = j.value("target", std::string("other"));
  m.dataset = parse_dataset(j.value("dataset", std::string("other")));
  if (j.contains("split") && j["split"].is_string()) {
    m.split = detail::parse_or_throw(try_parse_split(j["split"].get<std::string>()), "split", "");
  }
}

inline void to_json(json& j, const CounterSpeechRecord& r) {
  j = json{{"id", r.id},
           {"hs_id", r.hs_id ? json(*r.hs_id) : json(nullptr)},
           {"text", r.text},
           {"target", r.target},
           {"source", to_string(r.source)},
           {"strategy", r.strategy ? json(*r.strategy) : json(nullptr)},
           {"dataset", r.dataset}};
}

// ---------------------------------------------------------------------------
// Schema maps

enum class CorpusKind { hs, cs };
enum class FileFormat { csv, jsonl };

/// How one dataset file maps onto canonical records.
///   columns:  canonical field -> source column name
///   values:   canonical field -> {source value -> canonical value}
///   defaults: canonical field -> value used when the column is absent/empty
struct SchemaMap {
  std::string dataset = "other";
  CorpusKind kind = CorpusKind::hs;
  std::optional<FileFormat> format;
  std::map<std::string, std::string> columns;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::string> defaults;

  static SchemaMap from_json(const json& j) {
    SchemaMap s;
    s.dataset = j.value("dataset", std::string("other"));
    const auto kind = j.value("kind", std::string("hs"));
    require(kind == "hs" || kind == "cs", "schema kind must be 'hs' or 'cs'");
    s.kind = kind == "hs" ? CorpusKind::hs : CorpusKind::cs;
    if (j.contains("format")) {
      const auto f = j["format"].get<std::string>();
      require(f == "csv" || f == "jsonl", "schema format must be 'csv' or 'jsonl'");
      s.format = f == "csv" ? FileFormat::csv : FileFormat::jsonl;
    }
    s.columns = j.value("columns", std::map<std::string, std::string>{});
    s.values = j.value("values", std::map<std::string, std::map<std::string, std::string>>{});
    s.defaults = j.value("defaults", std::map<std::string, std::string>{});
    return s;
  }

  static SchemaMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io, "cannot open schema map '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      fail(Errc::schema, "schema map '" + path + "': " + e.what());
    }
  }
};

struct Reject {
  std::size_t line = 0;
  std::string field;
  std::string value;
  std::string reason;
};

inline void to_json(json& j, const Reject& r) {
  j = json{{"line", r.line}, {"field", r.field}, {"value", r.value}, {"reason", r.reason}};
}

template <class Record>
struct IngestReport {
  std::vector<Record> records;
  std::vector<Reject> rejects;
};

// ---------------------------------------------------------------------------
// Raw readers

using RawRow = std::map<std::string, std::string>;

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::pair<std::size_t, RawRow>> rows;  // (line number, row)
};

/// RFC 4180 CSV with a header row. Quoted fields may span lines.
inline RawTable read_csv(std::istream& in, const std::string& name = "<csv>") {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1, record_line = 1;
  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(fields.size() == 1 && fields[0].empty())) records.emplace_back(record_line, std::move(fields));
    fields.clear();
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      end_record();
      record_line = ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) fail(Errc::parse, name + ":" + std::to_string(record_line) + ": unterminated quote", std::to_string(record_line));
  if (field_started || !field.empty() || !fields.empty()) end_record();

  RawTable t;
  if (records.empty()) fail(Errc::parse, name + ": missing header row", "1");
  t.columns = records.front().second;
  for (auto& c : t.columns) c = std::string(text::trim(c));
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& [ln, vals] = records[r];
    if (vals.size() != t.columns.size()) {
      fail(Errc::parse,
           name + ":" + std::to_string(ln) + ": expected " + std::to_string(t.columns.size()) + " fields, got " +
               std::to_string(vals.size()),
           std::to_string(ln));
    }
    RawRow row;
    for (std::size_t k = 0; k < vals.size(); ++k) row[t.columns[k]] = vals[k];
    t.rows.emplace_back(ln, std::move(row));
  }
  return t;
}

inline RawTable read_jsonl(std::istream& in, const std::string& name = "<jsonl>") {
  RawTable t;
  std::set<std::string> cols;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::parse, name + ":" + std::to_string(ln) + ": " + e.what(), std::to_string(ln));
    }
    if (!j.is_object()) fail(Errc::parse, name + ":" + std::to_string(ln) + ": expected an object", std::to_string(ln));
    RawRow row;
    for (auto it = j.begin(); it != j.end(); ++it) {
      cols.insert(it.key());
      if (it->is_string()) row[it.key()] = it->get<std::string>();
      else if (it->is_null()) row[it.key()] = "";
      else row[it.key()] = it->dump();
    }
    t.rows.emplace_back(ln, std::move(row));
  }
  t.columns.assign(cols.begin(), cols.end());
  return t;
}

// ---------------------------------------------------------------------------
// Sanitization

namespace detail {

class RowMapper {
 public:
  RowMapper(const SchemaMap& schema, const RawTable& table) : schema_(schema) {
    std::set<std::string> present(table.columns.begin(), table.columns.end());
    std::vector<std::string> missing;
    for (const auto& [field, column] : schema.columns) {
      // JSONL files may omit a key on every row; only CSV headers are authoritative.
      if (!table.columns.empty() && !present.count(column)) missing.push_back(field + "->" + column);
    }
    if (!missing.empty()) fail(Errc::schema, "schema columns not in file: " + text::join(missing, ", "));
  }

  bool mapped(const std::string& field) const {
    return schema_.columns.count(field) || schema_.defaults.count(field);
  }

  // Raw value for a canonical field, after value mapping. nullopt when the
  // field is neither present nor defaulted.
  std::optional<std::string> raw(const RawRow& row, const std::string& field) const {
    std::string v;
    if (auto c = schema_.columns.find(field); c != schema_.columns.end()) {
      if (auto it = row.find(c->second); it != row.end()) v = std::string(text::trim(it->second));
    }
    if (v.empty()) {
      if (auto d = schema_.defaults.find(field); d != schema_.defaults.end()) return d->second;
      return std::nullopt;
    }
    if (auto vm = schema_.values.find(field); vm != schema_.values.end()) {
      if (auto hit = vm->second.find(v); hit != vm->second.end()) return hit->second;
    }
    return v;
  }

 private:
  const SchemaMap& schema_;
};

inline std::optional<bool> parse_bool(std::string_view s) {
  const auto k = text::lower(text::trim(s));
  if (k == "true") return true;
  if (k == "false") return false;
  return std::nullopt;
}

inline RawTable read_table(const std::string& path, const SchemaMap& schema) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open corpus file '" + path + "'");
  FileFormat fmt = schema.format.value_or(std::filesystem::path(path).extension() == ".csv" ? FileFormat::csv
                                                                                            : FileFormat::jsonl);
  return fmt == FileFormat::csv ? read_csv(in, path) : read_jsonl(in, path);
}

inline void raise_unmapped(const std::vector<Reject>& rejects) {
  std::set<std::string> labels;
  for (const auto& r : rejects) {
    if (r.reason == "unmapped label") labels.insert(r.field + "=" + r.value);
  }
  if (!labels.empty()) {
    fail(Errc::schema, "unmapped labels: " + text::join(std::vector<std::string>(labels.begin(), labels.end()), ", "));
  }
}

}  // namespace detail

/// Maps every row of an HS dataset onto canonical Messages. Rows that cannot
/// be sanitized are reported in `rejects`; with `strict`, unmapped labels
/// raise SchemaError instead.
inline IngestReport<Message> ingest_messages(const RawTable& table, const SchemaMap& schema, bool strict = false) {
  require(schema.kind == CorpusKind::hs, "schema map is not an HS schema");
  detail::RowMapper m(schema, table);
  if (!m.mapped("text")) fail(Errc::schema, "schema does not map the text field");
  if (!m.mapped("hateful") && !m.mapped("implicitness")) {
    fail(Errc::schema, "schema maps neither hateful nor implicitness");
  }
  const auto dataset = try_parse_dataset(schema.dataset);
  if (!dataset) fail(Errc::schema, "unknown dataset '" + schema.dataset + "'");

  IngestReport<Message> out;
  for (const auto& [line, row] : table.rows) {
    auto reject = [&, line = line](std::string field, std::string value, std::string reason) {
      out.rejects.push_back({line, std::move(field), std::move(value), std::move(reason)});
    };
    Message msg;
    msg.dataset = *dataset;
    msg.id = m.raw(row, "id").value_or(std::string(to_string(*dataset)) + "-" + std::to_string(line));
    auto txt = m.raw(row, "text");
    if (!txt || txt->empty()) {
      reject("text", "", "empty text");
      continue;
    }
    msg.text = *txt;

    auto imp_raw = m.raw(row, "implicitness");
    auto hate_raw = m.raw(row, "hateful");
    std::optional<Implicitness> imp;
    if (imp_raw) {
      imp = try_parse_implicitness(*imp_raw);
      if (!imp) {
        reject("implicitness", *imp_raw, "unmapped label");
        continue;
      }
    }
    if (hate_raw) {
      auto h = detail::parse_bool(*hate_raw);
      if (!h) {
        reject("hateful", *hate_raw, "unmapped label");
        continue;
      }
      msg.hateful = *h;
    } else if (imp) {
      msg.hateful = *imp != Implicitness::none;
    } else {
      reject("hateful", "", "missing label");
      continue;
    }
    if (!imp) {
      if (msg.hateful) {
        reject("implicitness", "", "missing label");
        continue;
      }
      imp = Implicitness::none;
    }
    msg.implicitness = *imp;
    if (msg.hateful != (msg.implicitness != Implicitness::none)) {
      reject("implicitness", std::string(to_string(msg.implicitness)),
             msg.hateful ? "hateful message with implicitness none" : "non-hateful message with implicitness");
      continue;
    }

    auto tgt_raw = m.raw(row, "target").value_or("other");
    auto tgt = canonical_from(canonical_targets(), tgt_raw);
    if (!tgt) {
      reject("target", tgt_raw, "unmapped label");
      continue;
    }
    msg.target = *tgt;

    if (auto sp = m.raw(row, "split")) {
      msg.split = try_parse_split(*sp);
      if (!msg.split) {
        reject("split", *sp, "unmapped label");
        continue;
      }
    }
    out.records.push_back(std::move(msg));
  }
  if (strict) detail::raise_unmapped(out.rejects);
  return out;
}

inline IngestReport<CounterSpeechRecord> ingest_counterspeech(const RawTable& table, const SchemaMap& schema,
                                                              bool strict = false) {
  require(schema.kind == CorpusKind::cs, "schema map is not a CS schema");
  detail::RowMapper m(schema, table);
  if (!m.mapped("text")) fail(Errc::schema, "schema does not map the text field");
  if (!m.mapped("source")) fail(Errc::schema, "schema does not map the source field");

  IngestReport<CounterSpeechRecord> out;
  for (const auto& [line, row] : table.rows) {
    auto reject = [&, line = line](std::string field, std::string value, std::string reason) {
      out.rejects.push_back({line, std::move(field), std::move(value), std::move(reason)});
    };
    CounterSpeechRecord rec;
    rec.dataset = schema.dataset;
    rec.id = m.raw(row, "id").value_or(schema.dataset + "-" + std::to_string(line));
    if (auto hs = m.raw(row, "hs_id"); hs && !hs->empty()) rec.hs_id = *hs;
    auto txt = m.raw(row, "text");
    if (!txt || txt->empty()) {
      reject("text", "", "empty text");
      continue;
    }
    rec.text = *txt;
    auto src_raw = m.raw(row, "source").value_or("");
    auto src = try_parse_source(src_raw);
    if (!src) {
      reject("source", src_raw, "unmapped label");
      continue;
    }
    rec.source = *src;
    auto tgt_raw = m.raw(row, "target").value_or("other");
    auto tgt = canonical_from(canonical_targets(), tgt_raw);
    if (!tgt) {
      reject("target", tgt_raw, "unmapped label");
      continue;
    }
    rec.target = *tgt;
    if (auto st = m.raw(row, "strategy"); st && !st->empty()) {
      rec.strategy = canonical_from(canonical_strategies(), *st);
      if (!rec.strategy) {
        reject("strategy", *st, "unmapped label");
        continue;
      }
    }
    out.records.push_back(std::move(rec));
  }
  if (strict) detail::raise_unmapped(out.rejects);
  return out;
}

inline IngestReport<Message> ingest_messages(const std::string& path, const SchemaMap& schema, bool strict = false) {
  return ingest_messages(detail::read_table(path, schema), schema, strict);
}

inline IngestReport<CounterSpeechRecord> ingest_counterspeech(const std::string& path, const SchemaMap& schema,
                                                              bool strict = false) {
  return ingest_counterspeech(detail::read_table(path, schema), schema, strict);
}

// ---------------------------------------------------------------------------
// Filtering

/// Conjunctive criteria; unset fields match everything. `hateful` and
/// `implicitness` apply to HS messages only, `source` to CS records only.
struct Criteria {
  std::optional<bool> hateful;
  std::optional<Implicitness> implicitness;
  std::optional<std::string> target;
  std::optional<std::string> dataset;
  std::optional<CsSource> source;

  bool empty() const { return !hateful && !implicitness && !target && !dataset && !source; }
};

inline bool matches(const Message& m, const Criteria& c) {
  require(!c.source, "source filter does not apply to HS messages");
  return (!c.hateful || m.hateful == *c.hateful) && (!c.implicitness || m.implicitness == *c.implicitness) &&
         (!c.target || m.target == *c.target) && (!c.dataset || to_string(m.dataset) == *c.dataset);
}

inline bool matches(const CounterSpeechRecord& r, const Criteria& c) {
  require(!c.hateful && !c.implicitness, "hateful/implicitness filters do not apply to CS records");
  return (!c.target || r.target == *c.target) && (!c.dataset || r.dataset == *c.dataset) &&
         (!c.source || r.source == *c.source);
}

template <class Record>
std::vector<Record> filter(const std::vector<Record>& records, const Criteria& criteria) {
  std::vector<Record> out;
  for (const auto& r : records) {
    if (matches(r, criteria)) out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation sampling

/// Draws `per_dataset` hateful messages from each corpus, half explicit and
/// half implicit, without replacement. Output is grouped per corpus (input
/// order), explicit draws first.
inline std::vector<Message> sample_eval_set(const std::vector<std::vector<Message>>& corpora,
                                            std::size_t per_dataset, std::uint64_t seed) {
  require(per_dataset >= 2 && per_dataset % 2 == 0, "per_dataset must be a positive even number");
  require(!corpora.empty(), "sample_eval_set needs at least one corpus");
  const std::size_t half = per_dataset / 2;
  Rng rng(seed);
  std::vector<Message> out;
  for (const auto& corpus : corpora) {
    const std::string name = corpus.empty() ? "<empty>" : std::string(to_string(corpus.front().dataset));
    std::vector<const Message*> pools[2];
    std::set<std::string> seen;
    for (const auto& m : corpus) {
      if (!m.hateful || !seen.insert(m.id).second) continue;
      if (m.implicitness == Implicitness::explicit_) pools[0].push_back(&m);
      if (m.implicitness == Implicitness::implicit) pools[1].push_back(&m);
    }
    for (int cls = 0; cls < 2; ++cls) {
      if (pools[cls].size() < half) {
        fail(Errc::insufficient_data,
             "dataset " + name + " has " + std::to_string(pools[cls].size()) + " " +
                 (cls == 0 ? "explicit" : "implicit") + " messages, need " + std::to_string(half),
             name + "/" + (cls == 0 ? "explicit" : "implicit"));
      }
    }
    for (int cls = 0; cls < 2; ++cls) {
      for (auto i : rng.sample_indices(pools[cls].size(), half)) out.push_back(*pools[cls][i]);
    }
  }
  return out;
}

}  // namespace peace
