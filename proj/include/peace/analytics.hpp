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

// Aggregates behind the exploration views: Sankey flows, word frequencies,
// target frequency tables.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/corpus.hpp"
#include "peace/lda.hpp"

namespace peace {

using json = nlohmann::json;

enum class SankeyLayer { target, category, topic, source };

inline std::string_view to_string(SankeyLayer l) {
  switch (l) {
    case SankeyLayer::target: return "target";
    case SankeyLayer::category: return "category";
    case SankeyLayer::topic: return "topic";
    case SankeyLayer::source: return "source";
  }
  return "target";
}

inline SankeyLayer parse_sankey_layer(std::string_view s) {
  if (s == "target") return SankeyLayer::target;
  if (s == "category") return SankeyLayer::category;
  if (s == "topic") return SankeyLayer::topic;
  if (s == "source") return SankeyLayer::source;
  fail(Errc::invalid_argument, "unknown sankey layer '" + std::string(s) + "'");
}

struct SankeyNode {
  std::string id;  // "layer:label"
  SankeyLayer layer;
  std::string label;
};

struct SankeyLink {
  std::string from, to;
  std::size_t weight = 0;
};

struct SankeyGraph {
  std::vector<SankeyNode> nodes;
  std::vector<SankeyLink> links;
};

inline void to_json(json& j, const SankeyGraph& g) {
  j = json{{"nodes", json::array()}, {"links", json::array()}};
  for (const auto& n : g.nodes) j["nodes"].push_back({{"id", n.id}, {"layer", to_string(n.layer)}, {"label", n.label}});
  for (const auto& l : g.links) j["links"].push_back({{"from", l.from}, {"to", l.to}, {"weight", l.weight}});
}

namespace detail {

// category: implicitness for HS, strategy for CS
inline std::string layer_label(const Message& m, SankeyLayer l) {
  switch (l) {
    case SankeyLayer::target: return m.target;
    case SankeyLayer::category: return std::string(to_string(m.implicitness));
    case SankeyLayer::source: fail(Errc::invalid_argument, "source layer applies to CS records only");
    case SankeyLayer::topic: break;
  }
  return {};
}

inline std::string layer_label(const CounterSpeechRecord& r, SankeyLayer l) {
  switch (l) {
    case SankeyLayer::target: return r.target;
    case SankeyLayer::category: return r.strategy.value_or("unspecified");
    case SankeyLayer::source: return std::string(to_string(r.source));
    case SankeyLayer::topic: break;
  }
  return {};
}

}  // namespace detail

/// Co-occurrence counts between adjacent layers. Nodes are ordered by layer
/// position then label; links by (from, to).
template <class Record>
SankeyGraph sankey_data(const std::vector<Record>& records, const std::vector<SankeyLayer>& layers,
                        const TopicModel* topic_model = nullptr) {
  require(layers.size() >= 2, "sankey needs at least two layers");
  std::set<SankeyLayer> seen;
  for (auto l : layers) require(seen.insert(l).second, "sankey layers must be distinct");
  if (seen.count(SankeyLayer::topic) && topic_model == nullptr) {
    fail(Errc::missing_topic_model, "topic layer requested without a topic model");
  }
  std::vector<std::set<std::string>> labels(layers.size());
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& r : records) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      std::string label = layers[i] == SankeyLayer::topic
                              ? "topic " + std::to_string(assign_topic(*topic_model, r.text).argmax())
                              : detail::layer_label(r, layers[i]);
      labels[i].insert(label);
      ids.push_back(std::string(to_string(layers[i])) + ":" + label);
    }
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) ++counts[{ids[i], ids[i + 1]}];
  }
  SankeyGraph g;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (const auto& label : labels[i]) g.nodes.push_back({std::string(to_string(layers[i])) + ":" + label, layers[i], label});
  }
  for (const auto& [key, w] : counts) g.links.push_back({key.first, key.second, w});
  return g;
}

/// Lowercased word-boundary tokens minus stopwords; count desc, then token asc.
inline std::vector<std::pair<std::string, std::size_t>> word_frequencies(const std::vector<std::string>& texts,
                                                                         std::size_t top_n,
                                                                         const std::set<std::string>& stopwords = {}) {
  require(top_n >= 1, "top_n must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : text::word_tokens(t)) {
      if (!stopwords.count(w)) ++counts[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.second > b.second; });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

template <class Record>
std::vector<std::string> texts_of(const std::vector<Record>& records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

inline std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open stopword list '" + path + "'");
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (!t.empty() && t[0] != '#') out.insert(text::lower(t));
  }
  return out;
}

struct FrequencyRow {
  std::string target;
  std::map<std::string, std::string> group;
  std::size_t count = 0;
};

struct FrequencyTable {
  std::vector<std::string> group_by;
  std::vector<FrequencyRow> rows;  // sorted by (target, group values)
  std::size_t total = 0;
};

inline void to_json(json& j, const FrequencyTable& t) {
  j = json{{"group_by", t.group_by}, {"rows", json::array()}, {"total", t.total}};
  for (const auto& r : t.rows) {
    json row = {{"target", r.target}, {"count", r.count}};
    for (const auto& [k, v] : r.group) row[k] = v;
    j["rows"].push_back(std::move(row));
  }
}

namespace detail {

inline std::string group_value(const Message& m, const std::string& key) {
  if (key == "dataset") return std::string(to_string(m.dataset));
  if (key == "implicitness") return std::string(to_string(m.implicitness));
  fail(Errc::invalid_argument, "cannot group HS messages by '" + key + "'");
}

inline std::string group_value(const CounterSpeechRecord& r, const std::string& key) {
  if (key == "dataset") return r.dataset;
  if (key == "source") return std::string(to_string(r.source));
  fail(Errc::invalid_argument, "cannot group CS records by '" + key + "'");
}

}  // namespace detail

template <class Record>
FrequencyTable target_frequencies(const std::vector<Record>& records, std::vector<std::string> group_by = {}) {
  std::sort(group_by.begin(), group_by.end());
  require(std::adjacent_find(group_by.begin(), group_by.end()) == group_by.end(), "group_by keys must be distinct");
  std::map<std::vector<std::string>, std::size_t> counts;
  for (const auto& r : records) {
    std::vector<std::string> key{r.target};
    for (const auto& g : group_by) key.push_back(detail::group_value(r, g));
    ++counts[key];
  }
  FrequencyTable t;
  t.group_by = group_by;
  t.total = records.size();
  for (const auto& [key, n] : counts) {
    FrequencyRow row;
    row.target = key[0];
    for (std::size_t i = 0; i < group_by.size(); ++i) row.group[group_by[i]] = key[i + 1];
    row.count = n;
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace peace
