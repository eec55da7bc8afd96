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

// Collapsed Gibbs LDA over word-boundary tokens, plus fold-in inference for
// unseen texts. Single chain, sequential sweeps: same seed, same matrices.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/error.hpp"
#include "peace/random.hpp"
#include "peace/text.hpp"

namespace peace {

using json = nlohmann::json;

struct LdaConfig {
  std::size_t K = 10;
  std::optional<double> alpha;  // default 50/K
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::size_t min_count = 2;
};

struct TopicModel {
  std::size_t K = 0;
  std::vector<std::string> vocab;
  std::map<std::string, std::size_t> word_id;
  std::vector<std::vector<double>> topic_word;  // K x V
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::set<std::string> stopwords;

  /// Highest-weight words per topic; ties by vocabulary order.
  std::vector<std::string> top_words(std::size_t topic, std::size_t n) const {
    std::vector<std::size_t> ids(vocab.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    const auto& row = topic_word.at(topic);
    std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return row[a] > row[b]; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(n, ids.size()); ++i) out.push_back(vocab[ids[i]]);
    return out;
  }
};

inline void to_json(json& j, const TopicModel& m) {
  j = json{{"K", m.K},
           {"vocab", m.vocab},
           {"topic_word", m.topic_word},
           {"alpha", m.alpha},
           {"beta", m.beta},
           {"iterations", m.iterations},
           {"seed", m.seed}};
}

struct LdaFit {
  TopicModel model;
  std::vector<std::vector<double>> doc_topic;  // D x K
};

struct TopicAssignment {
  std::vector<double> distribution;
  bool out_of_vocabulary = false;

  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(distribution.begin(), distribution.end()) -
                                    distribution.begin());
  }
};

inline std::vector<std::string> lda_tokens(std::string_view s, const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (auto& t : text::word_tokens(s)) {
    if (!stopwords.count(t)) out.push_back(std::move(t));
  }
  return out;
}

namespace detail {

inline std::size_t draw(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return weights.size() - 1;
}

}  // namespace detail

inline LdaFit fit_lda(const std::vector<std::string>& texts, const LdaConfig& cfg,
                      const std::set<std::string>& stopwords = {}) {
  require(cfg.K >= 2, "LDA needs K >= 2");
  require(texts.size() >= cfg.K, "LDA needs at least K documents");
  require(cfg.iterations >= 1, "LDA iterations must be >= 1");
  require(cfg.beta > 0.0, "LDA beta must be > 0");
  const std::size_t K = cfg.K;
  const double alpha = cfg.alpha.value_or(50.0 / static_cast<double>(K));
  require(alpha > 0.0, "LDA alpha must be > 0");

  std::vector<std::vector<std::string>> toks;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    toks.push_back(lda_tokens(t, stopwords));
    for (const auto& w : toks.back()) ++counts[w];
  }
  TopicModel m;
  m.K = K;
  m.alpha = alpha;
  m.beta = cfg.beta;
  m.iterations = cfg.iterations;
  m.seed = cfg.seed;
  m.stopwords = stopwords;
  for (const auto& [w, c] : counts) {
    if (c >= cfg.min_count) {
      m.word_id[w] = m.vocab.size();
      m.vocab.push_back(w);
    }
  }
  if (m.vocab.empty()) fail(Errc::degenerate_corpus, "no token occurs at least " + std::to_string(cfg.min_count) + " times");
  const std::size_t V = m.vocab.size();
  const double vbeta = static_cast<double>(V) * cfg.beta;

  std::vector<std::vector<std::size_t>> docs(texts.size());
  for (std::size_t d = 0; d < toks.size(); ++d) {
    for (const auto& w : toks[d]) {
      if (auto it = m.word_id.find(w); it != m.word_id.end()) docs[d].push_back(it->second);
    }
  }

  Rng rng(cfg.seed);
  std::vector<std::vector<std::size_t>> z(docs.size());
  std::vector<std::vector<double>> ndk(docs.size(), std::vector<double>(K, 0.0));
  std::vector<std::vector<double>> nkw(K, std::vector<double>(V, 0.0));
  std::vector<double> nk(K, 0.0);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto w : docs[d]) {
      auto k = static_cast<std::size_t>(rng.below(K));
      z[d].push_back(k);
      ++ndk[d][k], ++nkw[k][w], ++nk[k];
    }
  }
  std::vector<double> p(K);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const auto w = docs[d][i];
        auto k = z[d][i];
        --ndk[d][k], --nkw[k][w], --nk[k];
        for (std::size_t t = 0; t < K; ++t) p[t] = (ndk[d][t] + alpha) * (nkw[t][w] + cfg.beta) / (nk[t] + vbeta);
        k = detail::draw(rng, p);
        z[d][i] = k;
        ++ndk[d][k], ++nkw[k][w], ++nk[k];
      }
    }
  }

  m.topic_word.assign(K, std::vector<double>(V));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t w = 0; w < V; ++w) m.topic_word[k][w] = (nkw[k][w] + cfg.beta) / (nk[k] + vbeta);
  }
  LdaFit fit;
  fit.doc_topic.assign(docs.size(), std::vector<double>(K));
  const double kalpha = static_cast<double>(K) * alpha;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const double nd = static_cast<double>(docs[d].size());
    for (std::size_t k = 0; k < K; ++k) fit.doc_topic[d][k] = (ndk[d][k] + alpha) / (nd + kalpha);
  }
  fit.model = std::move(m);
  return fit;
}

/// Fold-in Gibbs with the topic-word matrix held fixed: 50 sweeps seeded by
/// the model seed. Texts with no in-vocabulary token get a uniform
/// distribution and the out_of_vocabulary flag.
inline TopicAssignment assign_topic(const TopicModel& model, std::string_view text) {
  require(model.K >= 2 && !model.topic_word.empty(), "topic model is not fitted");
  const std::size_t K = model.K;
  std::vector<std::size_t> doc;
  for (const auto& w : lda_tokens(text, model.stopwords)) {
    if (auto it = model.word_id.find(w); it != model.word_id.end()) doc.push_back(it->second);
  }
  TopicAssignment out;
  if (doc.empty()) {
    out.distribution.assign(K, 1.0 / static_cast<double>(K));
    out.out_of_vocabulary = true;
    return out;
  }
  Rng rng(model.seed);
  std::vector<std::size_t> z;
  std::vector<double> ndk(K, 0.0), p(K);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    z.push_back(static_cast<std::size_t>(rng.below(K)));
    ++ndk[z.back()];
  }
  for (int it = 0; it < 50; ++it) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      --ndk[z[i]];
      for (std::size_t t = 0; t < K; ++t) p[t] = (ndk[t] + model.alpha) * model.topic_word[t][doc[i]];
      z[i] = detail::draw(rng, p);
      ++ndk[z[i]];
    }
  }
  const double denom = static_cast<double>(doc.size()) + static_cast<double>(K) * model.alpha;
  for (std::size_t t = 0; t < K; ++t) out.distribution.push_back((ndk[t] + model.alpha) / denom);
  return out;
}

}  // namespace peace
