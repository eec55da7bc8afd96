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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "peace/backends.hpp"
#include "peace/index.hpp"

namespace peace {
namespace {

Embedding unit(Embedding v) { return l2_normalize(std::move(v)); }

EvidencePassage passage(std::string doc, std::size_t para, std::string text, Embedding v) {
  return {std::move(doc), para, std::move(text), unit(std::move(v)), 0.0};
}

std::vector<EvidencePassage> random_passages(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<EvidencePassage> out;
  for (std::size_t i = 0; i < n; ++i) {
    Embedding v(dim);
    for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
    out.push_back(passage("d" + std::to_string(i / 5), i % 5, "passage " + std::to_string(i), v));
  }
  return out;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io;
}

TEST(Chunk, BlankLineParagraphs) {
  KnowledgeDocument d{"a", KbSource::other, 2000, "t", "  first para\nstill first \n\n \t\nsecond\n\n\n"};
  auto chunks = chunk_document(d);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].second, "first para\nstill first");
  EXPECT_EQ(chunks[1].first, 1u);
  EXPECT_EQ(chunks[1].second, "second");
}

TEST(Chunk, WhitespaceOnlyBodyIsEmptyDocument) {
  KnowledgeDocument d{"a", KbSource::other, 2000, "t", " \n\n\t"};
  EXPECT_EQ(code_of([&] { chunk_document(d); }), Errc::empty_document);
}

TEST(Build, RejectsEmptyAndRaggedAndNonUnit) {
  EXPECT_EQ(code_of([] { Index::build({}); }), Errc::empty_index);
  std::vector<EvidencePassage> ragged = {passage("a", 0, "x", {1, 0}), passage("a", 1, "y", {1, 0, 0})};
  EXPECT_EQ(code_of([&] { Index::build(ragged); }), Errc::dimension_mismatch);
  std::vector<EvidencePassage> raw = {{"a", 0, "x", {3, 4}, 0.0}};
  EXPECT_EQ(code_of([&] { Index::build(raw); }), Errc::invariant);
}

TEST(Search, MatchesBruteForceOnRandomIndices) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(300), dim = 1 + rng.below(32);
    auto ps = random_passages(rng, n, dim);
    auto idx = Index::build(ps);
    std::vector<std::vector<double>> rows;
    for (auto& p : ps) rows.push_back(p.embedding);
    for (int q = 0; q < 10; ++q) {
      Embedding query(dim);
      for (auto& x : query) x = rng.uniform() * 2.0 - 1.0;
      query = l2_normalize(std::move(query));
      const std::size_t k = 1 + rng.below(15);
      auto got = idx.search(query, k);
      auto want = oracle::brute_top_k(rows, query, k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].row, want[i].first);
        EXPECT_EQ(got[i].score, want[i].second);
      }
    }
  }
}

TEST(Search, TiesGoToInsertionOrder) {
  auto idx = Index::build({passage("a", 0, "x", {1, 0}), passage("b", 0, "y", {0, 1}), passage("c", 0, "z", {1, 0})});
  auto hits = idx.search(Embedding{1, 0}, 3);
  EXPECT_EQ(hits[0].row, 0u);
  EXPECT_EQ(hits[1].row, 2u);
  EXPECT_EQ(hits[2].row, 1u);
}

TEST(Search, KLargerThanIndexReturnsAll) {
  auto idx = Index::build({passage("a", 0, "x", {1, 0})});
  EXPECT_EQ(idx.search(Embedding{1, 0}, 10).size(), 1u);
}

TEST(Search, QueryDimensionMismatch) {
  auto idx = Index::build({passage("a", 0, "x", {1, 0})});
  EXPECT_EQ(code_of([&] { idx.search(Embedding{1, 0, 0}, 1); }), Errc::dimension_mismatch);
}

TEST(Select, DropsNormalizedTextDuplicates) {
  auto idx = Index::build({passage("a", 0, "Everyone has the right  to life.", {1, 0.1}),
                           passage("b", 3, "everyone HAS the right to life.", {1, -0.5}),
                           passage("c", 0, "No one shall be held in slavery.", {0.2, 1})});
  RetrievalConfig cfg;
  cfg.k = 2;
  auto ev = select_evidence(idx, Embedding{1, 0}, cfg);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].doc_id, "a");
  EXPECT_EQ(ev[1].doc_id, "c");
  EXPECT_GE(ev[0].score, ev[1].score);
}

TEST(Select, NearDuplicateVectorsDropped) {
  auto idx = Index::build({passage("a", 0, "one", {1, 0}), passage("b", 0, "two", {0.999, 0.01}),
                           passage("c", 0, "three", {0, 1})});
  auto ev = select_evidence(idx, Embedding{1, 0}, RetrievalConfig{});
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].doc_id, "c");
}

TEST(Select, MatchesReferenceDedupOnRandomPools) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<EvidencePassage> ps;
    std::vector<std::string> keys;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      // few distinct directions and texts so duplicates are common
      Embedding v = {static_cast<double>(rng.below(3)), static_cast<double>(rng.below(3)), 1.0};
      std::string t = "text " + std::to_string(rng.below(8));
      if (rng.below(2)) t = " TEXT  " + t.substr(5);
      ps.push_back(passage("d", i, t, v));
      keys.push_back(text::normalize_for_dedup(t));
      rows.push_back(ps.back().embedding);
    }
    auto idx = Index::build(ps);
    RetrievalConfig cfg;
    cfg.k = 1 + rng.below(5);
    cfg.candidate_multiplier = 1 + rng.below(4);
    cfg.dedup_sim_threshold = 0.9 + 0.1 * rng.uniform();
    Embedding q = unit({rng.uniform(), rng.uniform(), rng.uniform()});
    auto got = select_evidence(idx, q, cfg);
    std::vector<std::size_t> ranked;
    for (auto& [row, s] : oracle::brute_top_k(rows, q, cfg.k * cfg.candidate_multiplier)) ranked.push_back(row);
    auto want = oracle::dedup_filter(ranked, keys, rows, cfg.dedup_sim_threshold, cfg.k);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].para_index, want[i]);
  }
}

TEST(Persist, RoundTripIsBitExact) {
  Rng rng(3);
  auto ps = random_passages(rng, 40, 16);
  ps[3].text = "Unicode: égalité, Würde, «dignité» §";
  auto idx = Index::build(ps);
  auto bytes = idx.serialize();
  auto back = Index::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  Embedding q(16, 0.25);
  EXPECT_EQ(idx.search(q, 7), back.search(q, 7));
  EXPECT_EQ(back.passage(3).text, ps[3].text);

  auto path = std::filesystem::temp_directory_path() / "peace_index_test.idx";
  idx.save(path.string());
  EXPECT_EQ(Index::load(path.string()).serialize(), bytes);
  std::filesystem::remove(path);
}

TEST(Persist, CorruptionAndVersionDetected) {
  auto idx = Index::build({passage("a", 0, "x", {1, 0})});
  auto bytes = idx.serialize();
  auto flipped = bytes;
  flipped[20] ^= 0x01;
  EXPECT_EQ(code_of([&] { Index::deserialize(flipped); }), Errc::corrupt_index);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { Index::deserialize(bad_magic); }), Errc::corrupt_index);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_EQ(code_of([&] { Index::deserialize(bad_version); }), Errc::version_mismatch);
  EXPECT_EQ(code_of([&] { Index::deserialize(bytes.substr(0, bytes.size() - 1)); }), Errc::corrupt_index);
}

TEST(EndToEnd, SampleKbRetrievalIsRankedAndBounded) {
  auto gw = make_gateway(default_mock_registry());
  auto docs = load_documents_jsonl(std::string(PEACE_DATA_DIR) + "/samples/kb_sample.jsonl");
  auto idx = build_index_from_documents(docs, *gw, "mock-embed");
  EXPECT_GE(idx.size(), 150u);
  auto ev = retrieve_evidence(idx, *gw, "mock-embed", "migrants are invaders and should be sent back", {});
  ASSERT_GE(ev.size(), 1u);
  ASSERT_LE(ev.size(), 3u);
  for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_GE(ev[i - 1].score, ev[i].score);
}

}  // namespace
}  // namespace peace
