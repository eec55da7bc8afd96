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

#include <algorithm>

#include "oracles.hpp"
#include "peace/augmentation.hpp"
#include "peace/backends.hpp"

namespace peace {
namespace {

LexiconPack shipped() { return LexiconPack::load_dir(std::string(PEACE_DATA_DIR) + "/lexicons"); }

AugmentationRequest req(std::string text, Strategy s, std::optional<EdaMode> mode = std::nullopt) {
  AugmentationRequest r;
  r.text = std::move(text);
  r.strategy = s;
  r.eda_mode = mode;
  return r;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

void expect_replays(const std::string& input, const Variant& v) {
  std::vector<oracle::Edit> edits;
  for (const auto& e : v.edits) {
    EXPECT_EQ(input.substr(e.begin, e.end - e.begin), e.before);
    edits.push_back({e.begin, e.end, e.after});
  }
  auto replayed = oracle::replay(input, edits);
  ASSERT_TRUE(replayed.has_value()) << "overlapping edits";
  EXPECT_EQ(*replayed, v.variant);
}

TEST(EdaOp, IdentitySwapAndDeleteFloor) {
  const std::vector<std::string> t = {"a", "b", "c"};
  for (auto m : {EdaMode::swap, EdaMode::del, EdaMode::insert, EdaMode::replace})
    EXPECT_EQ(eda_op(t, m, 0, 1, {"x"}), t);
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_EQ(sorted(eda_op(t, EdaMode::swap, 2, seed, {})), t);
  EXPECT_EQ(eda_op(t, EdaMode::del, 3, 5, {}).size(), 1u);
  EXPECT_EQ(eda_op(t, EdaMode::insert, 2, 5, {"x"}).size(), 5u);
  try {
    eda_op(t, EdaMode::replace, 1, 1, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_pool);
  }
}

TEST(Augment, DeleteOneOfFour) {
  auto r = augment(req("a b c d", Strategy::eda, EdaMode::del), shipped());
  ASSERT_EQ(r.variants.size(), 1u);
  EXPECT_EQ(text::whitespace_tokens(r.variants[0].variant).size(), 3u);
  expect_replays("a b c d", r.variants[0]);
}

TEST(Augment, SingleTokenSwapHasNoSite) {
  auto r = augment(req("alone", Strategy::eda, EdaMode::swap), shipped());
  EXPECT_TRUE(r.variants.empty());
  EXPECT_EQ(r.reason, "NoEligibleSite");
}

TEST(Augment, AdjSynonymSingleSite) {
  LexiconPack lex;
  lex.adj_synonyms = {{"bad", {"awful"}}};
  auto r = augment(req("a bad idea", Strategy::adj_synonym), lex);
  ASSERT_EQ(r.variants.size(), 1u);
  EXPECT_EQ(r.variants[0].variant, "a awful idea");
  ASSERT_EQ(r.variants[0].edits.size(), 1u);
  EXPECT_EQ(r.variants[0].edits[0], (TextEdit{2, 5, "bad", "awful"}));
}

TEST(Scalar, NeighboursAndSaturation) {
  auto lex = shipped();
  EXPECT_EQ(scalar_adverb_shift("very bad", lex, Direction::up)->variant, "extremely bad");
  EXPECT_FALSE(scalar_adverb_shift("extremely bad", lex, Direction::up));
  EXPECT_EQ(scalar_adverb_shift("somewhat odd", lex, Direction::down)->variant, "slightly odd");
  EXPECT_EQ(scalar_adverb_shift("Very bad, very", lex, Direction::down)->variant, "Rather bad, rather");
  auto r = req("extremely bad", Strategy::scalar_adverb);
  r.direction = Direction::up;
  EXPECT_EQ(augment(r, lex).reason, "NoEligibleSite");
}

TEST(Strategies, EachProducesReplayableVariants) {
  auto lex = shipped();
  const std::string s = "They are lazy and John says they are taking over Paris, everyone knows it is very bad.";
  for (auto st : {Strategy::ne_replace, Strategy::scalar_adverb, Strategy::adverbial_modifier, Strategy::adj_synonym,
                  Strategy::domain_expression}) {
    auto r = req(s, st);
    r.count = 3;
    r.seed = 11;
    auto out = augment(r, lex);
    ASSERT_FALSE(out.variants.empty()) << to_string(st);
    for (const auto& v : out.variants) {
      EXPECT_NE(v.variant, s);
      expect_replays(s, v);
    }
  }
}

TEST(Strategies, NeReplaceStaysInCategory) {
  auto lex = shipped();
  auto r = req("We met in Paris.", Strategy::ne_replace);
  r.count = 5;
  for (const auto& v : augment(r, lex).variants) {
    const auto& cities = lex.gazetteer.at("city");
    EXPECT_NE(std::find(cities.begin(), cities.end(), v.edits.at(0).after), cities.end());
  }
}

TEST(Strategies, ModifierAfterCopula) {
  LexiconPack lex;
  lex.modifiers = {"really"};
  auto out = augment(req("the plan is bad", Strategy::adverbial_modifier), lex);
  ASSERT_EQ(out.variants.size(), 1u);
  EXPECT_EQ(out.variants[0].variant, "the plan is really bad");
}

TEST(BackTranslate, TwoCallsAndEchoIdentity) {
  Gateway gw(Gateway::Options{false, [](std::string_view) {}});
  MockConfig c;
  c.chat_mode = MockConfig::ChatMode::echo;
  auto m = std::make_shared<MockBackend>(c, "echo");
  BackendDescriptor d;
  d.id = "echo";
  d.kind = BackendKind::chat;
  d.endpoint = "mock://echo";
  d.model_name = "mock";
  gw.add(d, m);
  TemplateSet t;
  t.set("translate", "{text}");
  auto v = back_translate("hello world", "French", gw, "echo", t, 1);
  EXPECT_EQ(v.variant, "hello world");
  EXPECT_EQ(m->chat_calls(), 2u);
  EXPECT_EQ(v.pivot_text, "hello world");

  auto defaults = TemplateSet::defaults();
  m->reset_counters();
  auto v2 = back_translate("hello world", "German", gw, "echo", defaults, 1);
  EXPECT_NE(m->chat_log().at(0).user_prompt.find("German"), std::string::npos);
  EXPECT_NE(m->chat_log().at(1).user_prompt.find("English"), std::string::npos);

  AugmentContext ctx{&gw, "echo", &t};
  auto r = augment(req("hello world", Strategy::back_translate), LexiconPack{}, ctx);
  EXPECT_TRUE(r.variants.empty());
  try {
    augment(req("hello world", Strategy::back_translate), LexiconPack{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_backend);
  }
}

TEST(Request, EdaModeIffEda) {
  EXPECT_THROW(req("x y", Strategy::eda).validate(), Error);
  EXPECT_THROW(req("x y", Strategy::adj_synonym, EdaMode::swap).validate(), Error);
  auto j = json::parse(R"({"text":"a b","strategy":"eda","eda_mode":"delete","count":2,"seed":3})");
  auto r = augmentation_request_from_json(j);
  EXPECT_EQ(r.eda_mode, EdaMode::del);
  EXPECT_EQ(r.count, 2u);
}

TEST(Fuzz, InvariantsHold) {
  auto lex = shipped();
  const std::vector<std::string> words = {"they", "are", "very", "bad", "John", "is", "lazy", "Paris", "taking", "over",
                                          "the", "new", "somewhat", "strange", "we", "go", "back", "  ", "é", "x"};
  Rng rng(2024);
  const std::vector<Strategy> strategies = {Strategy::ne_replace, Strategy::scalar_adverb, Strategy::adverbial_modifier,
                                            Strategy::adj_synonym, Strategy::domain_expression, Strategy::eda};
  for (int i = 0; i < 300; ++i) {
    std::string s;
    for (int k = 0, n = 1 + static_cast<int>(rng.below(12)); k < n; ++k) s += words[rng.below(words.size())] + " ";
    if (text::trim(s).empty()) s = "x";
    auto st = strategies[rng.below(strategies.size())];
    auto r = req(s, st, st == Strategy::eda ? std::optional(static_cast<EdaMode>(rng.below(4))) : std::nullopt);
    r.intensity = 0.05 + 0.95 * rng.uniform();
    r.count = 1 + rng.below(4);
    r.seed = rng.next();
    auto a = augment(r, lex);
    auto b = augment(r, lex);
    EXPECT_EQ(a.variants, b.variants);
    EXPECT_LE(a.variants.size(), r.count);
    EXPECT_EQ(a.variants.empty(), a.reason.has_value());
    const auto in_tokens = text::whitespace_tokens(s);
    for (const auto& v : a.variants) {
      EXPECT_NE(v.variant, s);
      EXPECT_FALSE(text::trim(v.variant).empty());
      expect_replays(s, v);
      if (st == Strategy::eda && *r.eda_mode == EdaMode::swap) {
        EXPECT_EQ(sorted(text::whitespace_tokens(v.variant)), sorted(in_tokens));
      }
      if (st == Strategy::eda && *r.eda_mode == EdaMode::del) {
        EXPECT_LT(text::whitespace_tokens(v.variant).size(), in_tokens.size());
      }
      if (st == Strategy::eda && *r.eda_mode == EdaMode::insert) {
        EXPECT_GT(text::whitespace_tokens(v.variant).size(), in_tokens.size());
      }
    }
  }
}

}  // namespace
}  // namespace peace
