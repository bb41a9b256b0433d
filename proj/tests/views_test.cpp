// Copyright 2026 The CREAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "cream/lexer.hpp"
#include "cream/rng.hpp"
#include "cream/views.hpp"
#include "golden_cases.hpp"

namespace cream::views {
namespace {

using lex::classify_identifiers;
using lex::tokenize;

std::vector<lex::TokenKind> kinds(const lex::TokenList& toks) {
  std::vector<lex::TokenKind> out;
  for (const auto& t : toks) out.push_back(t.kind);
  return out;
}

TEST(BuildViews, Examples) {
  const BranchViews a = build_views("int a = 0;");
  EXPECT_EQ(a.k_tokens, (std::vector<std::string>{"int", "a", "=", "0", ";"}));
  EXPECT_EQ(a.f_tokens, (std::vector<std::string>{"int", "<ID>", "=", "0", ";"}));
  EXPECT_EQ(a.t_tokens, (std::vector<std::string>{"a"}));

  const BranchViews b = build_views("return 0;");
  EXPECT_EQ(b.f_tokens, b.k_tokens);
  EXPECT_TRUE(b.t_tokens.empty());

  const BranchViews c = build_views("f(x)");
  EXPECT_EQ(c.k_tokens, (std::vector<std::string>{"f", "(", "x", ")"}));
  EXPECT_EQ(c.f_tokens, (std::vector<std::string>{"f", "(", "<ID>", ")"}));
  EXPECT_EQ(c.t_tokens, (std::vector<std::string>{"x"}));
}

TEST(AbstractCode, Examples) {
  auto abstracted = [](const std::string& src) {
    const auto toks = tokenize(src);
    return abstract_code(toks, classify_identifiers(toks)).render();
  };
  EXPECT_EQ(abstracted("int a = b + a;"), "int VAR_0 = VAR_1 + VAR_0;");
  EXPECT_EQ(abstracted("return 0;"), "return 0;");
  EXPECT_EQ(abstracted("f(x)"), "f(VAR_0)");
}

TEST(AbstractCode, IsIdempotentAndLeavesNoUserIdentifiers) {
  const auto toks = tokenize("while (i < n) { s = s + a[i]; i = i + 1; }");
  const auto once = abstract_code(toks, classify_identifiers(toks));
  EXPECT_TRUE(classify_identifiers(once).empty());
  EXPECT_TRUE(build_views(once, classify_identifiers(once)).t_tokens.empty());
  EXPECT_EQ(abstract_code(once, classify_identifiers(once)).render(), once.render());
}

TEST(RenameRandom, ForcedDraw) {
  const auto toks = tokenize("int a = a;");
  Rng rng(1);
  const auto [renamed, map] = rename_random(toks, classify_identifiers(toks), {"arr"}, rng);
  EXPECT_EQ(renamed.render(), "int arr = arr;");
  EXPECT_EQ(map, (RenameMap{{"a", "arr"}}));
}

TEST(RenameRandom, NoIdentifiersIsIdentity) {
  const auto toks = tokenize("return 0;");
  Rng rng(1);
  const auto [renamed, map] = rename_random(toks, classify_identifiers(toks), {"q"}, rng);
  EXPECT_EQ(renamed.render(), "return 0;");
  EXPECT_TRUE(map.empty());
}

TEST(RenameRandom, EmptyPoolThrows) {
  const auto toks = tokenize("int a = 0;");
  Rng rng(1);
  EXPECT_THROW(rename_random(toks, classify_identifiers(toks), {}, rng), EmptyVocab);
  EXPECT_THROW(rename_random(tokenize(""), {}, {}, rng), EmptyVocab);
}

TEST(RenameRandom, NeverCapturesCallHeadsOrUnmappedNames) {
  // Pool entries equal to the call head or to a not-yet-renamed identifier
  // must be rejected.
  const auto toks = tokenize("y = f(x);");
  Rng rng(5);
  const auto [renamed, map] = rename_random(toks, classify_identifiers(toks), {"f", "x"}, rng);
  // y cannot take f (call head) or x (unmapped); x cannot take f. Both fall
  // back to suffixes or to x itself.
  EXPECT_NE(map.at("y"), "f");
  EXPECT_NE(map.at("y"), "x");
  EXPECT_NE(map.at("x"), "f");
  EXPECT_NE(map.at("x"), map.at("y"));
  EXPECT_EQ(kinds(renamed), kinds(toks));
}

TEST(RenameRandom, SeededTraceMatchesOracle) {
  const auto toks = tokenize(golden::kSeededSource);
  Rng rng(golden::kSeededRngSeed);
  const auto [renamed, map] = rename_random(toks, classify_identifiers(toks), golden::kSeededPool, rng);
  EXPECT_EQ(renamed.render(), golden::kSeededRenamed);
}

TEST(Golden, ViewsAbstractionAndRename) {
  for (const auto& c : golden::cases()) {
    SCOPED_TRACE(c.source);
    const auto toks = tokenize(c.source);
    const auto ids = classify_identifiers(toks);
    const BranchViews v = build_views(toks, ids);
    std::vector<std::string> texts;
    for (const auto& [text, kind] : c.tokens) texts.push_back(text);
    EXPECT_EQ(v.k_tokens, texts);
    EXPECT_EQ(v.f_tokens, c.f_view);
    EXPECT_EQ(v.t_tokens, c.t_view);
    EXPECT_EQ(abstract_code(toks, ids).render(), c.abstracted);
    Rng rng(0);
    EXPECT_EQ(rename_random(toks, ids, {"q"}, rng).first.render(), c.renamed_q);
  }
}

// Property: renaming changes only identifier texts, keeps the kind sequence,
// renames consistently, and is injective.
TEST(RenameProperty, SemanticPreservationProxy) {
  const std::vector<std::string> sources = {
      "for (i = 0; i < n; i = i + 1) { s = s + v[i]; }", "g(h(y), z);", "if (a <= b && !c) { return a; }",
      "int a = b + c * a; print(a, b);", "x==y||z>=w"};
  const std::vector<std::string> pool = {"p", "q", "r", "s", "x", "alpha", "beta", "g"};
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& src = sources[static_cast<std::size_t>(trial) % sources.size()];
    const auto toks = tokenize(src);
    const auto ids = classify_identifiers(toks);
    const auto [renamed, map] = rename_random(toks, ids, pool, rng);
    ASSERT_EQ(renamed.size(), toks.size());
    EXPECT_EQ(kinds(renamed), kinds(toks));
    std::set<std::string> images;
    for (const auto& [from, to] : map) {
      EXPECT_TRUE(lex::is_valid_identifier(to));
      images.insert(to);
    }
    EXPECT_EQ(images.size(), map.size());
    std::size_t w = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (w < ids.size() && ids[w] == i) {
        EXPECT_EQ(renamed[i].text, map.at(toks[i].text));
        ++w;
      } else {
        EXPECT_EQ(renamed[i].text, toks[i].text);
      }
    }
    // Renamed user identifiers stay user identifiers.
    EXPECT_EQ(classify_identifiers(renamed), ids);
  }
}

TEST(BuildTransformedSet, Examples) {
  EXPECT_TRUE(build_transformed_set({}, {"q"}, 1).samples.empty());

  const Dataset plain = {{"s0", "return 0;", 1}};
  EXPECT_EQ(build_transformed_set(plain, {"q"}, 1).samples, plain);

  const Dataset data = {{"s0", "int a = b;", 0}, {"s1", "while (i < n) { i = i + 1; }", 1}, {"s2", "f(x);", 0}};
  const std::vector<std::string> pool = {"u", "v", "w", "zz", "kk"};
  const auto first = build_transformed_set(data, pool, 99);
  const auto second = build_transformed_set(data, pool, 99);
  EXPECT_EQ(first.samples, second.samples);
  EXPECT_EQ(first.maps, second.maps);
  ASSERT_EQ(first.samples.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(first.samples[i].id, data[i].id);
    EXPECT_EQ(first.samples[i].label, data[i].label);
  }
  EXPECT_THROW(build_transformed_set(data, {}, 1), EmptyVocab);
}

TEST(BuildTransformedSet, SampleDrawsDependOnlyOnIndex) {
  const Dataset data = {{"s0", "int a = b;", 0}, {"s1", "int c = d;", 1}};
  const std::vector<std::string> pool = {"u", "v", "w", "zz", "kk", "mm"};
  const auto full = build_transformed_set(data, pool, 5);
  const auto prefix = build_transformed_set(Dataset{data[0]}, pool, 5);
  EXPECT_EQ(full.samples[0], prefix.samples[0]);
}

TEST(IdentifierPool, FirstOccurrenceOrder) {
  const Dataset data = {{"a", "int b = c + b;", 0}, {"b", "f(d, c);", 0}};
  EXPECT_EQ(identifier_pool(data), (std::vector<std::string>{"b", "c", "d"}));
}

}  // namespace
}  // namespace cream::views
