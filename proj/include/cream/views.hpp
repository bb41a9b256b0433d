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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cream/error.hpp"
#include "cream/lexer.hpp"
#include "cream/rng.hpp"

namespace cream {

/// One labeled code snippet.
struct CodeSample {
  std::string id;
  std::string code;
  int label = 0;

  friend bool operator==(const CodeSample&, const CodeSample&) = default;
};

using Dataset = std::vector<CodeSample>;

}  // namespace cream

namespace cream::views {

inline constexpr std::string_view kIdPlaceholder = "<ID>";

/// The three branch inputs derived from one snippet.
///   k: every token text, in order (combined view)
///   f: k with each user identifier masked to "<ID>" (non-naming view)
///   t: only the user identifier occurrences, in order (naming view)
struct BranchViews {
  std::vector<std::string> f_tokens;
  std::vector<std::string> t_tokens;
  std::vector<std::string> k_tokens;

  friend bool operator==(const BranchViews&, const BranchViews&) = default;
};

inline BranchViews build_views(const lex::TokenList& toks, const lex::IdentifierSet& ids) {
  BranchViews v;
  v.k_tokens.reserve(toks.size());
  v.f_tokens.reserve(toks.size());
  v.t_tokens.reserve(ids.size());
  std::size_t w = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string& text = toks[i].text;
    v.k_tokens.push_back(text);
    if (w < ids.size() && ids[w] == i) {
      v.f_tokens.emplace_back(kIdPlaceholder);
      v.t_tokens.push_back(text);
      ++w;
    } else {
      v.f_tokens.push_back(text);
    }
  }
  return v;
}

inline BranchViews build_views(const std::string& code) {
  const lex::TokenList toks = lex::tokenize(code);
  return build_views(toks, lex::classify_identifiers(toks));
}

/// Distinct identifier texts at the given positions, in first-occurrence order.
inline std::vector<std::string> distinct_identifiers(const lex::TokenList& toks,
                                                     const lex::IdentifierSet& ids) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i : ids) {
    if (seen.insert(toks[i].text).second) out.push_back(toks[i].text);
  }
  return out;
}

/// Rename every user identifier to VAR_<n>, numbered by first occurrence.
inline lex::TokenList abstract_code(const lex::TokenList& toks, const lex::IdentifierSet& ids) {
  std::unordered_map<std::string, std::string> numbering;
  for (const std::string& name : distinct_identifiers(toks, ids)) {
    numbering.emplace(name, "VAR_" + std::to_string(numbering.size()));
  }
  return lex::substitute(toks, ids, [&](std::size_t i) { return numbering.at(toks[i].text); });
}

/// Original identifier text -> replacement. Ordered for stable serialization.
using RenameMap = std::map<std::string, std::string>;

inline constexpr int kMaxRedraws = 100;

/// Consistently rename each distinct user identifier to an entry drawn
/// uniformly from `pool`. A draw is rejected when it equals the replacement
/// of another identifier, or any other identifier still present in the
/// snippet (including call heads); after kMaxRedraws rejections a numeric
/// suffix is appended to the last draw until it is free.
inline std::pair<lex::TokenList, RenameMap> rename_random(const lex::TokenList& toks,
                                                          const lex::IdentifierSet& ids,
                                                          const std::vector<std::string>& pool,
                                                          Rng& rng) {
  if (pool.empty()) throw EmptyVocab();
  const std::vector<std::string> originals = distinct_identifiers(toks, ids);

  // Identifiers that keep their spelling: call heads etc.
  std::set<std::string> fixed;
  {
    std::size_t w = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (w < ids.size() && ids[w] == i) {
        ++w;
        continue;
      }
      if (toks[i].kind == lex::TokenKind::Identifier) fixed.insert(toks[i].text);
    }
  }

  RenameMap map;
  std::set<std::string> used;
  std::set<std::string> unmapped(originals.begin(), originals.end());
  auto collides = [&](const std::string& self, const std::string& cand) {
    if (used.contains(cand) || fixed.contains(cand)) return true;
    return cand != self && unmapped.contains(cand);
  };

  for (const std::string& name : originals) {
    std::string cand = pool[rng.below(pool.size())];
    for (int attempt = 1; collides(name, cand) && attempt < kMaxRedraws; ++attempt) {
      cand = pool[rng.below(pool.size())];
    }
    if (collides(name, cand)) {
      const std::string stem = cand;
      for (std::size_t suffix = 1; collides(name, cand); ++suffix) {
        cand = stem + "_" + std::to_string(suffix);
      }
    }
    unmapped.erase(name);
    used.insert(cand);
    map.emplace(name, cand);
  }

  lex::TokenList renamed =
      lex::substitute(toks, ids, [&](std::size_t i) { return map.at(toks[i].text); });
  return {std::move(renamed), std::move(map)};
}

/// Distinct user identifiers of a dataset in first-occurrence order; the
/// default replacement pool for renaming.
inline std::vector<std::string> identifier_pool(const Dataset& data) {
  std::vector<std::string> pool;
  std::unordered_set<std::string> seen;
  for (const CodeSample& s : data) {
    const lex::TokenList toks = lex::tokenize(s.code);
    for (std::size_t i : lex::classify_identifiers(toks)) {
      if (seen.insert(toks[i].text).second) pool.push_back(toks[i].text);
    }
  }
  return pool;
}

struct TransformedSet {
  Dataset samples;
  std::vector<RenameMap> maps;  // aligned with samples
};

/// Rename every sample independently. Sample i draws from its own stream
/// split_seed(seed, i), so the output does not depend on processing order.
inline TransformedSet build_transformed_set(const Dataset& data, const std::vector<std::string>& pool,
                                            std::uint64_t seed) {
  TransformedSet out;
  out.samples.reserve(data.size());
  out.maps.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const lex::TokenList toks = lex::tokenize(data[i].code);
    Rng rng(split_seed(seed, i));
    auto [renamed, map] = rename_random(toks, lex::classify_identifiers(toks), pool, rng);
    out.samples.push_back(CodeSample{data[i].id, renamed.render(), data[i].label});
    out.maps.push_back(std::move(map));
  }
  return out;
}

}  // namespace cream::views
