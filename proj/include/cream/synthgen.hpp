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

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cream/error.hpp"
#include "cream/lexer.hpp"
#include "cream/rng.hpp"
#include "cream/views.hpp"

// Synthetic labeled code with a planted, controllable correlation between
// identifier names and labels. The label is fully determined by program
// structure; identifier names only carry the spurious signal.

namespace cream::synth {

struct GenSpec {
  int n_classes = 8;
  std::size_t n_train = 2000;
  std::size_t n_valid = 500;
  std::size_t n_test = 500;
  double rho = 0.9;  // P(sample draws its names from its class pool)
  std::size_t pool_size = 20;
  std::uint64_t seed = 0;
  // When set, test samples always draw from the global pool. Off by default:
  // the original test split shares the training distribution and the
  // renamed copy serves as the decorrelated set.
  bool decorrelate_test = false;
};

/// Structural choices composed into class templates. Class c takes option
/// bit k of c for choice k, so every structural token is shared by half of
/// the classes and only the combination identifies the label. `$x` marks an
/// identifier slot (same letter => same identifier).
struct StructuralChoice {
  std::string_view off;
  std::string_view on;
};

inline constexpr std::array<StructuralChoice, 4> kChoices = {{
    // loop form
    {"for ($i = 0; $i < $n; $i = $i + 1) { ", "$i = 0; while ($i < $n) { "},
    // loop body
    {"$s = $s + $a[$i]; ", "if ($a[$i] > $s) { $s = $a[$i]; } "},
    // result
    {"return $s;", "$a[0] = $s;"},
    // trailer
    {"", " print($s);"},
}};

inline constexpr std::size_t kMaxClasses = std::size_t{1} << kChoices.size();

/// Template of class `label`; distinct classes have distinct token-kind
/// skeletons.
inline std::string class_template(int label) {
  const auto bit = [label](std::size_t k) { return ((label >> k) & 1) != 0; };
  std::string t = "int $s = 0; ";
  t += bit(0) ? kChoices[0].on : kChoices[0].off;
  t += bit(1) ? kChoices[1].on : kChoices[1].off;
  if (bit(0)) t += "$i = $i + 1; ";
  t += "} ";
  t += bit(2) ? kChoices[2].on : kChoices[2].off;
  t += bit(3) ? kChoices[3].on : kChoices[3].off;
  return t;
}

/// Distinct slot letters of a template, in first-occurrence order.
inline std::vector<char> template_slots(std::string_view tmpl) {
  std::vector<char> slots;
  for (std::size_t i = 0; i + 1 < tmpl.size(); ++i) {
    if (tmpl[i] != '$') continue;
    const char c = tmpl[i + 1];
    if (std::find(slots.begin(), slots.end(), c) == slots.end()) slots.push_back(c);
  }
  return slots;
}

inline std::string fill_template(std::string_view tmpl, const std::vector<char>& slots,
                                 const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '$' && i + 1 < tmpl.size()) {
      const auto it = std::find(slots.begin(), slots.end(), tmpl[i + 1]);
      out += names[static_cast<std::size_t>(it - slots.begin())];
      ++i;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

inline void validate(const GenSpec& spec) {
  if (spec.n_classes <= 0) throw SpecError("n_classes", "must be positive");
  if (static_cast<std::size_t>(spec.n_classes) > kMaxClasses) {
    throw SpecError("n_classes", "at most " + std::to_string(kMaxClasses) +
                                     " structural templates are available");
  }
  if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) throw SpecError("rho", "must lie in [0, 1]");
  if (spec.n_train == 0) throw SpecError("n_train", "must be positive");
  std::size_t max_slots = 0;
  for (int c = 0; c < spec.n_classes; ++c) {
    max_slots = std::max(max_slots, template_slots(class_template(c)).size());
  }
  if (spec.pool_size < max_slots) {
    throw SpecError("pool_size", "must be at least " + std::to_string(max_slots));
  }
}

/// Pairwise-disjoint identifier pools, one per class.
inline std::vector<std::vector<std::string>> make_class_pools(int n_classes, std::size_t pool_size,
                                                              Rng& rng) {
  static constexpr std::array<std::string_view, 20> kOnsets = {
      "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "pl"};
  static constexpr std::array<std::string_view, 6> kVowels = {"a", "e", "i", "o", "u", "y"};
  std::unordered_set<std::string> taken;
  std::vector<std::vector<std::string>> pools(static_cast<std::size_t>(n_classes));
  for (auto& pool : pools) {
    while (pool.size() < pool_size) {
      std::string name;
      const std::size_t syllables = 2 + rng.below(2);
      for (std::size_t s = 0; s < syllables; ++s) {
        name += kOnsets[rng.below(kOnsets.size())];
        name += kVowels[rng.below(kVowels.size())];
      }
      if (!lex::is_valid_identifier(name) || lex::is_abstraction_placeholder(name)) continue;
      if (taken.insert(name).second) pool.push_back(std::move(name));
    }
  }
  return pools;
}

struct Splits {
  Dataset train;
  Dataset valid;
  Dataset test;
  std::vector<std::vector<std::string>> class_pools;
};

namespace detail {

// Draw `k` distinct names from `pool`.
inline std::vector<std::string> draw_distinct(const std::vector<std::string>& pool, std::size_t k,
                                              Rng& rng) {
  std::vector<std::string> names;
  while (names.size() < k) {
    const std::string& cand = pool[rng.below(pool.size())];
    if (std::find(names.begin(), names.end(), cand) == names.end()) names.push_back(cand);
  }
  return names;
}

inline std::string sample_id(std::string_view split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(split) + "-" + buf;
}

}  // namespace detail

inline Splits generate_dataset(const GenSpec& spec) {
  validate(spec);
  const std::uint64_t root = stream_seed(spec.seed, Stream::kDataset);

  Splits out;
  {
    Rng pool_rng(split_seed(root, ~std::uint64_t{0}));
    out.class_pools = make_class_pools(spec.n_classes, spec.pool_size, pool_rng);
  }
  std::vector<std::string> global_pool;
  for (const auto& p : out.class_pools) global_pool.insert(global_pool.end(), p.begin(), p.end());

  std::uint64_t index = 0;
  auto make_split = [&](std::string_view name, std::size_t count, double rho) {
    Dataset split;
    split.reserve(count);
    for (std::size_t i = 0; i < count; ++i, ++index) {
      Rng rng(split_seed(root, index));
      const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_classes)));
      const std::string tmpl = class_template(label);
      const std::vector<char> slots = template_slots(tmpl);
      const bool correlated = rng.bernoulli(rho);
      const auto& pool = correlated ? out.class_pools[static_cast<std::size_t>(label)] : global_pool;
      const std::vector<std::string> names = detail::draw_distinct(pool, slots.size(), rng);
      split.push_back(CodeSample{detail::sample_id(name, i), fill_template(tmpl, slots, names), label});
    }
    return split;
  };
  out.train = make_split("train", spec.n_train, spec.rho);
  out.valid = make_split("valid", spec.n_valid, spec.rho);
  out.test = make_split("test", spec.n_test, spec.decorrelate_test ? 0.0 : spec.rho);
  return out;
}

}  // namespace cream::synth
