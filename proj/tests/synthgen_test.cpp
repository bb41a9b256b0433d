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

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cream/lexer.hpp"
#include "cream/synthgen.hpp"
#include "cream/views.hpp"

namespace cream::synth {
namespace {

std::vector<lex::TokenKind> skeleton(const std::string& code) {
  std::vector<lex::TokenKind> out;
  for (const auto& t : lex::tokenize(code)) out.push_back(t.kind);
  return out;
}

// Class pool index of every user identifier in a sample (-1: not pooled).
std::vector<int> pools_of(const CodeSample& s, const std::unordered_map<std::string, int>& owner) {
  std::vector<int> out;
  for (const auto& name : views::build_views(s.code).t_tokens) {
    const auto it = owner.find(name);
    out.push_back(it == owner.end() ? -1 : it->second);
  }
  return out;
}

std::unordered_map<std::string, int> owners(const Splits& s) {
  std::unordered_map<std::string, int> owner;
  for (std::size_t c = 0; c < s.class_pools.size(); ++c) {
    for (const auto& name : s.class_pools[c]) owner.emplace(name, static_cast<int>(c));
  }
  return owner;
}

TEST(GenerateDataset, SplitSizes) {
  GenSpec spec;
  spec.seed = 3;
  const Splits s = generate_dataset(spec);
  EXPECT_EQ(s.train.size(), 2000u);
  EXPECT_EQ(s.valid.size(), 500u);
  EXPECT_EQ(s.test.size(), 500u);
}

TEST(GenerateDataset, PoolsAreDisjointAndValid) {
  GenSpec spec;
  spec.seed = 4;
  const Splits s = generate_dataset(spec);
  ASSERT_EQ(s.class_pools.size(), 8u);
  std::set<std::string> all;
  for (const auto& pool : s.class_pools) {
    EXPECT_EQ(pool.size(), spec.pool_size);
    for (const auto& name : pool) {
      EXPECT_TRUE(lex::is_valid_identifier(name));
      EXPECT_TRUE(all.insert(name).second) << name;
    }
  }
}

TEST(GenerateDataset, RhoOneDrawsOnlyFromClassPool) {
  GenSpec spec;
  spec.rho = 1.0;
  spec.seed = 5;
  const Splits s = generate_dataset(spec);
  const auto owner = owners(s);
  for (const auto& sample : s.train) {
    for (int p : pools_of(sample, owner)) EXPECT_EQ(p, sample.label) << sample.code;
  }
}

TEST(GenerateDataset, EverySampleLexesWithLabelInRange) {
  GenSpec spec;
  spec.n_classes = 16;
  spec.seed = 6;
  const Splits s = generate_dataset(spec);
  for (const auto* split : {&s.train, &s.valid, &s.test}) {
    for (const auto& sample : *split) {
      EXPECT_NO_THROW(lex::tokenize(sample.code));
      EXPECT_GE(sample.label, 0);
      EXPECT_LT(sample.label, 16);
    }
  }
}

TEST(GenerateDataset, StructureDeterminesLabel) {
  GenSpec spec;
  spec.n_classes = 16;
  spec.seed = 7;
  const Splits s = generate_dataset(spec);
  std::map<int, std::vector<lex::TokenKind>> skel;
  std::map<std::vector<std::string>, int> f_view_label;
  for (const auto& sample : s.train) {
    const auto k = skeleton(sample.code);
    const auto [it, fresh] = skel.emplace(sample.label, k);
    if (!fresh) {
      EXPECT_EQ(it->second, k);
    }
    // The f-view alone identifies the label.
    const auto f = views::build_views(sample.code).f_tokens;
    const auto [fit, ffresh] = f_view_label.emplace(f, sample.label);
    if (!ffresh) {
      EXPECT_EQ(fit->second, sample.label);
    }
  }
  std::set<std::vector<lex::TokenKind>> distinct;
  for (const auto& [label, k] : skel) distinct.insert(k);
  EXPECT_EQ(distinct.size(), skel.size());
  EXPECT_EQ(skel.size(), 16u);
}

TEST(GenerateDataset, DeterministicUnderSeed) {
  GenSpec spec;
  spec.n_train = 300;
  spec.seed = 11;
  const Splits a = generate_dataset(spec);
  const Splits b = generate_dataset(spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  spec.seed = 12;
  EXPECT_NE(generate_dataset(spec).train, a.train);
}

TEST(GenerateDataset, DecorrelatedTestOption) {
  GenSpec spec;
  spec.rho = 1.0;
  spec.decorrelate_test = true;
  spec.seed = 13;
  const Splits s = generate_dataset(spec);
  const auto owner = owners(s);
  std::size_t off_class = 0;
  for (const auto& sample : s.test) {
    for (int p : pools_of(sample, owner)) off_class += p != sample.label;
  }
  EXPECT_GT(off_class, 0u);
}

// Mutual information (nats) between the class pool of each sample's first
// identifier and its label.
double mutual_information(const std::vector<std::pair<int, int>>& pairs, int k) {
  std::vector<std::vector<double>> joint(k, std::vector<double>(k, 0.0));
  for (const auto& [pool, label] : pairs) joint[pool][label] += 1.0;
  const double n = static_cast<double>(pairs.size());
  std::vector<double> pa(k, 0.0), pb(k, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      joint[i][j] /= n;
      pa[i] += joint[i][j];
      pb[j] += joint[i][j];
    }
  }
  double mi = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (joint[i][j] > 0) mi += joint[i][j] * std::log(joint[i][j] / (pa[i] * pb[j]));
    }
  }
  return mi;
}

double label_entropy(const std::vector<std::pair<int, int>>& pairs, int k) {
  std::vector<double> p(k, 0.0);
  for (const auto& [pool, label] : pairs) p[label] += 1.0;
  double h = 0.0;
  for (double c : p) {
    if (c > 0) h -= (c / pairs.size()) * std::log(c / pairs.size());
  }
  return h;
}

std::vector<std::pair<int, int>> pool_label_pairs(const Splits& s) {
  const auto owner = owners(s);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& sample : s.train) pairs.emplace_back(pools_of(sample, owner).front(), sample.label);
  return pairs;
}

TEST(SpuriousCorrelation, MaximalAtRhoOne) {
  GenSpec spec;
  spec.rho = 1.0;
  spec.seed = 21;
  const auto pairs = pool_label_pairs(generate_dataset(spec));
  EXPECT_NEAR(mutual_information(pairs, spec.n_classes), label_entropy(pairs, spec.n_classes), 1e-12);
}

TEST(SpuriousCorrelation, IndependentAtRhoZero) {
  GenSpec spec;
  spec.rho = 0.0;
  spec.n_train = 2000;
  spec.seed = 22;
  const auto pairs = pool_label_pairs(generate_dataset(spec));
  const int k = spec.n_classes;
  std::vector<std::vector<double>> table(k, std::vector<double>(k, 0.0));
  for (const auto& [pool, label] : pairs) table[pool][label] += 1.0;
  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      rows[i] += table[i][j];
      cols[j] += table[i][j];
    }
  }
  const double n = static_cast<double>(pairs.size());
  double stat = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double e = rows[i] * cols[j] / n;
      stat += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  const boost::math::chi_squared dist((k - 1) * (k - 1));
  const double p = boost::math::cdf(boost::math::complement(dist, stat));
  EXPECT_GT(p, 0.01) << "chi2 = " << stat;
}

TEST(Validate, RejectsBadSpecs) {
  auto field_of = [](GenSpec spec) -> std::string {
    try {
      validate(spec);
    } catch (const SpecError& e) {
      return e.field();
    }
    return "";
  };
  GenSpec bad;
  bad.rho = 1.5;
  EXPECT_EQ(field_of(bad), "rho");
  bad = GenSpec{};
  bad.n_classes = 17;
  EXPECT_EQ(field_of(bad), "n_classes");
  bad = GenSpec{};
  bad.n_train = 0;
  EXPECT_EQ(field_of(bad), "n_train");
  bad = GenSpec{};
  bad.pool_size = 2;
  EXPECT_EQ(field_of(bad), "pool_size");
  EXPECT_EQ(field_of(GenSpec{}), "");
}

}  // namespace
}  // namespace cream::synth
