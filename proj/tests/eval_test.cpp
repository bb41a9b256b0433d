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

#include <atomic>
#include <vector>

#include "cream/counterfactual.hpp"
#include "cream/eval.hpp"
#include "cream/synthgen.hpp"
#include "cream/views.hpp"

namespace cream::eval {
namespace {

TEST(Metrics, ClassF1Example) {
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<int> preds = {0, 1, 1, 1};
  const MetricsReport r = metrics_from_predictions(labels, preds, 2);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_NEAR(r.per_class_f1[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.per_class_f1[1], 0.8, 1e-12);
}

TEST(Metrics, AllCorrectAndAllWrong) {
  const std::vector<int> labels = {0, 1, 2, 1};
  const MetricsReport good = metrics_from_predictions(labels, labels, 3);
  EXPECT_EQ(good.accuracy, 1.0);
  for (double f : good.per_class_f1) EXPECT_EQ(f, 1.0);
  const std::vector<int> wrong = {1, 2, 0, 0};
  const MetricsReport bad = metrics_from_predictions(labels, wrong, 3);
  EXPECT_EQ(bad.accuracy, 0.0);
  for (double f : bad.per_class_f1) EXPECT_EQ(f, 0.0);
  EXPECT_THROW(metrics_from_predictions(std::vector<int>{}, std::vector<int>{}, 3), EmptyDataset);
  EXPECT_THROW(metrics_from_predictions(labels, std::vector<int>{0}, 3), ShapeError);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 7, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

struct Fixture {
  synth::Splits splits;
  Dataset transformed;
  std::vector<std::string> pool;
  cf::TrainedModel model;
};

const Fixture& fixture(cf::Objective objective) {
  auto build = [](cf::Objective obj) {
    Fixture f;
    synth::GenSpec spec;
    spec.n_valid = 50;
    spec.n_test = 150;
    spec.seed = 2;
    f.splits = synth::generate_dataset(spec);
    f.pool = views::identifier_pool(f.splits.train);
    f.transformed = views::build_transformed_set(f.splits.test, f.pool, 9).samples;
    cf::TrainConfig cfg;
    cfg.objective = obj;
    cfg.seed = 2;
    f.model = cf::train(f.splits.train, f.splits.valid, cfg, spec.n_classes);
    return f;
  };
  static const Fixture cfm = build(cf::Objective::kCounterfactual);
  static const Fixture base = build(cf::Objective::kCombinedOnly);
  return objective == cf::Objective::kCounterfactual ? cfm : base;
}

TEST(Robustness, GapIsOriginalMinusTransformed) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  const RobustnessReport r = robustness(f.model, f.splits.test, f.transformed, 0.6);
  EXPECT_EQ(r.gap, r.acc_original - r.acc_transformed);
  EXPECT_EQ(r.acc_original, evaluate(f.model, f.splits.test, 0.6).accuracy);
  // A set compared with itself has no gap.
  EXPECT_EQ(robustness(f.model, f.splits.test, f.splits.test, 0.6).gap, 0.0);
}

TEST(Robustness, MisalignedSetsThrow) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  Dataset shorter(f.transformed.begin(), f.transformed.end() - 1);
  EXPECT_THROW(robustness(f.model, f.splits.test, shorter, 0.6), MisalignedSets);
  Dataset reordered = f.transformed;
  std::swap(reordered[0], reordered[1]);
  EXPECT_THROW(robustness(f.model, f.splits.test, reordered, 0.6), MisalignedSets);
}

TEST(Evaluate, WorkerCountDoesNotChangeResults) {
  const Fixture& f = fixture(cf::Objective::kCounterfactual);
  EXPECT_EQ(predict_all(f.model, f.splits.test, 0.6, 1), predict_all(f.model, f.splits.test, 0.6, 5));
}

TEST(Attack, ZeroBudgetNeverFlips) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  const AttackResult r = attack_suite(f.model, f.splits.test, f.pool, 0.6, 0, 1);
  EXPECT_EQ(r.n_flipped, 0u);
  ASSERT_TRUE(r.asr.has_value());
  EXPECT_EQ(*r.asr, 0.0);
}

TEST(Attack, NothingAttackedGivesNoRate) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  Dataset wrong;
  for (const auto& s : f.splits.test) {
    if (cf::predict(f.model, s, 0.6) != s.label) wrong.push_back(s);
  }
  if (wrong.empty()) {
    CodeSample s = f.splits.test.front();
    s.label = (cf::predict(f.model, s, 0.6) + 1) % f.model.n_classes;
    wrong.push_back(s);
  }
  const AttackResult r = attack_suite(f.model, wrong, f.pool, 0.6, kUnlimitedBudget, 1);
  EXPECT_EQ(r.n_attacked, 0u);
  EXPECT_FALSE(r.asr.has_value());
}

TEST(Attack, IdenticalNameEmbeddingsCannotFlip) {
  cf::TrainedModel m = fixture(cf::Objective::kCombinedOnly).model;
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  // Give every pool name the same embedding row: renames leave scores unchanged.
  const auto first = m.vocab.lookup(f.pool.front());
  for (const auto& name : f.pool) {
    const auto id = m.vocab.lookup(name);
    for (std::size_t j = 0; j < m.params.dim(); ++j) m.params.embedding(id, j) = m.params.embedding(first, j);
  }
  const AttackResult r = attack_suite(m, f.splits.test, f.pool, 0.6, kUnlimitedBudget, 3);
  EXPECT_GT(r.n_attacked, 0u);
  EXPECT_EQ(r.n_flipped, 0u);
}

TEST(Attack, DeterministicAndWorkerIndependent) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  const AttackResult a = attack_suite(f.model, f.splits.test, f.pool, 0.6, kUnlimitedBudget, 11, 1);
  const AttackResult b = attack_suite(f.model, f.splits.test, f.pool, 0.6, kUnlimitedBudget, 11, 1);
  const AttackResult c = attack_suite(f.model, f.splits.test, f.pool, 0.6, kUnlimitedBudget, 11, 6);
  EXPECT_EQ(a.n_attacked, b.n_attacked);
  EXPECT_EQ(a.n_flipped, b.n_flipped);
  EXPECT_EQ(a.n_flipped, c.n_flipped);
  EXPECT_EQ(a.asr, c.asr);
}

TEST(Attack, RateGrowsWithBudget) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  std::size_t previous = 0;
  for (std::size_t budget : {std::size_t{0}, std::size_t{1}, std::size_t{2}, std::size_t{4}, kUnlimitedBudget}) {
    const AttackResult r = attack_suite(f.model, f.splits.test, f.pool, 0.6, budget, 5);
    EXPECT_GE(r.n_flipped, previous) << "budget " << budget;
    previous = r.n_flipped;
  }
}

// Every flip is a real rename: same token kinds, consistent renaming, and
// the final code really is misclassified.
TEST(Attack, FlipsAreSoundRenames) {
  const Fixture& f = fixture(cf::Objective::kCombinedOnly);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < f.splits.test.size(); ++i) {
    const CodeSample& s = f.splits.test[i];
    if (cf::predict(f.model, s, 0.6) != s.label) continue;
    Rng rng(split_seed(21, i));
    const AttackOutcome out = attack_greedy(f.model, s, f.pool, kUnlimitedBudget, 0.6, rng);
    const auto before = lex::tokenize(s.code);
    const auto after = lex::tokenize(out.final_code);
    ASSERT_EQ(before.size(), after.size());
    std::map<std::string, std::string> seen;
    for (std::size_t j = 0; j < before.size(); ++j) {
      ASSERT_EQ(before[j].kind, after[j].kind);
      if (before[j].text != after[j].text) {
        const auto [it, fresh] = seen.emplace(before[j].text, after[j].text);
        EXPECT_EQ(it->second, after[j].text);
      }
    }
    double last = std::numeric_limits<double>::infinity();
    for (const auto& sub : out.trace) {
      EXPECT_LT(sub.margin_after, sub.margin_before);
      EXPECT_LE(sub.margin_before, last);
      last = sub.margin_after;
    }
    CodeSample renamed = s;
    renamed.code = out.final_code;
    EXPECT_EQ(cf::predict(f.model, renamed, 0.6) != s.label, out.flipped);
    flips += out.flipped;
  }
  EXPECT_GT(flips, 0u);
}

}  // namespace
}  // namespace cream::eval
