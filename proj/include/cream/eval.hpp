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
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cream/counterfactual.hpp"
#include "cream/error.hpp"
#include "cream/lexer.hpp"
#include "cream/rng.hpp"
#include "cream/views.hpp"

namespace cream::eval {

/// Run fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; callers write into slot i so results keep input
/// order regardless of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
  double macro_f1 = 0.0;
  std::size_t n = 0;
};

/// Accuracy and per-class F1 from aligned label/prediction vectors. F1 is 0
/// for a class whose precision + recall is 0.
inline MetricsReport metrics_from_predictions(std::span<const int> labels, std::span<const int> predictions,
                                              int n_classes) {
  if (labels.empty()) throw EmptyDataset();
  if (labels.size() != predictions.size()) throw ShapeError("labels and predictions differ in length");
  const auto c = static_cast<std::size_t>(n_classes);
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    if (y >= c || p >= c) throw IndexError("class index outside [0, n_classes)");
    if (y == p) {
      ++correct;
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  MetricsReport r;
  r.n = labels.size();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  r.per_class_f1.resize(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    const double denom = static_cast<double>(2 * tp[k] + fp[k] + fn[k]);
    // 2PR/(P+R) simplifies to 2TP/(2TP+FP+FN).
    r.per_class_f1[k] = tp[k] == 0 ? 0.0 : 2.0 * static_cast<double>(tp[k]) / denom;
  }
  double sum = 0.0;
  for (double f : r.per_class_f1) sum += f;
  r.macro_f1 = c == 0 ? 0.0 : sum / static_cast<double>(c);
  return r;
}

inline std::vector<int> predict_all(const cf::TrainedModel& m, std::span<const CodeSample> data, double alpha,
                                    std::size_t workers = 1) {
  std::vector<int> pred(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) { pred[i] = cf::predict(m, data[i], alpha); });
  return pred;
}

inline MetricsReport evaluate(const cf::TrainedModel& m, std::span<const CodeSample> data, double alpha,
                              std::size_t workers = 1) {
  if (data.empty()) throw EmptyDataset();
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.label);
  const std::vector<int> pred = predict_all(m, data, alpha, workers);
  return metrics_from_predictions(labels, pred, m.n_classes);
}

struct RobustnessReport {
  double acc_original = 0.0;
  double acc_transformed = 0.0;
  double gap = 0.0;
};

inline void require_aligned(std::span<const CodeSample> a, std::span<const CodeSample> b) {
  if (a.size() != b.size()) {
    throw MisalignedSets("sets differ in size: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id) throw MisalignedSets("sample " + std::to_string(i) + ": " + a[i].id + " vs " + b[i].id);
  }
}

inline RobustnessReport robustness(const cf::TrainedModel& m, std::span<const CodeSample> original,
                                   std::span<const CodeSample> transformed, double alpha,
                                   std::size_t workers = 1) {
  require_aligned(original, transformed);
  RobustnessReport r;
  r.acc_original = evaluate(m, original, alpha, workers).accuracy;
  r.acc_transformed = evaluate(m, transformed, alpha, workers).accuracy;
  r.gap = r.acc_original - r.acc_transformed;
  return r;
}

// ---------------------------------------------------------------------------
// Greedy identifier-substitution attack

inline constexpr int kCandidatesPerIdentifier = 32;
inline constexpr std::size_t kUnlimitedBudget = std::numeric_limits<std::size_t>::max();

struct Substitution {
  std::string original;
  std::string replacement;
  double margin_before = 0.0;
  double margin_after = 0.0;
};

struct AttackOutcome {
  bool flipped = false;
  std::vector<Substitution> trace;
  std::string final_code;
};

/// Score of the true class minus the best other class.
inline double margin(std::span<const double> z, int label) {
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < z.size(); ++c) {
    if (static_cast<int>(c) != label) best_other = std::max(best_other, z[c]);
  }
  return z[static_cast<std::size_t>(label)] - best_other;
}

/// Visit distinct identifiers in order of first occurrence; for each, draw
/// up to kCandidatesPerIdentifier names from `pool` and commit the first one
/// that strictly lowers the true-class margin. Stops when the prediction
/// flips or `budget` substitutions have been committed.
inline AttackOutcome attack_greedy(const cf::TrainedModel& m, const CodeSample& sample,
                                   const std::vector<std::string>& pool, std::size_t budget, double alpha,
                                   Rng& rng) {
  const lex::TokenList toks = lex::tokenize(sample.code);
  const lex::IdentifierSet ids = lex::classify_identifiers(toks);
  const std::vector<std::string> originals = views::distinct_identifiers(toks, ids);

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

  std::map<std::string, std::string> current;
  for (const auto& name : originals) current.emplace(name, name);
  auto render = [&] {
    return lex::substitute(toks, ids, [&](std::size_t i) { return current.at(toks[i].text); }).render();
  };
  auto scores_of = [&](const std::string& code) {
    return cf::score(m, cf::encode(m.vocab, views::build_views(code), m.config.max_len), alpha);
  };

  AttackOutcome out;
  out.final_code = sample.code;
  if (budget == 0 || pool.empty()) return out;

  double best = margin(scores_of(out.final_code), sample.label);
  for (const auto& name : originals) {
    if (out.trace.size() >= budget) break;
    for (int attempt = 0; attempt < kCandidatesPerIdentifier; ++attempt) {
      const std::string& cand = pool[rng.below(pool.size())];
      if (fixed.contains(cand)) continue;
      const bool taken = std::any_of(current.begin(), current.end(),
                                     [&](const auto& kv) { return kv.second == cand; });
      if (taken) continue;
      const std::string previous = current[name];
      current[name] = cand;
      const std::string code = render();
      const model::Logits z = scores_of(code);
      const double mg = margin(z, sample.label);
      if (mg < best) {
        out.trace.push_back(Substitution{name, cand, best, mg});
        out.final_code = code;
        best = mg;
        if (static_cast<int>(model::argmax(z)) != sample.label) {
          out.flipped = true;
          return out;
        }
        break;
      }
      current[name] = previous;
    }
  }
  return out;
}

struct AttackResult {
  std::size_t n_attacked = 0;
  std::size_t n_flipped = 0;
  std::optional<double> asr;  // empty when nothing was attacked
};

/// Attack every initially-correct sample. Sample i draws from stream
/// split_seed(seed, i), so the result is independent of `workers`.
inline AttackResult attack_suite(const cf::TrainedModel& m, std::span<const CodeSample> data,
                                 const std::vector<std::string>& pool, double alpha, std::size_t budget,
                                 std::uint64_t seed, std::size_t workers = 1) {
  if (data.empty()) throw EmptyDataset();
  // 0 = skipped (initially wrong), 1 = survived, 2 = flipped
  std::vector<int> status(data.size(), 0);
  parallel_for(data.size(), workers, [&](std::size_t i) {
    if (cf::predict(m, data[i], alpha) != data[i].label) return;
    Rng rng(split_seed(seed, i));
    status[i] = attack_greedy(m, data[i], pool, budget, alpha, rng).flipped ? 2 : 1;
  });
  AttackResult r;
  for (int s : status) {
    r.n_attacked += s != 0;
    r.n_flipped += s == 2;
  }
  if (r.n_attacked > 0) r.asr = static_cast<double>(r.n_flipped) / static_cast<double>(r.n_attacked);
  return r;
}

}  // namespace cream::eval
