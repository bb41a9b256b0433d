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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cream/error.hpp"
#include "cream/lexer.hpp"
#include "cream/model.hpp"
#include "cream/rng.hpp"
#include "cream/views.hpp"

// Three-branch training over shared parameters and counterfactual inference
// that removes the direct effect of identifier names from the prediction.
//
// Branches: f (structure only), k (full snippet), t (names only). Training
// minimizes L_f + L_r + L_t where Z_r is Z_k during the first I_fusion
// iterations and the average of the three branch scores afterwards. At
// inference the score is Z_f + Z_k + (1 - alpha) * Z_t.

namespace cream::cf {

using model::Logits;

/// How a model is trained and scored.
enum class Objective {
  kCounterfactual,  // three branches, deferred fusion, counterfactual scoring
  kCombinedOnly,    // conventional model: L = CE(Z_k), predict argmax Z_k
};

inline std::string_view to_string(Objective o) {
  return o == Objective::kCounterfactual ? "counterfactual" : "combined_only";
}

struct TrainConfig {
  double alpha = 0.6;
  double fusion_fraction = 0.10;
  std::size_t epochs = 3;
  double lr = 0.1;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 32;
  std::size_t max_len = 256;
  Objective objective = Objective::kCounterfactual;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw SpecError("alpha", "must lie in [0, 1]");
    if (!(fusion_fraction >= 0.0 && fusion_fraction <= 1.0)) {
      throw SpecError("fusion_fraction", "must lie in [0, 1]");
    }
    if (!(lr > 0.0)) throw SpecError("lr", "must be positive");
    if (embed_dim == 0) throw SpecError("embed_dim", "must be positive");
    if (max_len == 0) throw SpecError("max_len", "must be positive");
  }

  std::size_t total_iterations(std::size_t n_train) const { return epochs * n_train; }

  std::size_t fusion_iteration(std::size_t n_train) const {
    return static_cast<std::size_t>(
        std::floor(fusion_fraction * static_cast<double>(total_iterations(n_train))));
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ---------------------------------------------------------------------------
// Causal-effect arithmetic

namespace detail {
inline void require_same_shape(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

inline std::vector<double> minus(std::span<const double> a, std::span<const double> b) {
  require_same_shape(a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}
}  // namespace detail

/// Total effect: outcome in the factual world minus the fully
/// counterfactual (all-empty-input) world.
inline double te(double r_fact, double r_cf) { return r_fact - r_cf; }
inline std::vector<double> te(std::span<const double> r_fact, std::span<const double> r_cf) {
  return detail::minus(r_fact, r_cf);
}

/// Natural direct effect of the names: R(f*, k*, t) - R(f*, k*, t*).
inline double nde(double r_t_only, double r_null) { return r_t_only - r_null; }
inline std::vector<double> nde(std::span<const double> r_t_only, std::span<const double> r_null) {
  return detail::minus(r_t_only, r_null);
}

/// Total indirect effect, TE - NDE.
inline double tie(double te_val, double nde_val) { return te_val - nde_val; }
inline std::vector<double> tie(std::span<const double> te_val, std::span<const double> nde_val) {
  return detail::minus(te_val, nde_val);
}

// ---------------------------------------------------------------------------
// Scores

/// Average of the three branch scores.
inline Logits fuse(std::span<const double> z_f, std::span<const double> z_k, std::span<const double> z_t) {
  detail::require_same_shape(z_f, z_k);
  detail::require_same_shape(z_f, z_t);
  Logits out(z_f.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_f[i] + z_k[i] + z_t[i]) / 3.0;
  return out;
}

/// Z_f + Z_k + (1 - alpha) * Z_t.
inline Logits cf_combine(std::span<const double> z_f, std::span<const double> z_k, std::span<const double> z_t,
                         double alpha) {
  detail::require_same_shape(z_f, z_k);
  detail::require_same_shape(z_f, z_t);
  Logits out(z_f.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z_f[i] + z_k[i] + (1.0 - alpha) * z_t[i];
  return out;
}

/// Branch views encoded against a vocabulary.
struct EncodedViews {
  std::vector<model::TokenId> f;
  std::vector<model::TokenId> t;
  std::vector<model::TokenId> k;
};

inline EncodedViews encode(const model::Vocab& vocab, const views::BranchViews& v, std::size_t max_len) {
  return EncodedViews{vocab.encode(v.f_tokens, max_len), vocab.encode(v.t_tokens, max_len),
                      vocab.encode(v.k_tokens, max_len)};
}

struct BranchScores {
  Logits z_f;
  Logits z_k;
  Logits z_t;
};

inline BranchScores branch_scores(const model::ModelParams& params, const EncodedViews& views) {
  return BranchScores{model::forward(params, views.f), model::forward(params, views.k),
                      model::forward(params, views.t)};
}

/// Counterfactual score of one snippet. A snippet without user identifiers
/// gets Z_t = 0: the empty naming input scores uniformly over classes.
inline Logits cf_infer(const model::ModelParams& params, const EncodedViews& views, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw SpecError("alpha", "must lie in [0, 1]");
  BranchScores s = branch_scores(params, views);
  if (views.t.empty()) s.z_t.assign(params.classes(), 0.0);
  return cf_combine(s.z_f, s.z_k, s.z_t, alpha);
}

// ---------------------------------------------------------------------------
// Training

struct LossRecord {
  double l_f = 0.0;
  double l_r = 0.0;
  double l_t = 0.0;
  double l_total = 0.0;
};

/// Everything computed in one training iteration, before the update.
struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t sample = 0;  // index into the training set
  bool fused = false;
  BranchScores scores;
  Logits z_r;
  LossRecord loss;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_l_f = 0.0;
  double mean_l_r = 0.0;
  double mean_l_t = 0.0;
  double valid_accuracy = std::nan("");  // NaN when the validation set is empty
};

struct TrainObserver {
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainedModel {
  model::ModelParams params;
  model::Vocab vocab;
  TrainConfig config;
  int n_classes = 0;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Vocabulary of the training split: every k- and f-view token in first
/// occurrence order after the reserved entries.
inline model::Vocab build_vocab(std::span<const views::BranchViews> train_views) {
  model::Vocab vocab;
  for (const auto& v : train_views) {
    for (const auto& tok : v.k_tokens) vocab.add(tok);
    for (const auto& tok : v.f_tokens) vocab.add(tok);
  }
  return vocab;
}

inline EncodedViews encode_sample(const TrainedModel& m, const CodeSample& sample) {
  return encode(m.vocab, views::build_views(sample.code), m.config.max_len);
}

/// Scores used for prediction under the model's objective.
inline Logits score(const TrainedModel& m, const EncodedViews& views, double alpha) {
  if (m.config.objective == Objective::kCombinedOnly) return model::forward(m.params, views.k);
  return cf_infer(m.params, views, alpha);
}

inline int predict(const TrainedModel& m, const EncodedViews& views, double alpha) {
  return static_cast<int>(model::argmax(score(m, views, alpha)));
}

inline int predict(const TrainedModel& m, const CodeSample& sample, double alpha) {
  return predict(m, encode_sample(m, sample), alpha);
}

inline int infer_class_count(std::span<const CodeSample> data) {
  int c = 0;
  for (const auto& s : data) {
    if (s.label < 0) throw IndexError("negative label in sample " + s.id);
    c = std::max(c, s.label + 1);
  }
  return c;
}

/// Scores, losses and the gradient of L_total for one sample. `grads` is
/// overwritten. Under kCombinedOnly only Z_k is computed and L_total = L_r.
inline IterationRecord multitask_step(const model::ModelParams& params, const EncodedViews& ev, int label,
                                      bool fused, Objective objective, model::Gradients& grads) {
  const bool three_branch = objective == Objective::kCounterfactual;
  IterationRecord rec;
  rec.fused = three_branch && fused;
  rec.scores.z_k = model::forward(params, ev.k);
  if (three_branch) {
    rec.scores.z_f = model::forward(params, ev.f);
    // Same convention as cf_infer: no identifiers, no naming score.
    rec.scores.z_t = ev.t.empty() ? Logits(params.classes(), 0.0) : model::forward(params, ev.t);
    rec.z_r = rec.fused ? fuse(rec.scores.z_f, rec.scores.z_k, rec.scores.z_t) : rec.scores.z_k;
    rec.loss.l_f = model::cross_entropy(rec.scores.z_f, label);
    rec.loss.l_t = model::cross_entropy(rec.scores.z_t, label);
  } else {
    rec.z_r = rec.scores.z_k;
  }
  rec.loss.l_r = model::cross_entropy(rec.z_r, label);
  rec.loss.l_total = rec.loss.l_f + rec.loss.l_r + rec.loss.l_t;

  std::fill(grads.embedding.data.begin(), grads.embedding.data.end(), 0.0);
  std::fill(grads.weight.data.begin(), grads.weight.data.end(), 0.0);
  std::fill(grads.bias.begin(), grads.bias.end(), 0.0);

  // dL_r/dZ_r flows to Z_k alone before fusion and to each branch with
  // weight 1/3 after.
  const std::vector<double> g_r = model::cross_entropy_grad(rec.z_r, label);
  if (!three_branch) {
    model::accumulate_backward(params, ev.k, g_r, grads);
    return rec;
  }
  std::vector<double> g_f = model::cross_entropy_grad(rec.scores.z_f, label);
  std::vector<double> g_t = model::cross_entropy_grad(rec.scores.z_t, label);
  std::vector<double> g_k = g_r;
  if (rec.fused) {
    for (std::size_t c = 0; c < g_r.size(); ++c) {
      g_f[c] += g_r[c] / 3.0;
      g_t[c] += g_r[c] / 3.0;
      g_k[c] = g_r[c] / 3.0;
    }
  }
  model::accumulate_backward(params, ev.f, g_f, grads);
  model::accumulate_backward(params, ev.k, g_k, grads);
  if (!ev.t.empty()) model::accumulate_backward(params, ev.t, g_t, grads);
  return rec;
}

/// Multi-task training with deferred fusion. Iteration i (0-based, counted
/// over all epochs) uses Z_r = Z_k while i < I_fusion and the fused score
/// afterwards. One sample per iteration; sample order is reshuffled every
/// epoch from the shuffle stream of the seed.
inline TrainedModel train(std::span<const CodeSample> train_set, std::span<const CodeSample> valid_set,
                          const TrainConfig& config, int n_classes = 0,
                          const TrainObserver& observer = {}) {
  if (train_set.empty()) throw EmptyDataset();
  config.validate();
  if (n_classes <= 0) n_classes = std::max(infer_class_count(train_set), infer_class_count(valid_set));
  for (const auto& s : train_set) {
    if (s.label >= n_classes) throw IndexError("label out of range in sample " + s.id);
  }

  std::vector<views::BranchViews> train_views;
  train_views.reserve(train_set.size());
  for (const auto& s : train_set) train_views.push_back(views::build_views(s.code));

  TrainedModel m;
  m.vocab = build_vocab(train_views);
  m.config = config;
  m.n_classes = n_classes;
  {
    Rng init_rng(stream_seed(config.seed, Stream::kInit));
    m.params = model::init_params(m.vocab.size(), config.embed_dim, static_cast<std::size_t>(n_classes), init_rng);
  }

  std::vector<EncodedViews> encoded;
  encoded.reserve(train_views.size());
  for (const auto& v : train_views) encoded.push_back(encode(m.vocab, v, config.max_len));

  std::vector<EncodedViews> valid_encoded;
  valid_encoded.reserve(valid_set.size());
  for (const auto& s : valid_set) valid_encoded.push_back(encode_sample(m, s));

  const std::size_t n = train_set.size();
  const std::size_t fusion_at = config.fusion_iteration(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(stream_seed(config.seed, Stream::kShuffle));

  model::Gradients grads = model::zeros_like(m.params);
  std::size_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    LossRecord sum;
    for (std::size_t idx : order) {
      const EncodedViews& ev = encoded[idx];
      const int label = train_set[idx].label;

      IterationRecord rec = multitask_step(m.params, ev, label, iteration >= fusion_at, config.objective, grads);
      rec.iteration = iteration;
      rec.sample = idx;
      if (!std::isfinite(rec.loss.l_total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                           std::to_string(iteration));
      }
      if (observer.on_iteration) observer.on_iteration(rec);
      model::sgd_step(m.params, grads, config.lr);

      sum.l_f += rec.loss.l_f;
      sum.l_r += rec.loss.l_r;
      sum.l_t += rec.loss.l_t;
      ++iteration;
    }

    EpochRecord er;
    er.epoch = epoch;
    er.mean_l_f = sum.l_f / static_cast<double>(n);
    er.mean_l_r = sum.l_r / static_cast<double>(n);
    er.mean_l_t = sum.l_t / static_cast<double>(n);
    if (!valid_encoded.empty()) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < valid_encoded.size(); ++i) {
        correct += predict(m, valid_encoded[i], config.alpha) == valid_set[i].label;
      }
      er.valid_accuracy = static_cast<double>(correct) / static_cast<double>(valid_encoded.size());
    }
    if (observer.on_epoch) observer.on_epoch(er);
  }
  if (!model::all_finite(m.params)) throw NumericError("non-finite parameters after training");
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::string_view kCheckpointMagic = "CREAMCK1";

/// Binary checkpoint: magic, class count, config as bit-exact fields,
/// vocabulary tokens, then the parameter block of model::write_params.
inline void save_checkpoint(std::ostream& os, const TrainedModel& m) {
  using namespace model::io;
  os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  write_u64(os, static_cast<std::uint64_t>(m.n_classes));
  write_doubles(os, std::vector<double>{m.config.alpha, m.config.fusion_fraction, m.config.lr});
  write_u64(os, m.config.epochs);
  write_u64(os, m.config.seed);
  write_u64(os, m.config.embed_dim);
  write_u64(os, m.config.max_len);
  write_u64(os, static_cast<std::uint64_t>(m.config.objective));
  write_u64(os, m.vocab.size());
  for (const auto& tok : m.vocab.tokens()) write_string(os, tok);
  model::write_params(os, m.params);
}

inline TrainedModel load_checkpoint(std::istream& is) {
  using namespace model::io;
  std::string magic(kCheckpointMagic.size(), '\0');
  if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kCheckpointMagic) {
    throw IoError("not a checkpoint file");
  }
  TrainedModel m;
  m.n_classes = static_cast<int>(read_u64(is));
  std::vector<double> reals(3);
  read_doubles(is, reals);
  m.config.alpha = reals[0];
  m.config.fusion_fraction = reals[1];
  m.config.lr = reals[2];
  m.config.epochs = read_u64(is);
  m.config.seed = read_u64(is);
  m.config.embed_dim = read_u64(is);
  m.config.max_len = read_u64(is);
  const std::uint64_t objective = read_u64(is);
  if (objective > 1) throw IoError("corrupt checkpoint: unknown objective");
  m.config.objective = static_cast<Objective>(objective);
  const std::uint64_t vocab_size = read_u64(is);
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(read_string(is));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i < model::Vocab::kReserved.size()) {
      if (tokens[i] != model::Vocab::kReserved[i]) throw IoError("corrupt checkpoint: reserved tokens");
      continue;
    }
    if (m.vocab.add(tokens[i]) != i) throw IoError("corrupt checkpoint: duplicate vocabulary entry");
  }
  m.params = model::read_params(is);
  if (m.params.vocab_size() != m.vocab.size() || m.params.classes() != static_cast<std::size_t>(m.n_classes) ||
      m.params.dim() != m.config.embed_dim) {
    throw IoError("corrupt checkpoint: shape does not match vocabulary/config");
  }
  return m;
}

inline void save_checkpoint(const std::string& path, const TrainedModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  save_checkpoint(os, m);
  if (!os) throw IoError("failed writing " + path);
}

inline TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return load_checkpoint(is);
}

}  // namespace cream::cf
