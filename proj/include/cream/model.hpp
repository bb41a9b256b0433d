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
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cream/error.hpp"
#include "cream/lexer.hpp"
#include "cream/rng.hpp"

// The shared basic classifier: token embedding, mean pooling, one linear
// layer, softmax cross-entropy. Every branch runs through the same
// ModelParams instance.

namespace cream::model {

using TokenId = std::uint32_t;
using Logits = std::vector<double>;

/// Token vocabulary. Ids 0..3 are reserved: <PAD>, <UNK>, <ID>, and VAR_*
/// (shared by every VAR_<n> abstraction placeholder).
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kIdMask = 2;
  static constexpr TokenId kVarPlaceholder = 3;
  static constexpr std::array<std::string_view, 4> kReserved = {"<PAD>", "<UNK>", "<ID>", "VAR_*"};

  Vocab() {
    for (std::string_view r : kReserved) add(std::string(r));
  }

  /// Adds `token` if new and returns its id. Placeholders map to their
  /// reserved id and are never added.
  TokenId add(const std::string& token) {
    if (const auto reserved = reserved_id(token)) return *reserved;
    auto [it, inserted] = index_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  TokenId lookup(std::string_view token) const {
    if (const auto reserved = reserved_id(token)) return *reserved;
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<TokenId> encode(std::span<const std::string> tokens, std::size_t max_len) const {
    std::vector<TokenId> ids;
    const std::size_t n = std::min(tokens.size(), max_len);
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(lookup(tokens[i]));
    return ids;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::optional<TokenId> reserved_id(std::string_view token) const {
    if (lex::is_abstraction_placeholder(token)) return kVarPlaceholder;
    // During construction the reserved names are not yet indexed.
    for (std::size_t i = 0; i < kReserved.size(); ++i) {
      if (token == kReserved[i] && tokens_.size() > i) return static_cast<TokenId>(i);
    }
    return std::nullopt;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelParams {
  Matrix embedding;  // |V| x d
  Matrix weight;     // d x C
  std::vector<double> bias;  // C

  std::size_t vocab_size() const noexcept { return embedding.rows; }
  std::size_t dim() const noexcept { return embedding.cols; }
  std::size_t classes() const noexcept { return bias.size(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;

inline ModelParams zeros_like(const ModelParams& p) {
  return ModelParams{Matrix(p.embedding.rows, p.embedding.cols), Matrix(p.weight.rows, p.weight.cols),
                     std::vector<double>(p.bias.size(), 0.0)};
}

/// E and W uniform in [-scale, scale]; bias zero.
inline ModelParams init_params(std::size_t vocab_size, std::size_t dim, std::size_t classes, Rng& rng,
                               double scale = 0.1) {
  ModelParams p{Matrix(vocab_size, dim), Matrix(dim, classes), std::vector<double>(classes, 0.0)};
  for (double& x : p.embedding.data) x = rng.uniform(-scale, scale);
  for (double& x : p.weight.data) x = rng.uniform(-scale, scale);
  return p;
}

inline bool all_finite(const ModelParams& p) {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(p.embedding.data.begin(), p.embedding.data.end(), finite) &&
         std::all_of(p.weight.data.begin(), p.weight.data.end(), finite) &&
         std::all_of(p.bias.begin(), p.bias.end(), finite);
}

/// Mean of the embedding rows of `ids`; the zero vector when `ids` is empty.
inline std::vector<double> mean_pool(const ModelParams& params, std::span<const TokenId> ids) {
  std::vector<double> h(params.dim(), 0.0);
  for (TokenId id : ids) {
    if (id >= params.vocab_size()) {
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(params.vocab_size()));
    }
    const auto row = params.embedding.row(id);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += row[j];
  }
  if (!ids.empty()) {
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (double& x : h) x *= inv;
  }
  return h;
}

inline Logits project(const ModelParams& params, std::span<const double> pooled) {
  Logits z = params.bias;
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    const auto w = params.weight.row(j);
    for (std::size_t c = 0; c < z.size(); ++c) z[c] += w[c] * pooled[j];
  }
  return z;
}

/// z = W^T * meanpool(E[ids]) + b. An empty sequence yields z = b.
inline Logits forward(const ModelParams& params, std::span<const TokenId> ids) {
  return project(params, mean_pool(params, ids));
}

inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.begin(), z.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

/// -log softmax(z)[label], evaluated as logsumexp(z - max) - (z[label] - max).
inline double cross_entropy(std::span<const double> z, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size()) {
    throw IndexError("label " + std::to_string(label) + " outside [0, " + std::to_string(z.size()) + ")");
  }
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - m);
  return std::log(sum) - (z[static_cast<std::size_t>(label)] - m);
}

/// dL/dz for L = cross_entropy(z, label): softmax(z) - onehot(label).
inline std::vector<double> cross_entropy_grad(std::span<const double> z, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size()) {
    throw IndexError("label " + std::to_string(label) + " outside [0, " + std::to_string(z.size()) + ")");
  }
  std::vector<double> g = softmax(z);
  g[static_cast<std::size_t>(label)] -= 1.0;
  return g;
}

/// Accumulate into `grads` the parameter gradient of <dz, forward(params, ids)>.
inline void accumulate_backward(const ModelParams& params, std::span<const TokenId> ids,
                                std::span<const double> dz, Gradients& grads) {
  const std::vector<double> h = mean_pool(params, ids);
  for (std::size_t c = 0; c < dz.size(); ++c) grads.bias[c] += dz[c];
  for (std::size_t j = 0; j < h.size(); ++j) {
    auto gw = grads.weight.row(j);
    for (std::size_t c = 0; c < dz.size(); ++c) gw[c] += h[j] * dz[c];
  }
  if (ids.empty()) return;
  // dL/dh = W dz, spread evenly over the pooled rows.
  std::vector<double> dh(params.dim(), 0.0);
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (std::size_t j = 0; j < dh.size(); ++j) {
    const auto w = params.weight.row(j);
    double s = 0.0;
    for (std::size_t c = 0; c < dz.size(); ++c) s += w[c] * dz[c];
    dh[j] = s * inv;
  }
  for (TokenId id : ids) {
    auto ge = grads.embedding.row(id);
    for (std::size_t j = 0; j < dh.size(); ++j) ge[j] += dh[j];
  }
}

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

/// Exact gradient of cross_entropy(forward(params, ids), label).
inline LossAndGrad backward(const ModelParams& params, std::span<const TokenId> ids, int label) {
  const Logits z = forward(params, ids);
  LossAndGrad out{cross_entropy(z, label), zeros_like(params)};
  accumulate_backward(params, ids, cross_entropy_grad(z, label), out.grads);
  return out;
}

inline void sgd_step(ModelParams& params, const Gradients& grads, double lr) {
  auto apply = [lr](std::vector<double>& p, const std::vector<double>& g) {
    if (p.size() != g.size()) throw ShapeError("gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  };
  apply(params.embedding.data, grads.embedding.data);
  apply(params.weight.data, grads.weight.data);
  apply(params.bias, grads.bias);
}

inline std::size_t argmax(std::span<const double> z) {
  // std::max_element returns the first maximum: ties go to the lowest index.
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

// Binary serialization helpers. Values are written little-endian so files
// are portable and round-trip bit-exactly.
namespace io {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian host");

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated checkpoint");
  return v;
}

inline void write_string(std::ostream& os, std::string_view s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::size_t max_len = 1u << 24) {
  const std::uint64_t n = read_u64(is);
  if (n > max_len) throw IoError("corrupt checkpoint: string length " + std::to_string(n));
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("truncated checkpoint");
  return s;
}

inline void write_doubles(std::ostream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

inline void read_doubles(std::istream& is, std::span<double> v) {
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()))) {
    throw IoError("truncated checkpoint");
  }
}

}  // namespace io

/// Shape header (|V|, d, C) followed by E, W, b as row-major doubles.
inline void write_params(std::ostream& os, const ModelParams& p) {
  io::write_u64(os, p.vocab_size());
  io::write_u64(os, p.dim());
  io::write_u64(os, p.classes());
  io::write_doubles(os, p.embedding.data);
  io::write_doubles(os, p.weight.data);
  io::write_doubles(os, p.bias);
}

inline ModelParams read_params(std::istream& is) {
  const std::uint64_t v = io::read_u64(is);
  const std::uint64_t d = io::read_u64(is);
  const std::uint64_t c = io::read_u64(is);
  constexpr std::uint64_t kLimit = 1ull << 28;
  if (v > kLimit || d > kLimit || c > kLimit || v * d > kLimit) {
    throw IoError("corrupt checkpoint: implausible shape");
  }
  ModelParams p{Matrix(v, d), Matrix(d, c), std::vector<double>(c, 0.0)};
  io::read_doubles(is, p.embedding.data);
  io::read_doubles(is, p.weight.data);
  io::read_doubles(is, p.bias);
  return p;
}

}  // namespace cream::model
