#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ivpipe/errors.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::textsim {

using Vector = std::vector<double>;

// Character-level edit distance with unit costs, two-row rolling table.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Similarity in [0, 1] after text normalization. Two empty strings are
// identical by definition.
inline double lev_similarity(const std::string& a, const std::string& b) {
  const std::string na = text::normalize(a);
  const std::string nb = text::normalize(b);
  const std::size_t longest = std::max(na.size(), nb.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(na, nb)) / static_cast<double>(longest);
}

// Cosine of two vectors; 0 when either has zero norm.
inline double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine over vectors of size " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // One vector per input text, all of dimension().
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::size_t dimension() const = 0;
  // Stable identifier, part of every cache key.
  virtual std::string id() const = 0;
};

// Offline embedding: a token-hash bag of words. Each normalized token bumps
// bucket fnv1a(token) % dim and the result is L2-normalized. Crude, but fully
// deterministic and good enough to rank near-verbatim matches first.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = 4096) : dim_(dim) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
  }

  std::vector<Vector> embed(const std::vector<std::string>& texts) override {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::size_t dimension() const override { return dim_; }
  std::string id() const override { return "local-hash-" + std::to_string(dim_); }

 private:
  Vector embed_one(const std::string& raw) const {
    Vector v(dim_, 0.0);
    for (const auto& tok : text::tokenize(raw)) v[text::fnv1a(tok) % dim_] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    return v;  // empty text stays the zero vector
  }

  std::size_t dim_;
};

// Memoizes any provider. Embeddings are pure functions of (provider id, text),
// so hits must be byte-identical to a fresh call; the mutex makes concurrent
// lookups safe.
class CachingEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner)
      : inner_(std::move(inner)) {}

  std::vector<Vector> embed(const std::vector<std::string>& texts) override {
    std::vector<Vector> out(texts.size());
    std::vector<std::size_t> missing;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t i = 0; i < texts.size(); ++i) {
        auto it = cache_.find(texts[i]);
        if (it == cache_.end())
          missing.push_back(i);
        else
          out[i] = it->second;
      }
    }
    if (!missing.empty()) {
      std::vector<std::string> batch;
      batch.reserve(missing.size());
      for (auto i : missing) batch.push_back(texts[i]);
      auto fresh = inner_->embed(batch);
      if (fresh.size() != batch.size())
        throw ProviderError("embedding provider returned " + std::to_string(fresh.size()) +
                            " vectors for " + std::to_string(batch.size()) + " texts");
      std::lock_guard<std::mutex> lock(mu_);
      for (std::size_t k = 0; k < missing.size(); ++k) {
        cache_[texts[missing[k]]] = fresh[k];
        out[missing[k]] = std::move(fresh[k]);
      }
    }
    return out;
  }

  std::size_t dimension() const override { return inner_->dimension(); }
  std::string id() const override { return inner_->id(); }

  std::size_t cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Vector> cache_;
};

enum class Channel { embedding, levenshtein };

struct SimilarityMatrix {
  std::size_t rows = 0;  // texts on the left, typically utterances
  std::size_t cols = 0;  // texts on the right, typically questions
  Channel channel = Channel::embedding;
  std::vector<double> cells;  // row-major

  double at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }

  // Per-column maxima; the gate statistic for section matching.
  std::vector<double> column_maxima() const {
    std::vector<double> out(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
      double best = rows ? at(0, c) : 0.0;
      for (std::size_t r = 1; r < rows; ++r) best = std::max(best, at(r, c));
      out[c] = best;
    }
    return out;
  }
};

inline SimilarityMatrix similarity_matrix(const std::vector<std::string>& left,
                                          const std::vector<std::string>& right, Channel channel,
                                          EmbeddingProvider* provider = nullptr) {
  SimilarityMatrix m;
  m.rows = left.size();
  m.cols = right.size();
  m.channel = channel;
  m.cells.assign(m.rows * m.cols, 0.0);
  if (m.rows == 0 || m.cols == 0) return m;

  if (channel == Channel::levenshtein) {
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = lev_similarity(left[r], right[c]);
    return m;
  }

  if (!provider) throw ConfigError("embedding channel requires a provider");
  std::vector<std::string> all;
  all.reserve(left.size() + right.size());
  all.insert(all.end(), left.begin(), left.end());
  all.insert(all.end(), right.begin(), right.end());
  auto vecs = provider->embed(all);
  if (vecs.size() != all.size())
    throw ProviderError("embedding provider returned wrong batch size");
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = cosine(vecs[r], vecs[m.rows + c]);
  return m;
}

}  // namespace ivpipe::textsim
