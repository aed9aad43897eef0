#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "bigramfm/common.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/model_config.hpp"

namespace bfm {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Raw score X_f: active offsets plus active pairwise dot products, or the
// trilinear product for DistMult. Unobserved bigram slots contribute zero.
inline double score(const FactFeatures& x, const EmbeddingStore& store, const ModelConfig& config) {
  if (config.trilinear) {
    auto ws = store.vec(x[kSubject]);
    auto wr = store.vec(x[kRelation]);
    auto wo = store.vec(x[kObject]);
    double s = 0.0;
    for (std::size_t d = 0; d < ws.size(); ++d) s += ws[d] * wr[d] * wo[d];
    return s;
  }
  double s = 0.0;
  for (std::size_t slot = 0; slot < kNumSlots; ++slot) {
    if (config.offsets[slot] && x[slot].observed()) s += store.offset(x[slot]);
  }
  for (auto [a, b] : config.pairs) {
    if (x[a].observed() && x[b].observed()) s += dot(store.vec(x[a]), store.vec(x[b]));
  }
  return s;
}

// Logistic link, evaluated without overflow for large |x|.
inline double truth_score(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Which parameter components of each slot the score depends on.
struct SlotUsage {
  std::array<bool, kNumSlots> offset{};
  std::array<bool, kNumSlots> vector{};
};

inline SlotUsage slot_usage(const FactFeatures& x, const ModelConfig& config) {
  SlotUsage u;
  if (config.trilinear) {
    u.vector[kSubject] = u.vector[kRelation] = u.vector[kObject] = true;
    return u;
  }
  for (std::size_t slot = 0; slot < kNumSlots; ++slot) {
    u.offset[slot] = config.offsets[slot] && x[slot].observed();
  }
  for (auto [a, b] : config.pairs) {
    if (x[a].observed() && x[b].observed()) u.vector[a] = u.vector[b] = true;
  }
  return u;
}

// Gradient over the parameters a set of facts touches. Entries keep
// insertion order; a parameter appearing in several slots is merged.
class SparseGradient {
 public:
  struct Entry {
    FeatureRef ref;
    double dv = 0.0;
    bool has_v = false;
    bool has_w = false;
  };

  SparseGradient() = default;
  explicit SparseGradient(std::size_t k) : k_(k) {}

  std::size_t dim() const { return k_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::span<const double> dw(std::size_t i) const {
    return std::span<const double>(dw_).subspan(i * k_, k_);
  }

  // Index of the entry for ref, or -1.
  std::ptrdiff_t find(const FeatureRef& ref) const {
    auto it = index_.find(ref.key());
    return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

  void add_offset(const FeatureRef& ref, double g) {
    Entry& e = entries_[touch(ref)];
    e.dv += g;
    e.has_v = true;
  }

  void add_vector(const FeatureRef& ref, std::span<const double> g, double scale) {
    const std::size_t i = touch(ref);
    entries_[i].has_w = true;
    double* out = dw_.data() + i * k_;
    for (std::size_t d = 0; d < k_; ++d) out[d] += scale * g[d];
  }

  void clear() {
    entries_.clear();
    dw_.clear();
    index_.clear();
  }

 private:
  std::size_t touch(const FeatureRef& ref) {
    auto [it, inserted] = index_.try_emplace(ref.key(), entries_.size());
    if (inserted) {
      entries_.push_back(Entry{ref});
      dw_.resize(dw_.size() + k_, 0.0);
    }
    return it->second;
  }

  std::size_t k_ = 0;
  std::vector<Entry> entries_;
  std::vector<double> dw_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// grad += scale * dX_f/dtheta
inline void accumulate_score_gradient(const FactFeatures& x, const EmbeddingStore& store,
                                      const ModelConfig& config, double scale,
                                      SparseGradient& grad) {
  if (config.trilinear) {
    auto ws = store.vec(x[kSubject]);
    auto wr = store.vec(x[kRelation]);
    auto wo = store.vec(x[kObject]);
    const std::size_t k = ws.size();
    std::vector<double> tmp(k);
    for (std::size_t d = 0; d < k; ++d) tmp[d] = wr[d] * wo[d];
    grad.add_vector(x[kSubject], tmp, scale);
    for (std::size_t d = 0; d < k; ++d) tmp[d] = ws[d] * wo[d];
    grad.add_vector(x[kRelation], tmp, scale);
    for (std::size_t d = 0; d < k; ++d) tmp[d] = ws[d] * wr[d];
    grad.add_vector(x[kObject], tmp, scale);
    return;
  }
  for (std::size_t slot = 0; slot < kNumSlots; ++slot) {
    if (config.offsets[slot] && x[slot].observed()) grad.add_offset(x[slot], scale);
  }
  for (auto [a, b] : config.pairs) {
    if (!x[a].observed() || !x[b].observed()) continue;
    grad.add_vector(x[a], store.vec(x[b]), scale);
    grad.add_vector(x[b], store.vec(x[a]), scale);
  }
}

inline SparseGradient score_gradient(const FactFeatures& x, const EmbeddingStore& store,
                                     const ModelConfig& config) {
  SparseGradient g(store.dim());
  accumulate_score_gradient(x, store, config, 1.0, g);
  return g;
}

}  // namespace bfm
