#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bigramfm/common.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/scoring.hpp"

namespace bfm {

struct AdamParams {
  double lr = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState;
inline void adam_step(EmbeddingStore& store, const SparseGradient& grad, AdamState& state,
                      const AdamParams& p);

// Moment estimates shaped like an EmbeddingStore. Only components that
// receive a gradient are read or written by a step; the bias correction
// uses the global step count.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const EmbeddingStore& store) : k_(store.dim()) {
    for (std::size_t t = 0; t < kNumTables; ++t) {
      const std::size_t rows = store.rows(static_cast<Table>(t));
      m_v_[t].assign(rows, 0.0);
      s_v_[t].assign(rows, 0.0);
      m_w_[t].assign(rows * k_, 0.0);
      s_w_[t].assign(rows * k_, 0.0);
    }
  }

  std::uint64_t step() const { return step_; }

 private:
  friend void adam_step(EmbeddingStore&, const SparseGradient&, AdamState&, const AdamParams&);

  std::size_t k_ = 0;
  std::uint64_t step_ = 0;
  std::array<std::vector<double>, kNumTables> m_v_, s_v_, m_w_, s_w_;
};

namespace detail {

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

// One lazy AdaM update. Components whose gradient is exactly zero are
// skipped so that an all-zero gradient leaves the store untouched.
inline void adam_step(EmbeddingStore& store, const SparseGradient& grad, AdamState& state,
                      const AdamParams& p) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const auto& e = grad.entries()[i];
    if (!std::isfinite(e.dv) || !detail::all_finite(grad.dw(i))) {
      throw NumericalError("non-finite gradient for table " +
                           std::to_string(table_index(e.ref.table)) + " row " +
                           std::to_string(e.ref.row));
    }
  }
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(p.beta1, t);
  const double bc2 = 1.0 - std::pow(p.beta2, t);

  auto update = [&](double& theta, double& m, double& s, double g) {
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    s = p.beta2 * s + (1.0 - p.beta2) * g * g;
    theta -= p.lr * (m / bc1) / (std::sqrt(s / bc2) + p.eps);
  };

  const std::size_t k = store.dim();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const auto& e = grad.entries()[i];
    const std::size_t t_idx = table_index(e.ref.table);
    if (e.has_v && e.dv != 0.0) {
      update(store.offset_mut(e.ref), state.m_v_[t_idx][e.ref.row], state.s_v_[t_idx][e.ref.row],
             e.dv);
    }
    if (e.has_w) {
      auto w = store.vec_mut(e.ref);
      auto dw = grad.dw(i);
      const std::size_t base = e.ref.row * k;
      for (std::size_t d = 0; d < k; ++d) {
        if (dw[d] == 0.0) continue;
        update(w[d], state.m_w_[t_idx][base + d], state.s_w_[t_idx][base + d], dw[d]);
      }
    }
  }
}

}  // namespace bfm
