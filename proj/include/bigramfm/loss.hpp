#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bigramfm/common.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/model_config.hpp"
#include "bigramfm/scoring.hpp"

namespace bfm {

struct WeightedFeatures {
  FactFeatures features;
  double weight = 1.0;
};

struct TrainingBatch {
  std::vector<WeightedFeatures> positives;
  std::vector<WeightedFeatures> negatives;
};

struct LossParams {
  double eta = 1.0;  // negatives per positive
  double l2 = 0.0;
};

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace detail {

// l2 * sum of squared norms of the components a fact's score uses. When
// `grad` is given, adds 2 * l2 * theta for the same components.
inline double regularize(const FactFeatures& x, const EmbeddingStore& store,
                         const ModelConfig& config, double l2, SparseGradient* grad) {
  if (l2 == 0.0) return 0.0;
  const SlotUsage use = slot_usage(x, config);
  double r = 0.0;
  for (std::size_t slot = 0; slot < kNumSlots; ++slot) {
    if (use.offset[slot]) {
      const double v = store.offset(x[slot]);
      r += v * v;
      if (grad) grad->add_offset(x[slot], 2.0 * l2 * v);
    }
    if (use.vector[slot]) {
      auto w = store.vec(x[slot]);
      r += dot(w, w);
      if (grad) grad->add_vector(x[slot], w, 2.0 * l2);
    }
  }
  return l2 * r;
}

}  // namespace detail

// Asymmetric logistic objective with L2 on the touched parameters:
//   - sum_pos w * softplus(X) + (1/eta) * sum_neg w * softplus(X)
//   + l2 * sum_f |c_f| * R_f
// where c_f is the fact's loss coefficient (w for positives, w/eta for
// negatives) and R_f the squared norm of the components its score uses.
// If `grad` is non-null the gradient is accumulated into it. Scores are
// computed on up to `threads` workers; all reductions run in batch order.
inline double loss_and_gradient(const TrainingBatch& batch, const EmbeddingStore& store,
                                const ModelConfig& config, const LossParams& params,
                                SparseGradient* grad, std::size_t threads = 1) {
  const std::size_t np = batch.positives.size();
  const std::size_t n = np + batch.negatives.size();
  auto item = [&](std::size_t i) -> const WeightedFeatures& {
    return i < np ? batch.positives[i] : batch.negatives[i - np];
  };
  std::vector<double> scores(n);
  parallel_for(n, threads, [&](std::size_t i) { scores[i] = score(item(i).features, store, config); });

  const double inv_eta = 1.0 / params.eta;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& wf = item(i);
    const double x = scores[i];
    const bool positive = i < np;
    const double coeff = positive ? -wf.weight : wf.weight * inv_eta;
    if (coeff == 0.0) continue;
    total += coeff * softplus(x);
    if (grad) accumulate_score_gradient(wf.features, store, config, coeff * truth_score(x), *grad);
    total += detail::regularize(wf.features, store, config, params.l2 * std::abs(coeff), grad);
  }
  return total;
}

inline double loss(const TrainingBatch& batch, const EmbeddingStore& store, const ModelConfig& config,
                   const LossParams& params) {
  return loss_and_gradient(batch, store, config, params, nullptr);
}

}  // namespace bfm
