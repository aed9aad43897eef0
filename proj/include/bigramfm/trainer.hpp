#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "bigramfm/adam.hpp"
#include "bigramfm/common.hpp"
#include "bigramfm/dataset.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/evaluator.hpp"
#include "bigramfm/loss.hpp"
#include "bigramfm/model_config.hpp"
#include "bigramfm/sampler.hpp"

namespace bfm {

struct TrainConfig {
  std::size_t eta = 1;       // negatives per positive
  double tau = 1.0;          // loss weight of textual-mention facts
  double l2 = 0.0;
  std::size_t k = 10;
  double lr = 1.0;
  std::size_t batch_size = 1024;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_std = 1.0;            // parameters start from N(0, init_std^2)
  std::size_t patience = 0;         // validation rounds without improvement; 0 disables
  std::size_t eval_every = 1;       // epochs between validation rounds
  std::size_t valid_subsample = 1000;
  std::size_t threads = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (eta < 1) fail("eta must be >= 1");
    if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must be in [0, 1]");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) fail("l2 must be a non-negative finite number");
    if (k < 1) fail("k must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be a non-negative finite number");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in [0, 1)");
    if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
    if (!(init_std >= 0.0) || !std::isfinite(init_std)) fail("init_std must be non-negative");
    if (eval_every < 1) fail("eval_every must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
  }

  AdamParams adam() const { return {lr, adam_beta1, adam_beta2, adam_eps}; }
  LossParams loss_params() const { return {static_cast<double>(eta), l2}; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // summed batch loss per training positive
  std::optional<double> valid_mrr;
};

struct TrainResult {
  EmbeddingStore store;
  std::vector<EpochRecord> trace;
  bool diverged = false;
  std::string diagnostic;
  std::optional<std::size_t> best_epoch;  // set when validation drove model selection
};

// Assembles the weighted batch for positives train[order[begin..end)].
inline TrainingBatch make_batch(const Dataset& data, std::span<const std::size_t> order,
                                const TrainConfig& cfg, std::mt19937_64& rng) {
  std::vector<Fact> pos;
  pos.reserve(order.size());
  for (std::size_t i : order) pos.push_back(data.train[i]);
  const auto neg = sample_negatives(pos, cfg.eta, data.vocab.num_entities(), rng);

  TrainingBatch batch;
  batch.positives.reserve(pos.size());
  batch.negatives.reserve(neg.size());
  auto weight = [&](const Fact& f) { return f.is_textual ? cfg.tau : 1.0; };
  for (const auto& f : pos) batch.positives.push_back({extract_features(f, data.bigrams), weight(f)});
  for (const auto& f : neg) batch.negatives.push_back({extract_features(f, data.bigrams), weight(f)});
  return batch;
}

// Fixed subsample of the KB validation facts, in original order.
inline std::vector<Fact> validation_subsample(std::span<const Fact> valid, std::size_t n,
                                              std::uint64_t seed) {
  std::vector<Fact> kb;
  for (const auto& f : valid) {
    if (!f.is_textual) kb.push_back(f);
  }
  if (kb.size() <= n) return kb;
  std::vector<Fact> out;
  out.reserve(n);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::sample(kb.begin(), kb.end(), std::back_inserter(out), n, rng);
  return out;
}

// Minibatch AdaM on shuffled training facts with fresh negatives per epoch.
// When `validation` is non-empty its filtered MRR is recorded every
// eval_every epochs; with patience > 0 training stops early and returns the
// best-scoring store. On divergence the store from the start of the failing
// epoch is returned.
inline TrainResult train(const Dataset& data, const ModelConfig& config, const TrainConfig& cfg,
                         std::span<const Fact> validation = {},
                         const EvaluationContext* ctx = nullptr) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("no training facts");
  std::optional<EvaluationContext> own_ctx;
  if (!validation.empty() && ctx == nullptr) ctx = &own_ctx.emplace(data);

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.store = EmbeddingStore(cfg.k, table_sizes(data));
  result.store.init_normal(cfg.init_std, rng);
  AdamState adam(result.store);
  const AdamParams adam_params = cfg.adam();
  const LossParams loss_params = cfg.loss_params();

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SparseGradient grad(cfg.k);

  double best_mrr = -1.0;
  std::size_t rounds_since_best = 0;
  EmbeddingStore best_store;
  EmbeddingStore last_good;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    last_good = result.store;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
        const auto batch =
            make_batch(data, std::span<const std::size_t>(order).subspan(begin, end - begin), cfg, rng);
        grad.clear();
        const double l = loss_and_gradient(batch, result.store, config, loss_params, &grad, cfg.threads);
        if (!std::isfinite(l)) throw NumericalError("non-finite batch loss");
        adam_step(result.store, grad, adam, adam_params);
        total += l;
      }
      if (!result.store.all_finite()) throw NumericalError("non-finite parameter after update");
    } catch (const NumericalError& e) {
      result.store = std::move(last_good);
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    EpochRecord rec{epoch, total / static_cast<double>(order.size()), std::nullopt};
    const bool eval_now = !validation.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    bool stop = false;
    if (eval_now) {
      const double mrr = evaluate(validation, result.store, config, *ctx, cfg.threads).mrr;
      rec.valid_mrr = mrr;
      if (cfg.patience > 0) {
        if (mrr > best_mrr) {
          best_mrr = mrr;
          best_store = result.store;
          result.best_epoch = epoch;
          rounds_since_best = 0;
        } else if (++rounds_since_best >= cfg.patience) {
          stop = true;
        }
      }
    }
    result.trace.push_back(rec);
    if (stop) break;
  }
  if (cfg.patience > 0 && result.best_epoch && !result.diverged) result.store = std::move(best_store);
  return result;
}

inline void write_trace_csv(std::ostream& out, const std::vector<EpochRecord>& trace) {
  out << "epoch,mean_loss,valid_mrr\n";
  out << std::setprecision(17);
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.mean_loss << ',';
    if (r.valid_mrr) out << *r.valid_mrr;
    out << '\n';
  }
}

struct GridSpec {
  std::vector<double> l2;
  std::vector<std::size_t> eta;
  std::vector<double> tau;
  std::vector<std::size_t> k;
  std::vector<double> lr;  // optional; empty means the base learning rate

  std::vector<TrainConfig> expand(const TrainConfig& base) const {
    if (l2.empty() || eta.empty() || tau.empty() || k.empty()) {
      throw ConfigError("every grid axis (l2, eta, tau, k) needs at least one value");
    }
    const std::vector<double> rates = lr.empty() ? std::vector<double>{base.lr} : lr;
    std::vector<TrainConfig> points;
    for (double a : l2)
      for (std::size_t b : eta)
        for (double c : tau)
          for (std::size_t d : k)
            for (double e : rates) {
              TrainConfig t = base;
              t.l2 = a;
              t.eta = b;
              t.tau = c;
              t.k = d;
              t.lr = e;
              t.validate();
              points.push_back(t);
            }
    return points;
  }
};

struct GridPoint {
  TrainConfig config;
  double valid_mrr = 0.0;
  TrainResult result;
};

struct GridSearchResult {
  std::vector<GridPoint> points;
  std::size_t best = 0;

  const TrainConfig& best_config() const { return points.at(best).config; }
};

// True if a should be preferred over b: higher MRR, then smaller k, then smaller l2.
inline bool better_grid_point(const GridPoint& a, const GridPoint& b) {
  if (a.valid_mrr != b.valid_mrr) return a.valid_mrr > b.valid_mrr;
  if (a.config.k != b.config.k) return a.config.k < b.config.k;
  return a.config.l2 < b.config.l2;
}

// Trains one model per grid point and selects by filtered MRR on a fixed
// validation subsample shared by all points. Diverged points score -1.
inline GridSearchResult grid_search(const GridSpec& grid, const Dataset& data,
                                    const ModelConfig& config, const TrainConfig& base) {
  const auto configs = grid.expand(base);
  const auto subsample = validation_subsample(data.valid, base.valid_subsample, base.seed);
  if (subsample.empty()) throw ConfigError("grid search needs a non-empty validation split");
  const EvaluationContext ctx(data);

  GridSearchResult out;
  for (const auto& c : configs) {
    GridPoint p;
    p.config = c;
    p.result = train(data, config, c, subsample, &ctx);
    p.valid_mrr = p.result.diverged ? -1.0 : evaluate(subsample, p.result.store, config, ctx, c.threads).mrr;
    out.points.push_back(std::move(p));
    if (better_grid_point(out.points.back(), out.points[out.best])) out.best = out.points.size() - 1;
  }
  return out;
}

}  // namespace bfm
