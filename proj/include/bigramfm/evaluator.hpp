#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bigramfm/common.hpp"
#include "bigramfm/dataset.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/model_config.hpp"
#include "bigramfm/scoring.hpp"

namespace bfm {

inline constexpr std::array<std::size_t, 3> kHitsAt = {1, 3, 10};

// Filtered rank of the gold object among `candidates`. Ties with the gold
// place it at the mean position of its tie group, rounded up. Bigram slots
// are re-resolved for every candidate object.
inline std::size_t rank_fact(const Fact& f, const EmbeddingStore& store, const ModelConfig& config,
                             const BigramIndex& bigrams, std::span<const EntityId> candidates) {
  if (std::find(candidates.begin(), candidates.end(), f.object) == candidates.end()) {
    throw std::invalid_argument("gold object missing from candidate set");
  }
  FactFeatures x = extract_features(f, bigrams);
  const double gold = score(x, store, config);
  std::size_t higher = 0;
  std::size_t ties = 0;  // includes the gold itself
  for (EntityId o : candidates) {
    if (o == f.object) {
      ++ties;
      continue;
    }
    x[kObject].row = o;
    x[kRelationObject].row = bigrams.lookup_ro(f.relation, o);
    x[kObjectSubject].row = bigrams.lookup_os(o, f.subject);
    const double s = score(x, store, config);
    if (s > gold) {
      ++higher;
    } else if (s == gold) {
      ++ties;
    }
  }
  return higher + (ties + 2) / 2;  // higher + ceil((ties + 1) / 2)
}

struct RankedFact {
  Fact fact;
  std::size_t rank = 0;
  std::size_t num_candidates = 0;
  bool with_tm = false;
};

struct RankingReport {
  std::size_t count = 0;
  std::size_t count_no_tm = 0;
  std::size_t count_with_tm = 0;
  double mrr = 0.0;  // percentages throughout
  std::optional<double> mrr_no_tm;
  std::optional<double> mrr_with_tm;
  std::array<double, kHitsAt.size()> hits{};  // aligned with kHitsAt
  std::vector<RankedFact> ranks;

  double hits_at(std::size_t n) const {
    for (std::size_t i = 0; i < kHitsAt.size(); ++i) {
      if (kHitsAt[i] == n) return hits[i];
    }
    throw std::out_of_range("HITS@" + std::to_string(n) + " is not reported");
  }
};

inline RankingReport summarize(std::vector<RankedFact> ranks) {
  RankingReport r;
  double rr_all = 0.0, rr_no = 0.0, rr_with = 0.0;
  std::array<std::size_t, kHitsAt.size()> hit_counts{};
  for (const auto& rf : ranks) {
    const double rr = 1.0 / static_cast<double>(rf.rank);
    rr_all += rr;
    if (rf.with_tm) {
      rr_with += rr;
      ++r.count_with_tm;
    } else {
      rr_no += rr;
      ++r.count_no_tm;
    }
    for (std::size_t i = 0; i < kHitsAt.size(); ++i) hit_counts[i] += rf.rank <= kHitsAt[i];
  }
  r.count = ranks.size();
  if (r.count > 0) {
    const double n = static_cast<double>(r.count);
    r.mrr = 100.0 * rr_all / n;
    for (std::size_t i = 0; i < kHitsAt.size(); ++i) {
      r.hits[i] = 100.0 * static_cast<double>(hit_counts[i]) / n;
    }
  }
  if (r.count_no_tm > 0) r.mrr_no_tm = 100.0 * rr_no / static_cast<double>(r.count_no_tm);
  if (r.count_with_tm > 0) r.mrr_with_tm = 100.0 * rr_with / static_cast<double>(r.count_with_tm);
  r.ranks = std::move(ranks);
  return r;
}

// Read-only lookups shared by every evaluation over one dataset.
class EvaluationContext {
 public:
  explicit EvaluationContext(const Dataset& data) : data_(&data) {
    for (const auto& f : data.train) {
      if (f.is_textual) textual_pairs_.insert(pack_pair(f.subject, f.object));
    }
  }

  const Dataset& data() const { return *data_; }

  // True iff (s, o), in that order, has a textual mention in training.
  bool has_textual_mention(const Fact& f) const {
    return textual_pairs_.contains(pack_pair(f.subject, f.object));
  }

 private:
  const Dataset* data_;
  std::unordered_set<std::uint64_t> textual_pairs_;
};

// Filtered object ranking over the KB facts in `facts`; textual facts are
// skipped. Ranks are computed in parallel and reported in input order.
inline RankingReport evaluate(std::span<const Fact> facts, const EmbeddingStore& store,
                              const ModelConfig& config, const EvaluationContext& ctx,
                              std::size_t threads = 1) {
  std::vector<Fact> kb;
  kb.reserve(facts.size());
  for (const auto& f : facts) {
    if (!f.is_textual) kb.push_back(f);
  }
  const Dataset& data = ctx.data();
  std::vector<RankedFact> ranks(kb.size());
  parallel_for(kb.size(), threads, [&](std::size_t i) {
    thread_local std::vector<EntityId> candidates;
    filtered_candidates(kb[i], data.filter, data.vocab.num_entities(), candidates);
    ranks[i].fact = kb[i];
    ranks[i].num_candidates = candidates.size();
    ranks[i].rank = rank_fact(kb[i], store, config, data.bigrams, candidates);
    ranks[i].with_tm = ctx.has_textual_mention(kb[i]);
  });
  return summarize(std::move(ranks));
}

struct SingleObjectReport {
  std::size_t subset_size = 0;
  std::optional<double> hits_at_1;  // null when the subset is empty
};

// Relations whose training facts all share one object.
inline std::unordered_set<RelationId> single_object_relations(std::span<const Fact> train) {
  std::unordered_map<RelationId, EntityId> first_object;
  std::unordered_set<RelationId> multi;
  for (const auto& f : train) {
    auto [it, inserted] = first_object.try_emplace(f.relation, f.object);
    if (!inserted && it->second != f.object) multi.insert(f.relation);
  }
  std::unordered_set<RelationId> single;
  for (const auto& [r, o] : first_object) {
    if (!multi.contains(r)) single.insert(r);
  }
  return single;
}

// HITS@1 restricted to test facts whose relation co-occurred with exactly
// one object during training.
inline SingleObjectReport single_object_analysis(std::span<const Fact> test,
                                                 std::span<const Fact> train,
                                                 const EmbeddingStore& store,
                                                 const ModelConfig& config,
                                                 const EvaluationContext& ctx,
                                                 std::size_t threads = 1) {
  const auto single = single_object_relations(train);
  std::vector<Fact> subset;
  for (const auto& f : test) {
    if (!f.is_textual && single.contains(f.relation)) subset.push_back(f);
  }
  SingleObjectReport out;
  out.subset_size = subset.size();
  if (subset.empty()) return out;
  out.hits_at_1 = evaluate(subset, store, config, ctx, threads).hits_at(1);
  return out;
}

}  // namespace bfm
