#pragma once

#include <random>
#include <span>
#include <vector>

#include "bigramfm/common.hpp"

namespace bfm {

// Object corruption: eta negatives per positive, each keeping (s, r) and
// drawing o' uniformly from all entities. Negatives of positive i occupy
// positions [i * eta, (i + 1) * eta). Collisions with true facts are kept.
inline std::vector<Fact> sample_negatives(std::span<const Fact> positives, std::size_t eta,
                                          std::size_t num_entities, std::mt19937_64& rng) {
  if (eta == 0) throw ConfigError("eta must be at least 1");
  if (num_entities == 0) throw ConfigError("entity vocabulary is empty");
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(num_entities - 1));
  std::vector<Fact> out;
  out.reserve(positives.size() * eta);
  for (const auto& f : positives) {
    for (std::size_t j = 0; j < eta; ++j) {
      Fact neg = f;
      neg.object = pick(rng);
      out.push_back(neg);
    }
  }
  return out;
}

}  // namespace bfm
