#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bigramfm/common.hpp"

namespace bfm {

enum class Variant {
  FullFm,          // all offsets, all 15 distinct slot pairs
  FModel,          // entity pair (o,s) vs relation r
  RoVsS,           // bigram (r,o) vs subject s
  SrVsO,           // bigram (s,r) vs object o
  SumOfAblations,  // jointly trained sum of the three ablations above
  DistMult,        // trilinear <w_s, w_r, w_o>, no offsets
};

inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::FullFm, Variant::FModel,         Variant::RoVsS,
    Variant::SrVsO,  Variant::SumOfAblations, Variant::DistMult,
};

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::FullFm: return "full_fm";
    case Variant::FModel: return "f_model";
    case Variant::RoVsS: return "ro_vs_s";
    case Variant::SrVsO: return "sr_vs_o";
    case Variant::SumOfAblations: return "sum";
    case Variant::DistMult: return "distmult";
  }
  return "unknown";
}

inline std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

inline std::string valid_variant_names() {
  std::string out;
  for (Variant v : kAllVariants) {
    if (!out.empty()) out += ", ";
    out += variant_name(v);
  }
  return out;
}

using SlotPair = std::pair<Slot, Slot>;

// Active terms of a scoring function over the six feature slots.
struct ModelConfig {
  Variant variant = Variant::FullFm;
  std::array<bool, kNumSlots> offsets{};
  std::vector<SlotPair> pairs;
  bool trilinear = false;

  static ModelConfig ablation(Slot unit, Slot bigram) {
    ModelConfig c;
    c.offsets[unit] = true;
    c.offsets[bigram] = true;
    c.pairs.emplace_back(unit, bigram);
    return c;
  }

  static ModelConfig make(Variant v) {
    ModelConfig c;
    switch (v) {
      case Variant::FullFm:
        c.offsets.fill(true);
        for (std::size_t i = 0; i < kNumSlots; ++i) {
          for (std::size_t j = i + 1; j < kNumSlots; ++j) {
            c.pairs.emplace_back(static_cast<Slot>(i), static_cast<Slot>(j));
          }
        }
        break;
      case Variant::FModel: c = ablation(kRelation, kObjectSubject); break;
      case Variant::RoVsS: c = ablation(kSubject, kRelationObject); break;
      case Variant::SrVsO: c = ablation(kObject, kSubjectRelation); break;
      case Variant::SumOfAblations: {
        const ModelConfig parts[] = {make(Variant::FModel), make(Variant::RoVsS),
                                     make(Variant::SrVsO)};
        for (const auto& p : parts) {
          for (std::size_t s = 0; s < kNumSlots; ++s) c.offsets[s] = c.offsets[s] || p.offsets[s];
          c.pairs.insert(c.pairs.end(), p.pairs.begin(), p.pairs.end());
        }
        break;
      }
      case Variant::DistMult: c.trilinear = true; break;
    }
    c.variant = v;
    return c;
  }

  std::size_t num_offsets() const {
    std::size_t n = 0;
    for (bool b : offsets) n += b;
    return n;
  }
};

}  // namespace bfm
