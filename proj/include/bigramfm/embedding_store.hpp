#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bigramfm/common.hpp"
#include "bigramfm/dataset.hpp"

namespace bfm {

using TableSizes = std::array<std::size_t, kNumTables>;

inline TableSizes table_sizes(const Dataset& d) {
  return {d.vocab.num_entities(), d.vocab.num_relations(),
          d.bigrams.size(Table::SubjectRelation), d.bigrams.size(Table::RelationObject),
          d.bigrams.size(Table::ObjectSubject)};
}

// Offsets v and k-dimensional interaction vectors w for every unit and every
// observed bigram. Unobserved bigrams read as the fixed zero pair.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  EmbeddingStore(std::size_t k, const TableSizes& rows) : k_(k), rows_(rows), zeros_(k, 0.0) {
    if (k == 0) throw ConfigError("latent dimension k must be positive");
    for (std::size_t t = 0; t < kNumTables; ++t) {
      v_[t].assign(rows[t], 0.0);
      w_[t].assign(rows[t] * k, 0.0);
    }
  }

  std::size_t dim() const { return k_; }
  std::size_t rows(Table t) const { return rows_[table_index(t)]; }
  const TableSizes& sizes() const { return rows_; }

  double offset(const FeatureRef& ref) const {
    return ref.observed() ? v_[table_index(ref.table)][ref.row] : 0.0;
  }
  std::span<const double> vec(const FeatureRef& ref) const {
    if (!ref.observed()) return zeros_;
    return std::span<const double>(w_[table_index(ref.table)]).subspan(ref.row * k_, k_);
  }

  // Mutable access; the reference must be observed.
  double& offset_mut(const FeatureRef& ref) { return v_[table_index(ref.table)].at(ref.row); }
  std::span<double> vec_mut(const FeatureRef& ref) {
    return std::span<double>(w_[table_index(ref.table)]).subspan(ref.row * k_, k_);
  }

  std::span<const double> offsets(Table t) const { return v_[table_index(t)]; }
  std::span<const double> vectors(Table t) const { return w_[table_index(t)]; }
  std::span<double> offsets_mut(Table t) { return v_[table_index(t)]; }
  std::span<double> vectors_mut(Table t) { return w_[table_index(t)]; }

  void init_normal(double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = 0; t < kNumTables; ++t) {
      for (auto& x : v_[t]) x = stddev * normal(rng);
      for (auto& x : w_[t]) x = stddev * normal(rng);
    }
  }

  bool all_finite() const {
    for (std::size_t t = 0; t < kNumTables; ++t) {
      for (double x : v_[t]) if (!std::isfinite(x)) return false;
      for (double x : w_[t]) if (!std::isfinite(x)) return false;
    }
    return true;
  }

  // Bitwise comparison of all parameters.
  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    if (a.k_ != b.k_ || a.rows_ != b.rows_) return false;
    for (std::size_t t = 0; t < kNumTables; ++t) {
      if (!bit_equal(a.v_[t], b.v_[t]) || !bit_equal(a.w_[t], b.w_[t])) return false;
    }
    return true;
  }

 private:
  static bool bit_equal(const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() &&
           (x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  }

  std::size_t k_ = 0;
  TableSizes rows_{};
  std::array<std::vector<double>, kNumTables> v_;
  std::array<std::vector<double>, kNumTables> w_;
  std::vector<double> zeros_;
};

// ---------------------------------------------------------------------------
// Checkpoint format (little-endian):
//   "BFMCKPT1"            8 bytes
//   vocab fingerprint     u64
//   variant name          u32 length + bytes
//   k                     u64
//   rows                  5 x u64 (entity, relation, sr, ro, os)
//   per table             rows x f64 offsets, then rows*k x f64 vectors
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

struct CheckpointHeader {
  std::uint64_t vocab_hash = 0;
  std::string variant;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  if (!in) throw DataError("truncated checkpoint");
  return x;
}
inline void write_doubles(std::ostream& out, std::span<const double> xs) {
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}
inline void read_doubles(std::istream& in, std::span<double> xs) {
  in.read(reinterpret_cast<char*>(xs.data()),
          static_cast<std::streamsize>(xs.size() * sizeof(double)));
  if (!in) throw DataError("truncated checkpoint");
}

inline constexpr char kMagic[8] = {'B', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const EmbeddingStore& store,
                             const CheckpointHeader& header) {
  out.write(detail::kMagic, sizeof detail::kMagic);
  detail::write_u64(out, header.vocab_hash);
  const auto len = static_cast<std::uint32_t>(header.variant.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.variant.data(), len);
  detail::write_u64(out, store.dim());
  for (std::size_t r : store.sizes()) detail::write_u64(out, r);
  for (std::size_t t = 0; t < kNumTables; ++t) {
    detail::write_doubles(out, store.offsets(static_cast<Table>(t)));
    detail::write_doubles(out, store.vectors(static_cast<Table>(t)));
  }
  if (!out) throw DataError("failed writing checkpoint");
}

inline EmbeddingStore read_checkpoint(std::istream& in, CheckpointHeader& header) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kMagic, sizeof magic) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  header.vocab_hash = detail::read_u64(in);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > 256) throw DataError("corrupt checkpoint header");
  header.variant.assign(len, '\0');
  in.read(header.variant.data(), len);
  const std::size_t k = detail::read_u64(in);
  TableSizes rows{};
  for (auto& r : rows) r = detail::read_u64(in);
  EmbeddingStore store(k, rows);
  for (std::size_t t = 0; t < kNumTables; ++t) {
    detail::read_doubles(in, store.offsets_mut(static_cast<Table>(t)));
    detail::read_doubles(in, store.vectors_mut(static_cast<Table>(t)));
  }
  return store;
}

inline void save_checkpoint(const std::string& path, const EmbeddingStore& store,
                            const CheckpointHeader& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  write_checkpoint(out, store, header);
}

inline EmbeddingStore load_checkpoint(const std::string& path, CheckpointHeader& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return read_checkpoint(in, header);
}

}  // namespace bfm
