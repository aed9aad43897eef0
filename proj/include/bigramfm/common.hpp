#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bfm {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using BigramId = std::uint32_t;

// Row marker for a bigram that never occurred in the training split.
inline constexpr std::uint32_t kUnobserved = std::numeric_limits<std::uint32_t>::max();

struct Fact {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  bool is_textual = false;

  friend bool operator==(const Fact&, const Fact&) = default;
};

// Parameter tables. Subject and object share the entity table.
enum class Table : std::uint8_t {
  Entity = 0,
  Relation = 1,
  SubjectRelation = 2,
  RelationObject = 3,
  ObjectSubject = 4,
};
inline constexpr std::size_t kNumTables = 5;

inline constexpr std::size_t table_index(Table t) { return static_cast<std::size_t>(t); }

struct FeatureRef {
  Table table = Table::Entity;
  std::uint32_t row = kUnobserved;

  bool observed() const { return row != kUnobserved; }
  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(table_index(table)) << 32) | row;
  }
  friend auto operator<=>(const FeatureRef&, const FeatureRef&) = default;
};

// The six logical feature slots of a fact: three units, three bigrams.
enum Slot : std::size_t {
  kSubject = 0,
  kRelation = 1,
  kObject = 2,
  kSubjectRelation = 3,
  kRelationObject = 4,
  kObjectSubject = 5,
};
inline constexpr std::size_t kNumSlots = 6;

struct FactFeatures {
  std::array<FeatureRef, kNumSlots> slots{};

  const FeatureRef& operator[](std::size_t s) const { return slots[s]; }
  FeatureRef& operator[](std::size_t s) { return slots[s]; }
  friend bool operator==(const FactFeatures&, const FactFeatures&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad experiment or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Non-finite values during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t pack_pair(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
// contiguous partition. Callers write results into slot i only.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace bfm
