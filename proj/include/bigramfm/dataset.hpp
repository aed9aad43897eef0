#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bigramfm/common.hpp"
#include "bigramfm/vocabulary.hpp"

namespace bfm {

struct RawTriple {
  std::string subject;
  std::string relation;
  std::string object;
};

// Splits one tab-separated line. Returns the fields; a trailing '\r' is dropped.
inline std::vector<std::string> split_tabs(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos
                                                                          : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

// Reads subject/relation/object lines. Blank lines are skipped. When
// `allow_count_column` is set a fourth field (a mention count, as in the
// public textual-mention release) is accepted and ignored.
inline std::vector<RawTriple> parse_triples(std::istream& in, const std::string& source,
                                            bool allow_count_column = false) {
  std::vector<RawTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_tabs(line);
    const bool ok = fields.size() == 3 || (allow_count_column && fields.size() == 4);
    if (!ok) {
      throw ParseError(source, lineno,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (fields[i].empty()) throw ParseError(source, lineno, "empty field");
    }
    out.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
  }
  return out;
}

inline std::vector<RawTriple> read_triples(const std::string& path, bool allow_count_column = false) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_triples(in, path, allow_count_column);
}

// Observed training bigrams. Three disjoint id spaces, one per bigram type.
class BigramIndex {
 public:
  void observe(const Fact& f) {
    intern(Table::SubjectRelation, pack_pair(f.subject, f.relation));
    intern(Table::RelationObject, pack_pair(f.relation, f.object));
    intern(Table::ObjectSubject, pack_pair(f.object, f.subject));
  }

  std::uint32_t lookup_sr(EntityId s, RelationId r) const {
    return lookup(Table::SubjectRelation, pack_pair(s, r));
  }
  std::uint32_t lookup_ro(RelationId r, EntityId o) const {
    return lookup(Table::RelationObject, pack_pair(r, o));
  }
  std::uint32_t lookup_os(EntityId o, EntityId s) const {
    return lookup(Table::ObjectSubject, pack_pair(o, s));
  }

  std::size_t size(Table t) const { return keys_[slot(t)].size(); }

  // Packed (first, second) key of a bigram id, in id order.
  const std::vector<std::uint64_t>& keys(Table t) const { return keys_[slot(t)]; }

 private:
  static std::size_t slot(Table t) {
    const std::size_t i = table_index(t);
    if (i < 2) throw std::logic_error("not a bigram table");
    return i - 2;
  }

  void intern(Table t, std::uint64_t key) {
    auto& map = maps_[slot(t)];
    auto [it, inserted] = map.try_emplace(key, static_cast<std::uint32_t>(keys_[slot(t)].size()));
    if (inserted) keys_[slot(t)].push_back(key);
  }

  std::uint32_t lookup(Table t, std::uint64_t key) const {
    const auto& map = maps_[slot(t)];
    auto it = map.find(key);
    return it == map.end() ? kUnobserved : it->second;
  }

  std::array<std::unordered_map<std::uint64_t, std::uint32_t>, 3> maps_;
  std::array<std::vector<std::uint64_t>, 3> keys_;
};

inline FactFeatures extract_features(const Fact& f, const BigramIndex& index) {
  FactFeatures x;
  x[kSubject] = {Table::Entity, f.subject};
  x[kRelation] = {Table::Relation, f.relation};
  x[kObject] = {Table::Entity, f.object};
  x[kSubjectRelation] = {Table::SubjectRelation, index.lookup_sr(f.subject, f.relation)};
  x[kRelationObject] = {Table::RelationObject, index.lookup_ro(f.relation, f.object)};
  x[kObjectSubject] = {Table::ObjectSubject, index.lookup_os(f.object, f.subject)};
  return x;
}

// Known-true objects per (subject, relation), used for filtered ranking.
class FilterIndex {
 public:
  FilterIndex() = default;

  void add(const Fact& f) { objects_[pack_pair(f.subject, f.relation)].push_back(f.object); }

  // Sorts and dedups the per-query object lists. Call once after all add()s.
  void finalize() {
    for (auto& [key, objs] : objects_) {
      std::sort(objs.begin(), objs.end());
      objs.erase(std::unique(objs.begin(), objs.end()), objs.end());
    }
  }

  std::span<const EntityId> objects(EntityId s, RelationId r) const {
    auto it = objects_.find(pack_pair(s, r));
    if (it == objects_.end()) return {};
    return it->second;
  }

  bool contains(const Fact& f) const {
    auto objs = objects(f.subject, f.relation);
    return std::binary_search(objs.begin(), objs.end(), f.object);
  }

 private:
  std::unordered_map<std::uint64_t, std::vector<EntityId>> objects_;
};

// Every entity o' with (s, r, o') not known to be true, plus the gold object,
// in ascending id order. Writes into `out` to allow buffer reuse.
inline void filtered_candidates(const Fact& f, const FilterIndex& filter, std::size_t num_entities,
                                std::vector<EntityId>& out) {
  out.clear();
  auto known = filter.objects(f.subject, f.relation);
  auto it = known.begin();
  for (EntityId e = 0; e < num_entities; ++e) {
    while (it != known.end() && *it < e) ++it;
    const bool is_known = it != known.end() && *it == e;
    if (!is_known || e == f.object) out.push_back(e);
  }
}

inline std::vector<EntityId> filtered_candidates(const Fact& f, const FilterIndex& filter,
                                                 std::size_t num_entities) {
  std::vector<EntityId> out;
  filtered_candidates(f, filter, num_entities, out);
  return out;
}

// Valid/test entities and relations that never occur in training.
struct CoverageReport {
  std::size_t entities_unseen_in_train = 0;
  std::size_t relations_unseen_in_train = 0;
  std::size_t valid_facts_with_unseen = 0;
  std::size_t test_facts_with_unseen = 0;
};

struct Dataset {
  Vocabulary vocab;
  BigramIndex bigrams;
  std::vector<Fact> train;  // KB facts first, then textual facts, each in file order
  std::vector<Fact> valid;
  std::vector<Fact> test;
  FilterIndex filter;  // train + valid + test
  CoverageReport coverage;

  std::size_t num_textual_train() const {
    return static_cast<std::size_t>(
        std::count_if(train.begin(), train.end(), [](const Fact& f) { return f.is_textual; }));
  }

  // Hash of entity names, relation names and bigram keys in id order.
  std::uint64_t fingerprint() const {
    Fnv1a h;
    h.update_u64(vocab.num_entities());
    for (const auto& n : vocab.entities.names()) {
      h.update(n);
      h.update(std::string_view("\0", 1));
    }
    h.update_u64(vocab.num_relations());
    for (const auto& n : vocab.relations.names()) {
      h.update(n);
      h.update(std::string_view("\0", 1));
    }
    for (Table t : {Table::SubjectRelation, Table::RelationObject, Table::ObjectSubject}) {
      h.update_u64(bigrams.size(t));
      for (auto k : bigrams.keys(t)) h.update_u64(k);
    }
    return h.digest();
  }
};

struct DatasetPaths {
  std::string train;
  std::string valid;
  std::string test;
  std::string textual;  // empty when there are no textual mentions
};

// Builds vocabularies, bigram index and filter from already-parsed splits.
// Textual triples are appended to the training split with is_textual set.
inline Dataset build_dataset(const std::vector<RawTriple>& train,
                             const std::vector<RawTriple>& textual,
                             const std::vector<RawTriple>& valid,
                             const std::vector<RawTriple>& test) {
  if (train.empty()) throw ConfigError("training split is empty");
  Dataset d;
  auto encode = [&d](const RawTriple& t, bool textual_fact) {
    Fact f;
    f.subject = d.vocab.entities.add(t.subject);
    f.relation = d.vocab.relations.add(t.relation);
    f.object = d.vocab.entities.add(t.object);
    f.is_textual = textual_fact;
    return f;
  };

  d.train.reserve(train.size() + textual.size());
  for (const auto& t : train) d.train.push_back(encode(t, false));
  for (const auto& t : textual) d.train.push_back(encode(t, true));
  const std::size_t train_entities = d.vocab.num_entities();
  const std::size_t train_relations = d.vocab.num_relations();

  for (const auto& f : d.train) d.bigrams.observe(f);

  auto encode_eval = [&](const std::vector<RawTriple>& raw, std::vector<Fact>& out,
                         std::size_t& unseen_facts) {
    out.reserve(raw.size());
    for (const auto& t : raw) {
      Fact f = encode(t, false);
      if (f.subject >= train_entities || f.object >= train_entities ||
          f.relation >= train_relations) {
        ++unseen_facts;
      }
      out.push_back(f);
    }
  };
  encode_eval(valid, d.valid, d.coverage.valid_facts_with_unseen);
  encode_eval(test, d.test, d.coverage.test_facts_with_unseen);
  d.coverage.entities_unseen_in_train = d.vocab.num_entities() - train_entities;
  d.coverage.relations_unseen_in_train = d.vocab.num_relations() - train_relations;

  for (const auto* split : {&d.train, &d.valid, &d.test}) {
    for (const auto& f : *split) d.filter.add(f);
  }
  d.filter.finalize();
  return d;
}

inline Dataset load_dataset(const DatasetPaths& paths) {
  if (paths.train.empty()) throw ConfigError("no training file given");
  auto train = read_triples(paths.train);
  std::vector<RawTriple> textual;
  if (!paths.textual.empty()) textual = read_triples(paths.textual, /*allow_count_column=*/true);
  std::vector<RawTriple> valid, test;
  if (!paths.valid.empty()) valid = read_triples(paths.valid);
  if (!paths.test.empty()) test = read_triples(paths.test);
  if (train.empty()) throw ConfigError("training file " + paths.train + " has no facts");
  return build_dataset(train, textual, valid, test);
}

}  // namespace bfm
