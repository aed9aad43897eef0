#pragma once

#include <optional>

#include "bigramfm/dataset.hpp"

namespace bfm {

struct DatasetStats {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t train_facts = 0;  // KB + textual
  std::size_t train_textual_facts = 0;
  std::size_t valid_facts = 0;
  std::size_t test_facts = 0;
  std::size_t observed_sr = 0;
  std::size_t observed_ro = 0;
  std::size_t observed_os = 0;
  // Percent of KB test facts whose bigram of each type never occurs in
  // training; null when there are no test facts.
  std::optional<double> unseen_os_pct;
  std::optional<double> unseen_ro_pct;
  std::optional<double> unseen_sr_pct;
  CoverageReport coverage;
};

inline DatasetStats compute_stats(const Dataset& d) {
  DatasetStats s;
  s.num_entities = d.vocab.num_entities();
  s.num_relations = d.vocab.num_relations();
  s.train_facts = d.train.size();
  s.train_textual_facts = d.num_textual_train();
  s.valid_facts = d.valid.size();
  s.test_facts = d.test.size();
  s.observed_sr = d.bigrams.size(Table::SubjectRelation);
  s.observed_ro = d.bigrams.size(Table::RelationObject);
  s.observed_os = d.bigrams.size(Table::ObjectSubject);
  s.coverage = d.coverage;

  std::size_t n = 0, os = 0, ro = 0, sr = 0;
  for (const auto& f : d.test) {
    if (f.is_textual) continue;
    ++n;
    os += d.bigrams.lookup_os(f.object, f.subject) == kUnobserved;
    ro += d.bigrams.lookup_ro(f.relation, f.object) == kUnobserved;
    sr += d.bigrams.lookup_sr(f.subject, f.relation) == kUnobserved;
  }
  if (n > 0) {
    const double denom = static_cast<double>(n);
    s.unseen_os_pct = 100.0 * static_cast<double>(os) / denom;
    s.unseen_ro_pct = 100.0 * static_cast<double>(ro) / denom;
    s.unseen_sr_pct = 100.0 * static_cast<double>(sr) / denom;
  }
  return s;
}

}  // namespace bfm
