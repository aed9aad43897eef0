// Acceptance run: one PASS / FAIL / SKIP line per criterion.
//
// Dataset-dependent criteria read BIGRAMFM_FB15K237_DIR (a directory with
// train.txt, valid.txt, test.txt and text_emnlp.txt or text_cvsc.txt). The
// full reproduction additionally needs BIGRAMFM_FULL_REPRO=1 and optionally
// BIGRAMFM_REPRO_GRID pointing at a JSON file with "train" and "grid"
// sections overriding the defaults below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bigramfm/bigramfm.hpp"
#include "bigramfm/experiment.hpp"
#include "support/finite_diff.hpp"
#include "support/oracles.hpp"
#include "support/toy_kb.hpp"
#include "support/workspace.hpp"

namespace {

using namespace bfm;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

Fact random_query(const Dataset& d, std::mt19937_64& rng) {
  std::uniform_int_distribution<EntityId> e(0, static_cast<EntityId>(d.vocab.num_entities() - 1));
  std::uniform_int_distribution<RelationId> r(0, static_cast<RelationId>(d.vocab.num_relations() - 1));
  std::uniform_int_distribution<std::size_t> i(0, d.train.size() - 1);
  if (std::bernoulli_distribution(0.5)(rng)) return d.train[i(rng)];
  return Fact{e(rng), r(rng), e(rng)};
}

TrainingBatch batch_from(const Dataset& d, const std::vector<Fact>& pos, const std::vector<Fact>& neg,
                         double tau) {
  TrainingBatch b;
  auto w = [tau](const Fact& f) { return f.is_textual ? tau : 1.0; };
  for (const auto& f : pos) b.positives.push_back({extract_features(f, d.bigrams), w(f)});
  for (const auto& f : neg) b.negatives.push_back({extract_features(f, d.bigrams), w(f)});
  return b;
}

std::vector<FeatureRef> batch_params(const TrainingBatch& b) {
  std::vector<FeatureRef> refs;
  for (const auto* side : {&b.positives, &b.negatives}) {
    for (const auto& wf : *side) refs.insert(refs.end(), wf.features.slots.begin(), wf.features.slots.end());
  }
  return refs;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Dataset d = toy::random_corpus(11, 40, 8, 400, 0, 0, 150).build();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  std::size_t instances = 0;
  for (std::size_t k : {1u, 4u, 16u}) {
    for (int s = 0; s < 20; ++s) {
      const EmbeddingStore store = toy::random_store(d, k, 100 * k + s);
      const oracle::DenseFm dense(store, d.bigrams);
      for (int q = 0; q < 50; ++q) {
        const Fact f = random_query(d, rng);
        const auto x = extract_features(f, d.bigrams);
        for (Variant v : kAllVariants) {
          const auto cfg = ModelConfig::make(v);
          worst = std::max(worst, std::abs(score(x, store, cfg) - dense.score(f.subject, f.relation, f.object, cfg)));
        }
        ++instances;
      }
    }
  }
  const double t = seconds_since(t0);
  return verdict(worst < 1e-10 && t < 10.0,
                 fmt("%zu instances per variant per k in {1,4,16}, max abs err %.3g (< 1e-10), %.2fs (< 10s)",
                     instances / 3, worst, t));
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  Dataset d = toy::random_corpus(12, 12, 4, 60, 0, 0, 20).build();
  std::mt19937_64 rng(2);
  double worst_score = 0.0, worst_loss = 0.0;
  for (Variant v : kAllVariants) {
    const auto cfg = ModelConfig::make(v);
    for (int trial = 0; trial < 100; ++trial) {
      EmbeddingStore store = toy::random_store(d, 4, 1000 + trial);
      const Fact f = random_query(d, rng);
      const auto x = extract_features(f, d.bigrams);
      const auto g = score_gradient(x, store, cfg);
      worst_score = std::max(worst_score, oracle::max_fd_error([&] { return score(x, store, cfg); }, store,
                                                               {x.slots.begin(), x.slots.end()}, g));

      std::vector<Fact> pos;
      std::uniform_int_distribution<std::size_t> pick(0, d.train.size() - 1);
      for (int i = 0; i < 3; ++i) pos.push_back(d.train[pick(rng)]);
      const auto neg = sample_negatives(pos, 2, d.vocab.num_entities(), rng);
      const auto b = batch_from(d, pos, neg, 0.5);
      const LossParams params{2.0, 0.05};
      SparseGradient lg(4);
      loss_and_gradient(b, store, cfg, params, &lg);
      worst_loss = std::max(worst_loss, oracle::max_fd_error([&] { return loss(b, store, cfg, params); }, store,
                                                             batch_params(b), lg));
    }
  }
  const double t = seconds_since(t0);
  return verdict(worst_score < 1e-5 && worst_loss < 1e-5 && t < 30.0,
                 fmt("100 trials per variant, max rel err score %.3g, loss %.3g (< 1e-5), %.2fs (< 30s)",
                     worst_score, worst_loss, t));
}

Outcome loss_identities() {
  bool ok = true;
  std::string notes;

  Dataset d = toy::random_corpus(13, 8, 3, 20, 0, 0, 10).build();
  const EmbeddingStore zero(3, table_sizes(d));
  double zero_worst = 0.0;
  for (Variant v : kAllVariants) {
    for (std::size_t eta : {1u, 3u, 8u}) {
      const Fact p = d.train[0];
      std::vector<Fact> neg(eta, Fact{p.subject, p.relation, (p.object + 1) % 8});
      zero_worst = std::max(zero_worst, std::abs(loss(batch_from(d, {p}, neg, 1.0), zero, ModelConfig::make(v),
                                                      {static_cast<double>(eta), 0.0})));
    }
  }
  ok &= zero_worst < 1e-15;
  notes += fmt("zero-store balance |loss| %.3g", zero_worst);

  const EmbeddingStore store = toy::random_store(d, 3, 5);
  std::mt19937_64 rng(11);
  const auto neg = sample_negatives(d.train, 2, d.vocab.num_entities(), rng);
  std::vector<Fact> kb_pos, kb_neg;
  for (const auto& f : d.train) {
    if (!f.is_textual) kb_pos.push_back(f);
  }
  for (const auto& f : neg) {
    if (!f.is_textual) kb_neg.push_back(f);
  }
  bool tau_exact = true;
  for (Variant v : kAllVariants) {
    const auto cfg = ModelConfig::make(v);
    SparseGradient a(3), b(3);
    const double la = loss_and_gradient(batch_from(d, d.train, neg, 0.0), store, cfg, {2.0, 0.2}, &a);
    const double lb = loss_and_gradient(batch_from(d, kb_pos, kb_neg, 0.0), store, cfg, {2.0, 0.2}, &b);
    tau_exact &= la == lb;
    for (const auto& e : b.entries()) {
      const auto i = a.find(e.ref);
      const auto j = b.find(e.ref);
      tau_exact &= i >= 0 && a.entries()[i].dv == e.dv;
      for (std::size_t c = 0; i >= 0 && c < 3; ++c) tau_exact &= a.dw(i)[c] == b.dw(j)[c];
    }
    for (const auto& e : a.entries()) {
      if (b.find(e.ref) >= 0) continue;
      const auto i = a.find(e.ref);
      tau_exact &= e.dv == 0.0;
      for (std::size_t c = 0; c < 3; ++c) tau_exact &= a.dw(i)[c] == 0.0;
    }
  }
  ok &= tau_exact;
  notes += tau_exact ? "; tau=0 loss and gradient identical to KB-only batch" : "; tau=0 mismatch";

  const std::vector<Fact> pos(d.train.begin(), d.train.begin() + 6);
  const auto n2 = sample_negatives(pos, 2, d.vocab.num_entities(), rng);
  std::vector<Fact> doubled;
  for (const auto& f : n2) {
    doubled.push_back(f);
    doubled.push_back(f);
  }
  double dup_worst = 0.0;
  for (Variant v : kAllVariants) {
    const auto cfg = ModelConfig::make(v);
    const double a = loss(batch_from(d, pos, n2, 1.0), store, cfg, {2.0, 0.1});
    const double b = loss(batch_from(d, pos, doubled, 1.0), store, cfg, {4.0, 0.1});
    dup_worst = std::max(dup_worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }
  ok &= dup_worst <= 1e-12;
  notes += fmt("; eta-duplication rel diff %.3g (<= 1e-12, floating-point summation order)", dup_worst);
  return verdict(ok, notes);
}

std::vector<Fact> all_kb_facts(const Dataset& d) {
  std::vector<Fact> out;
  for (const auto* split : {&d.train, &d.valid, &d.test}) {
    for (const auto& f : *split) {
      if (!f.is_textual) out.push_back(f);
    }
  }
  return out;
}

Outcome ranking_oracle() {
  std::size_t checked = 0, mismatches = 0;
  double partition_worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Dataset d = toy::random_corpus(500 + seed, 4 + seed % 7, 2 + seed % 3, 25, 5, 10, 8).build();
    if (d.vocab.num_entities() > 10) return {Status::Fail, "toy KB exceeded 10 entities"};
    const auto truth = all_kb_facts(d);
    const EvaluationContext ctx(d);
    for (Variant v : kAllVariants) {
      const auto cfg = ModelConfig::make(v);
      EmbeddingStore s(1 + seed % 3, table_sizes(d));
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> coarse(-1, 1);
      for (std::size_t t = 0; t < kNumTables; ++t) {
        for (double& x : s.offsets_mut(static_cast<Table>(t))) x = coarse(rng);
        for (double& x : s.vectors_mut(static_cast<Table>(t))) x = coarse(rng);
      }
      const oracle::DenseFm dense(s, d.bigrams);
      const auto report = evaluate(d.test, s, cfg, ctx);
      for (const auto& rf : report.ranks) {
        std::vector<std::pair<EntityId, double>> scored;
        for (EntityId e : oracle::brute_force_candidates(rf.fact, truth, d.vocab.num_entities())) {
          scored.emplace_back(e, dense.score(rf.fact.subject, rf.fact.relation, e, cfg));
        }
        mismatches += rf.rank != oracle::sort_rank(scored, rf.fact.object);
        ++checked;
      }
      if (report.count > 0) {
        const double weighted = (report.mrr_no_tm.value_or(0.0) * static_cast<double>(report.count_no_tm) +
                                 report.mrr_with_tm.value_or(0.0) * static_cast<double>(report.count_with_tm)) /
                                static_cast<double>(report.count);
        partition_worst = std::max(partition_worst, std::abs(report.mrr - weighted));
      }
    }
  }
  return verdict(mismatches == 0 && partition_worst <= 1e-12,
                 fmt("50 toy KBs, %zu ranks, %zu oracle mismatches; partition identity max diff %.3g (<= 1e-12)",
                     checked, mismatches, partition_worst));
}

TrainConfig toy_config() {
  TrainConfig c;
  c.eta = 4;
  c.l2 = 0.1;
  c.k = 4;
  c.lr = 0.1;
  c.init_std = 0.1;
  c.batch_size = 8;
  c.epochs = 200;
  c.seed = 1234;
  return c;
}

Outcome toy_convergence() {
  Dataset d = toy::deterministic_object_kb().build();
  if (d.train.size() != 20) return {Status::Fail, "toy KB does not have 20 training facts"};
  const EvaluationContext ctx(d);
  const auto ro = ModelConfig::make(Variant::RoVsS);
  const auto dm = ModelConfig::make(Variant::DistMult);
  const TrainResult a = train(d, ro, toy_config());
  const TrainResult b = train(d, dm, toy_config());
  if (a.diverged || b.diverged) return {Status::Fail, "training diverged"};
  double min_sigma = 1.0;
  for (const auto& f : d.train) min_sigma = std::min(min_sigma, truth_score(score(extract_features(f, d.bigrams), a.store, ro)));
  const double mrr_ro = evaluate(d.test, a.store, ro, ctx).mrr;
  const double mrr_dm = evaluate(d.test, b.store, dm, ctx).mrr;
  return verdict(min_sigma > 0.9 && mrr_ro > mrr_dm,
                 fmt("min training sigma(X) %.4f (> 0.9) after %zu epochs; test MRR ro_vs_s %.2f > distmult %.2f",
                     min_sigma, a.trace.size(), mrr_ro, mrr_dm));
}

std::optional<DatasetPaths> dataset_paths() {
  const char* dir = std::getenv("BIGRAMFM_FB15K237_DIR");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  const std::filesystem::path base(dir);
  DatasetPaths p{(base / "train.txt").string(), (base / "valid.txt").string(), (base / "test.txt").string(), ""};
  for (const char* name : {"text_emnlp.txt", "text_cvsc.txt", "text.txt"}) {
    if (std::filesystem::exists(base / name)) {
      p.textual = (base / name).string();
      break;
    }
  }
  return p;
}

Outcome dataset_statistics() {
  const auto paths = dataset_paths();
  if (!paths) return {Status::Skip, "BIGRAMFM_FB15K237_DIR not set; dataset not available"};
  if (paths->textual.empty()) return {Status::Fail, "no textual mention file found in dataset directory"};
  const auto t0 = Clock::now();
  const DatasetStats s = compute_stats(load_dataset(*paths));
  const double t = seconds_since(t0);
  const double so = s.unseen_os_pct.value_or(-100), ro = s.unseen_ro_pct.value_or(-100),
               sr = s.unseen_sr_pct.value_or(-100);
  const bool ok = std::abs(so - 73.0) <= 2.0 && std::abs(ro - 10.0) <= 2.0 && std::abs(sr - 24.0) <= 2.0 && t < 120.0;
  return verdict(ok, fmt("unseen (s,o)/(r,o)/(s,r) = %.1f/%.1f/%.1f%% (target 73/10/24 +-2), %.1fs (< 120s)", so, ro,
                         sr, t));
}

Outcome full_reproduction() {
  const auto paths = dataset_paths();
  if (!paths) return {Status::Skip, "BIGRAMFM_FB15K237_DIR not set; dataset not available"};
  const char* enabled = std::getenv("BIGRAMFM_FULL_REPRO");
  if (enabled == nullptr || std::string(enabled) != "1") {
    return {Status::Skip, "multi-hour grid search; set BIGRAMFM_FULL_REPRO=1 to run"};
  }
  TrainConfig base;
  base.lr = 1.0;
  base.batch_size = 1024;
  base.init_std = 1.0;
  base.epochs = 50;
  base.patience = 3;
  base.eval_every = 5;
  base.threads = std::max(1u, std::thread::hardware_concurrency());
  GridSpec grid{{0.0, 1e-4, 1e-3}, {5, 10}, {0.0, 0.1, 1.0}, {100}, {}};
  if (const char* g = std::getenv("BIGRAMFM_REPRO_GRID")) {
    std::ifstream in(g);
    const auto j = nlohmann::json::parse(in);
    if (j.contains("train")) train_config_from_json(j.at("train"), base);
    if (j.contains("grid")) {
      const auto& gj = j.at("grid");
      if (gj.contains("l2")) grid.l2 = gj.at("l2").get<std::vector<double>>();
      if (gj.contains("eta")) grid.eta = gj.at("eta").get<std::vector<std::size_t>>();
      if (gj.contains("tau")) grid.tau = gj.at("tau").get<std::vector<double>>();
      if (gj.contains("k")) grid.k = gj.at("k").get<std::vector<std::size_t>>();
      if (gj.contains("lr")) grid.lr = gj.at("lr").get<std::vector<double>>();
    }
  }
  const Dataset data = load_dataset(*paths);
  const EvaluationContext ctx(data);
  std::map<Variant, double> mrr;
  for (Variant v : {Variant::SumOfAblations, Variant::RoVsS, Variant::FullFm, Variant::DistMult, Variant::FModel}) {
    const auto cfg = ModelConfig::make(v);
    auto gs = grid_search(grid, data, cfg, base);
    mrr[v] = evaluate(data.test, gs.points[gs.best].result.store, cfg, ctx, base.threads).mrr;
  }
  const bool order = mrr[Variant::SumOfAblations] > mrr[Variant::RoVsS] && mrr[Variant::RoVsS] > mrr[Variant::FullFm] &&
                     mrr[Variant::FullFm] > mrr[Variant::DistMult] && mrr[Variant::DistMult] > mrr[Variant::FModel];
  const bool close = std::abs(mrr[Variant::RoVsS] - 32.0) <= 3.0 && std::abs(mrr[Variant::SumOfAblations] - 33.2) <= 3.0;
  return verdict(order, fmt("test MRR sum %.1f, ro_vs_s %.1f, full_fm %.1f, distmult %.1f, f_model %.1f; ordering %s; "
                            "values %s (+-3 of 33.2 / 32.0)",
                            mrr[Variant::SumOfAblations], mrr[Variant::RoVsS], mrr[Variant::FullFm],
                            mrr[Variant::DistMult], mrr[Variant::FModel], order ? "preserved" : "inverted",
                            close ? "within" : "outside"));
}

Outcome determinism() {
  toy::TempDir dir;
  const auto splits = toy::random_corpus(21, 15, 4, 120, 20, 30, 40);
  nlohmann::json cfg{{"dataset", toy::write_splits(dir.path(), splits)},
                     {"variant", "sum"},
                     {"seed", 99},
                     {"train",
                      {{"eta", 3}, {"tau", 0.5}, {"l2", 0.05}, {"k", 6}, {"lr", 0.05}, {"batch_size", 16},
                       {"epochs", 15}, {"init_std", 0.1}, {"threads", 4}}}};
  std::string trace[2], report[2];
  for (int run = 0; run < 2; ++run) {
    const auto out = dir / ("run" + std::to_string(run));
    cfg["out_dir"] = out.string();
    toy::write_file(dir / "config.json", cfg.dump(2));
    const ExperimentSpec spec = load_spec((dir / "config.json").string());
    std::ostringstream log;
    if (cmd_train(spec, log) != kExitOk) return {Status::Fail, "training failed"};
    cmd_evaluate(spec, (out / "checkpoint.bin").string(), log);
    trace[run] = toy::read_file(out / "trace.csv");
    report[run] = toy::read_file(out / "report.json") + toy::read_file(out / "report.txt");
  }
  const bool ok = !trace[0].empty() && trace[0] == trace[1] && report[0] == report[1];
  return verdict(ok, fmt("two seeded runs (4 threads): traces %s, reports %s",
                         trace[0] == trace[1] ? "byte-identical" : "differ",
                         report[0] == report[1] ? "byte-identical" : "differ"));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 FM oracle equivalence", oracle_equivalence},
      {"2 gradient checks", gradient_checks},
      {"3 loss identities", loss_identities},
      {"4 ranking oracle", ranking_oracle},
      {"5 toy convergence", toy_convergence},
      {"6 dataset statistics", dataset_statistics},
      {"7 full reproduction", full_reproduction},
      {"8 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << tag << "  " << name << ": " << o.detail << std::endl;
    failures += o.status == Status::Fail;
  }
  return failures == 0 ? 0 : 1;
}
