#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "bigramfm/dataset.hpp"
#include "bigramfm/embedding_store.hpp"
#include "bigramfm/evaluator.hpp"
#include "bigramfm/model_config.hpp"
#include "bigramfm/stats.hpp"
#include "bigramfm/trainer.hpp"

namespace bfm {

using json = nlohmann::json;

// Exit codes of the command-line driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitDiverged = 3,
};

struct ExperimentSpec {
  DatasetPaths data;
  Variant variant = Variant::FullFm;
  TrainConfig train;
  std::optional<GridSpec> grid;
  std::string out_dir = "out";

  std::uint64_t seed() const { return train.seed; }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal().string();
}

}  // namespace detail

inline json train_config_to_json(const TrainConfig& t) {
  return json{{"eta", t.eta},
              {"tau", t.tau},
              {"l2", t.l2},
              {"k", t.k},
              {"lr", t.lr},
              {"batch_size", t.batch_size},
              {"epochs", t.epochs},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_eps", t.adam_eps},
              {"init_std", t.init_std},
              {"patience", t.patience},
              {"eval_every", t.eval_every},
              {"valid_subsample", t.valid_subsample},
              {"threads", t.threads}};
}

inline void train_config_from_json(const json& j, TrainConfig& t) {
  const std::string where = "train";
  detail::reject_unknown_keys(j, {"eta", "tau", "l2", "k", "lr", "batch_size", "epochs", "adam_beta1",
                                  "adam_beta2", "adam_eps", "init_std", "patience", "eval_every",
                                  "valid_subsample", "threads"},
                              where);
  detail::read_field(j, "eta", t.eta, where);
  detail::read_field(j, "tau", t.tau, where);
  detail::read_field(j, "l2", t.l2, where);
  detail::read_field(j, "k", t.k, where);
  detail::read_field(j, "lr", t.lr, where);
  detail::read_field(j, "batch_size", t.batch_size, where);
  detail::read_field(j, "epochs", t.epochs, where);
  detail::read_field(j, "adam_beta1", t.adam_beta1, where);
  detail::read_field(j, "adam_beta2", t.adam_beta2, where);
  detail::read_field(j, "adam_eps", t.adam_eps, where);
  detail::read_field(j, "init_std", t.init_std, where);
  detail::read_field(j, "patience", t.patience, where);
  detail::read_field(j, "eval_every", t.eval_every, where);
  detail::read_field(j, "valid_subsample", t.valid_subsample, where);
  detail::read_field(j, "threads", t.threads, where);
}

// Parses an experiment description. Relative dataset paths are resolved
// against `base_dir`.
inline ExperimentSpec parse_spec(const json& j, const std::filesystem::path& base_dir = {}) {
  detail::reject_unknown_keys(j, {"dataset", "variant", "train", "grid", "out_dir", "seed"}, "config");
  ExperimentSpec spec;
  if (!j.contains("dataset")) throw ConfigError("config is missing 'dataset'");
  const json& d = j.at("dataset");
  detail::reject_unknown_keys(d, {"train", "valid", "test", "textual"}, "dataset");
  detail::read_field(d, "train", spec.data.train, "dataset");
  detail::read_field(d, "valid", spec.data.valid, "dataset");
  detail::read_field(d, "test", spec.data.test, "dataset");
  detail::read_field(d, "textual", spec.data.textual, "dataset");
  if (spec.data.train.empty()) throw ConfigError("dataset.train is required");
  for (auto* p : {&spec.data.train, &spec.data.valid, &spec.data.test, &spec.data.textual}) {
    *p = detail::resolve_path(*p, base_dir);
  }

  std::string variant = std::string(variant_name(spec.variant));
  detail::read_field(j, "variant", variant, "config");
  auto v = parse_variant(variant);
  if (!v) throw ConfigError("unknown variant '" + variant + "'; valid names: " + valid_variant_names());
  spec.variant = *v;

  if (j.contains("train")) train_config_from_json(j.at("train"), spec.train);
  detail::read_field(j, "seed", spec.train.seed, "config");
  detail::read_field(j, "out_dir", spec.out_dir, "config");

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    detail::reject_unknown_keys(g, {"l2", "eta", "tau", "k", "lr"}, "grid");
    GridSpec grid{{spec.train.l2}, {spec.train.eta}, {spec.train.tau}, {spec.train.k}, {}};
    detail::read_field(g, "l2", grid.l2, "grid");
    detail::read_field(g, "eta", grid.eta, "grid");
    detail::read_field(g, "tau", grid.tau, "grid");
    detail::read_field(g, "k", grid.k, "grid");
    detail::read_field(g, "lr", grid.lr, "grid");
    grid.expand(spec.train);  // validates non-empty axes
    spec.grid = std::move(grid);
  }
  spec.train.validate();
  return spec;
}

// Every field with defaults materialized.
inline json spec_to_json(const ExperimentSpec& spec) {
  json j{{"dataset",
          {{"train", spec.data.train},
           {"valid", spec.data.valid},
           {"test", spec.data.test},
           {"textual", spec.data.textual}}},
         {"variant", std::string(variant_name(spec.variant))},
         {"train", train_config_to_json(spec.train)},
         {"out_dir", spec.out_dir},
         {"seed", spec.train.seed}};
  if (spec.grid) {
    j["grid"] = {{"l2", spec.grid->l2}, {"eta", spec.grid->eta}, {"tau", spec.grid->tau}, {"k", spec.grid->k}};
    if (!spec.grid->lr.empty()) j["grid"]["lr"] = spec.grid->lr;
  }
  return j;
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return parse_spec(j, std::filesystem::path(path).parent_path());
}

inline json stats_to_json(const DatasetStats& s) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"entities", s.num_entities},
              {"relations", s.num_relations},
              {"train_facts", s.train_facts},
              {"train_textual_facts", s.train_textual_facts},
              {"valid_facts", s.valid_facts},
              {"test_facts", s.test_facts},
              {"observed_bigrams", {{"sr", s.observed_sr}, {"ro", s.observed_ro}, {"os", s.observed_os}}},
              {"unseen_test_bigram_pct",
               {{"so", opt(s.unseen_os_pct)}, {"ro", opt(s.unseen_ro_pct)}, {"sr", opt(s.unseen_sr_pct)}}},
              {"coverage",
               {{"entities_unseen_in_train", s.coverage.entities_unseen_in_train},
                {"relations_unseen_in_train", s.coverage.relations_unseen_in_train},
                {"valid_facts_with_unseen", s.coverage.valid_facts_with_unseen},
                {"test_facts_with_unseen", s.coverage.test_facts_with_unseen}}}};
}

inline std::string format_stats(const DatasetStats& s) {
  auto pct = [](const std::optional<double>& x) {
    if (!x) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", *x);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "entities             " << s.num_entities << "\n"
      << "relations            " << s.num_relations << "\n"
      << "train facts          " << s.train_facts << " (" << s.train_textual_facts << " textual)\n"
      << "valid facts          " << s.valid_facts << "\n"
      << "test facts           " << s.test_facts << "\n"
      << "observed bigrams     sr=" << s.observed_sr << " ro=" << s.observed_ro
      << " os=" << s.observed_os << "\n"
      << "unseen in test       (s,o)=" << pct(s.unseen_os_pct) << " (r,o)=" << pct(s.unseen_ro_pct)
      << " (s,r)=" << pct(s.unseen_sr_pct) << "\n";
  return out.str();
}

inline json report_to_json(const RankingReport& r, const SingleObjectReport& single,
                           const ExperimentSpec& spec, const Dataset& data) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  json ranks = json::array();
  for (const auto& rf : r.ranks) {
    ranks.push_back({{"subject", data.vocab.entities.name(rf.fact.subject)},
                     {"relation", data.vocab.relations.name(rf.fact.relation)},
                     {"object", data.vocab.entities.name(rf.fact.object)},
                     {"rank", rf.rank},
                     {"candidates", rf.num_candidates},
                     {"with_tm", rf.with_tm}});
  }
  json hits = json::object();
  for (std::size_t i = 0; i < kHitsAt.size(); ++i) hits[std::to_string(kHitsAt[i])] = r.hits[i];
  return json{{"model", std::string(variant_name(spec.variant))},
              {"tau", spec.train.tau},
              {"facts", r.count},
              {"facts_no_tm", r.count_no_tm},
              {"facts_with_tm", r.count_with_tm},
              {"hits_at", hits},
              {"mrr", r.mrr},
              {"mrr_no_tm", opt(r.mrr_no_tm)},
              {"mrr_with_tm", opt(r.mrr_with_tm)},
              {"single_object", {{"subset_size", single.subset_size}, {"hits_at_1", opt(single.hits_at_1)}}},
              {"metadata",
               {{"ranking", "filtered, object side"},
                {"ties", "gold placed at mean rank of its tie group, rounded up"},
                {"tm_split", "(s,o) pair has a training textual mention, exact order"}}},
              {"per_fact_ranks", ranks}};
}

// Aligned text table: HITS@1/3/10, MRR overall / no TM / with TM.
inline std::string format_report_table(const RankingReport& r, const ExperimentSpec& spec) {
  auto cell = [](const std::optional<double>& x) {
    char buf[16];
    if (x) {
      std::snprintf(buf, sizeof buf, "%8.1f", *x);
    } else {
      std::snprintf(buf, sizeof buf, "%8s", "-");
    }
    return std::string(buf);
  };
  char head[160];
  std::snprintf(head, sizeof head, "%-10s %5s %8s %8s %8s %8s %8s %8s\n", "Model", "tau", "HITS@1",
                "HITS@3", "HITS@10", "MRR", "no TM", "with TM");
  char lead[32];
  std::snprintf(lead, sizeof lead, "%-10s %5.2f", std::string(variant_name(spec.variant)).c_str(),
                spec.train.tau);
  return std::string(head) + lead + " " + cell(r.hits[0]) + " " + cell(r.hits[1]) + " " +
         cell(r.hits[2]) + " " + cell(r.mrr) + " " + cell(r.mrr_no_tm) + " " + cell(r.mrr_with_tm) +
         "\n";
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

inline void write_trace(const std::filesystem::path& p, const std::vector<EpochRecord>& trace) {
  std::ostringstream s;
  write_trace_csv(s, trace);
  write_text(p, s.str());
}

inline std::filesystem::path ensure_out_dir(const ExperimentSpec& spec) {
  std::filesystem::path dir(spec.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

}  // namespace detail

// Writes stats.json into the output directory and returns the statistics.
inline DatasetStats cmd_stats(const ExperimentSpec& spec, std::ostream& log) {
  const Dataset data = load_dataset(spec.data);
  const DatasetStats s = compute_stats(data);
  const auto dir = detail::ensure_out_dir(spec);
  detail::write_text(dir / "stats.json", stats_to_json(s).dump(2) + "\n");
  log << format_stats(s);
  return s;
}

// Trains (or grid-searches, when the spec has a grid) and writes
// checkpoint.bin, trace.csv and config.resolved.json. Grid runs also write
// grid/point_NNN/{trace.csv,config.json} and best_config.json.
inline int cmd_train(const ExperimentSpec& spec, std::ostream& log) {
  const Dataset data = load_dataset(spec.data);
  const ModelConfig model = ModelConfig::make(spec.variant);
  const auto dir = detail::ensure_out_dir(spec);
  const CheckpointHeader header{data.fingerprint(), std::string(variant_name(spec.variant))};

  ExperimentSpec resolved = spec;
  TrainResult result;
  if (spec.grid) {
    GridSearchResult gs = grid_search(*spec.grid, data, model, spec.train);
    for (std::size_t i = 0; i < gs.points.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "point_%03zu", i);
      const auto pdir = dir / "grid" / name;
      std::filesystem::create_directories(pdir);
      detail::write_trace(pdir / "trace.csv", gs.points[i].result.trace);
      json pj = train_config_to_json(gs.points[i].config);
      pj["valid_mrr"] = gs.points[i].valid_mrr;
      detail::write_text(pdir / "config.json", pj.dump(2) + "\n");
      log << name << " valid_mrr=" << gs.points[i].valid_mrr << "\n";
    }
    resolved.train = gs.best_config();
    resolved.grid.reset();
    json best = spec_to_json(resolved);
    best["valid_mrr"] = gs.points[gs.best].valid_mrr;
    best["grid_point"] = gs.best;
    detail::write_text(dir / "best_config.json", best.dump(2) + "\n");
    result = std::move(gs.points[gs.best].result);
  } else {
    std::vector<Fact> valid;
    if (spec.train.patience > 0 || !spec.data.valid.empty()) {
      valid = validation_subsample(data.valid, spec.train.valid_subsample, spec.train.seed);
    }
    result = train(data, model, spec.train, valid);
  }

  detail::write_text(dir / "config.resolved.json", spec_to_json(spec).dump(2) + "\n");
  detail::write_trace(dir / "trace.csv", result.trace);
  save_checkpoint((dir / "checkpoint.bin").string(), result.store, header);
  if (result.diverged) {
    log << "training diverged (" << result.diagnostic << "); wrote last good checkpoint\n";
    return kExitDiverged;
  }
  if (!result.trace.empty()) {
    log << "trained " << result.trace.size() << " epochs, final mean loss "
        << result.trace.back().mean_loss << "\n";
  }
  return kExitOk;
}

struct EvaluationOutput {
  RankingReport report;
  SingleObjectReport single_object;
};

// Evaluates a checkpoint on the test split; writes report.json and report.txt.
inline EvaluationOutput cmd_evaluate(const ExperimentSpec& spec, const std::string& checkpoint,
                                     std::ostream& log) {
  const Dataset data = load_dataset(spec.data);
  CheckpointHeader header;
  const EmbeddingStore store = load_checkpoint(checkpoint, header);
  if (header.vocab_hash != data.fingerprint() || store.sizes() != table_sizes(data)) {
    throw ConfigError("checkpoint " + checkpoint +
                      " was trained on a different vocabulary than the configured dataset");
  }
  if (header.variant != variant_name(spec.variant)) {
    throw ConfigError("checkpoint holds variant '" + header.variant + "' but config asks for '" +
                      std::string(variant_name(spec.variant)) + "'");
  }
  const ModelConfig model = ModelConfig::make(spec.variant);
  const EvaluationContext ctx(data);
  EvaluationOutput out;
  out.report = evaluate(data.test, store, model, ctx, spec.train.threads);
  out.single_object = single_object_analysis(data.test, data.train, store, model, ctx, spec.train.threads);

  const auto dir = detail::ensure_out_dir(spec);
  detail::write_text(dir / "report.json",
                     report_to_json(out.report, out.single_object, spec, data).dump(2) + "\n");
  const std::string table = format_report_table(out.report, spec);
  detail::write_text(dir / "report.txt", table);
  log << table;
  return out;
}

}  // namespace bfm
