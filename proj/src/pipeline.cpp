#include "finfre/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "finfre/csv.hpp"
#include "finfre/error.hpp"
#include "finfre/normalize.hpp"
#include "finfre/random.hpp"
#include "finfre/scoring.hpp"

namespace finfre {
namespace fs = std::filesystem;

// ---- config ----

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw ConfigError("experiment config needs 'dataset'");
  if (output_dir.empty()) throw ConfigError("experiment config needs 'output_dir'");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (feature_strategy != "importance" && feature_strategy != "random") {
    throw ConfigError("feature_strategy must be 'importance' or 'random'");
  }
  backend.validate();
  generation.validate();
  forest.validate();
}

nlohmann::json ExperimentConfig::snapshot(const DatasetConfig& data, const TemplateSpec& tpl) const {
  nlohmann::json backend_json = {{"kind", backend.kind}};
  if (backend.kind == "http") backend_json["model"] = backend.http.model;
  nlohmann::json forest_json = forest;
  forest_json.erase("threads");
  return {{"dataset", data.name},
          {"split", {{"test_size", data.split.test_size}, {"val_size", data.split.val_size}, {"seed", data.split.seed}}},
          {"k", k},
          {"n", n},
          {"feature_strategy", feature_strategy},
          {"feature_seed", feature_strategy == "random" ? feature_seed : 0},
          {"mode", std::string(to_string(mode))},
          {"rag", rag},
          {"exemplar_order", std::string(to_string(exemplar_order))},
          {"template", tpl.name},
          {"backend", backend_json},
          {"generation", generation},
          {"forest", forest_json},
          {"seed", seed}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  ExperimentConfig c;
  try {
    c.dataset = resolve(j.at("dataset").get<std::string>());
    c.output_dir = resolve(j.value("output_dir", std::string("out")));
    c.k = j.value("k", c.k);
    c.n = j.value("n", c.n);
    c.feature_strategy = j.value("feature_strategy", c.feature_strategy);
    c.feature_seed = j.value("feature_seed", c.feature_seed);
    c.mode = parse_prompt_mode(j.value("mode", std::string("scoring")));
    c.rag = j.value("rag", c.rag);
    c.exemplar_order = parse_exemplar_order(j.value("exemplar_order", std::string("desc")));
    c.template_ref = j.value("template", std::string{});
    if (!c.template_ref.empty() && c.template_ref.find('/') != std::string::npos) {
      c.template_ref = resolve(c.template_ref).string();
    }
    if (j.contains("backend")) c.backend = j.at("backend").get<BackendConfig>();
    if (j.contains("generation")) c.generation = j.at("generation").get<GenerationParams>();
    if (j.contains("forest")) c.forest = j.at("forest").get<ForestConfig>();
    c.seed = j.value("seed", c.seed);
    c.export_prompts = j.value("export_prompts", c.export_prompts);
    if (!c.backend.http.transcript.empty()) c.backend.http.transcript = resolve(c.backend.http.transcript).string();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.k) cfg.k = *o.k;
  if (o.n) cfg.n = *o.n;
  if (o.mode) cfg.mode = parse_prompt_mode(*o.mode);
  if (o.no_rag) cfg.rag = false;
  if (o.backend) cfg.backend.kind = *o.backend;
  if (o.seed) cfg.seed = *o.seed;
  if (o.runs) cfg.generation.runs = *o.runs;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
}

std::string index_file_name(const ExperimentConfig& cfg) {
  std::string name = "index-k" + std::to_string(cfg.k) + "-" + cfg.feature_strategy;
  if (cfg.feature_strategy == "random") name += "-s" + std::to_string(cfg.feature_seed);
  return name + ".bin";
}

std::string selection_file_name(const ExperimentConfig& cfg) {
  std::string name = "selected-k" + std::to_string(cfg.k) + "-" + cfg.feature_strategy;
  if (cfg.feature_strategy == "random") name += "-s" + std::to_string(cfg.feature_seed);
  return name + ".json";
}

// ---- splits ----

void save_splits(const fs::path& path, const Dataset& ds, const SplitIndices& idx) {
  auto ids = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::uint64_t> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(ds.row_id(r));
    return out;
  };
  nlohmann::ordered_json doc;
  doc["format"] = "finfre-splits";
  doc["version"] = 1;
  doc["rows"] = ds.size();
  doc["fraud_ratio"] = fraud_ratio(ds);
  doc["test"] = ids(idx.test);
  doc["validation"] = ids(idx.validation);
  doc["external"] = ids(idx.external);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

SplitIndices load_splits(const fs::path& path, const Dataset& ds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  SplitIndices idx;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.value("format", "") != "finfre-splits") throw DataError(path.string() + ": not a splits file");
    std::unordered_map<std::uint64_t, std::size_t> pos;
    pos.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) pos.emplace(ds.row_id(i), i);
    auto rows = [&](const char* field) {
      std::vector<std::size_t> out;
      for (auto id : doc.at(field).get<std::vector<std::uint64_t>>()) {
        const auto it = pos.find(id);
        if (it == pos.end()) throw DataError(path.string() + ": row id " + std::to_string(id) + " not in dataset");
        out.push_back(it->second);
      }
      return out;
    };
    idx.test = rows("test");
    idx.validation = rows("validation");
    idx.external = rows("external");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return idx;
}

namespace {

// ---- staged artifacts ----

struct Loaded {
  DatasetConfig data;
  Dataset full;
};

Loaded load_data(const ExperimentConfig& cfg) {
  Loaded l;
  l.data = load_dataset_config(cfg.dataset);
  l.full = load_csv(l.data.csv, l.data.hints());
  return l;
}

fs::path keys_path(const ExperimentConfig& cfg) { return cfg.output_dir / "stage_keys.json"; }

nlohmann::json read_keys(const ExperimentConfig& cfg) {
  std::ifstream in(keys_path(cfg));
  if (!in) return nlohmann::json::object();
  auto j = nlohmann::json::parse(in, nullptr, false);
  return j.is_object() ? j : nlohmann::json::object();
}

void write_key(const ExperimentConfig& cfg, const std::string& artifact, const nlohmann::json& key) {
  auto keys = read_keys(cfg);
  keys[artifact] = key;
  std::ofstream out(keys_path(cfg), std::ios::trunc);
  out << keys.dump(2) << '\n';
}

bool fresh(const ExperimentConfig& cfg, const std::string& artifact, const nlohmann::json& key) {
  if (!fs::exists(cfg.output_dir / artifact)) return false;
  const auto keys = read_keys(cfg);
  return keys.contains(artifact) && keys.at(artifact) == key;
}

nlohmann::json splits_key(const Loaded& l) {
  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& [name, kind] : l.data.kinds) kinds[name] = std::string(to_string(kind));
  return {{"csv", fs::absolute(l.data.csv).lexically_normal().string()},
          {"label", l.data.label},
          {"columns", kinds},
          {"drop", l.data.drop},
          {"rows", l.full.size()},
          {"split",
           {{"test_size", l.data.split.test_size}, {"val_size", l.data.split.val_size}, {"seed", l.data.split.seed}}}};
}

nlohmann::json ranking_key(const ExperimentConfig& cfg, const Loaded& l) {
  nlohmann::json forest = cfg.forest;
  forest.erase("threads");
  return {{"splits", splits_key(l)}, {"forest", forest}};
}

nlohmann::json index_key(const ExperimentConfig& cfg, const Loaded& l) {
  nlohmann::json key = {{"k", cfg.k}, {"strategy", cfg.feature_strategy}};
  if (cfg.feature_strategy == "random") {
    key["splits"] = splits_key(l);
    key["feature_seed"] = cfg.feature_seed;
  } else {
    key["ranking"] = ranking_key(cfg, l);
  }
  return key;
}

SplitIndices ensure_splits(const ExperimentConfig& cfg, const Loaded& l, bool force) {
  const auto key = splits_key(l);
  const auto path = cfg.output_dir / kSplitsFile;
  if (!force && fresh(cfg, std::string(kSplitsFile), key)) return load_splits(path, l.full);
  fs::create_directories(cfg.output_dir);
  const auto idx = stratified_indices(l.full, l.data.split);
  save_splits(path, l.full, idx);
  write_key(cfg, std::string(kSplitsFile), key);
  return idx;
}

Ranking ensure_ranking(const ExperimentConfig& cfg, const Loaded& l, const SplitIndices& idx, bool force) {
  const auto key = ranking_key(cfg, l);
  const auto path = cfg.output_dir / kRankingFile;
  if (!force && fresh(cfg, std::string(kRankingFile), key)) return load_ranking(path);
  const auto ext = l.full.subset(idx.external);
  const auto forest = train_forest(ext, cfg.forest);
  Ranking r;
  r.importance = importance_scores(forest);
  r.forest = cfg.forest;
  r.rows_used = forest.rows_used();
  save_ranking(path, r);
  write_key(cfg, std::string(kRankingFile), key);
  return r;
}

SelectedFeatures select_features(const ExperimentConfig& cfg, const Loaded& l, const SplitIndices& idx, bool force) {
  if (cfg.feature_strategy == "random") return select_random_k(l.full.schema(), cfg.k, cfg.feature_seed);
  const auto ranking = ensure_ranking(cfg, l, idx, force);
  return select_top_k(ranking.importance, l.full.schema(), cfg.k);
}

RetrievalIndex ensure_index(const ExperimentConfig& cfg, const Loaded& l, const SplitIndices& idx, bool force) {
  const auto name = index_file_name(cfg);
  const auto key = index_key(cfg, l);
  const auto path = cfg.output_dir / name;
  if (!force && fresh(cfg, name, key)) return load_index(path);
  const auto sel = select_features(cfg, l, idx, false);
  const auto ext = l.full.subset(idx.external);
  const auto stats = fit_stats(ext, sel);
  auto index = build_index(ext, sel, stats);
  save_index(path, index);
  {
    std::ofstream out(cfg.output_dir / selection_file_name(cfg), std::ios::trunc);
    out << nlohmann::json(sel).dump(2) << '\n';
  }
  write_key(cfg, name, key);
  return index;
}

TemplateSpec template_for(const ExperimentConfig& cfg, const Loaded& l) {
  return resolve_template(cfg.template_ref.empty() ? l.data.template_ref : cfg.template_ref);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string rows_file(std::size_t run) { return "rows_run" + std::to_string(run) + ".jsonl"; }

RunOutcome run_with(const ExperimentConfig& cfg, const Loaded& l, const SplitIndices& idx, const fs::path& run_dir) {
  const auto index = ensure_index(cfg, l, idx, false);
  const auto& sel = index.selected();
  const auto tpl = template_for(cfg, l);
  validate_template(tpl, sel);
  fs::create_directories(run_dir);

  const std::size_t count = idx.test.size();
  std::vector<RetrievedSet> retrieved(count);
  std::vector<RenderedPrompt> prompts(count);
  PromptOptions popts;
  popts.mode = cfg.mode;
  popts.rag = cfg.rag;
  popts.order = cfg.exemplar_order;
  const std::uint64_t shuffle_base = Rng::derive(cfg.seed, 0x5eed).next();
  std::ostringstream diag;
  for (std::size_t i = 0; i < count; ++i) {
    const auto pos = idx.test[i];
    const auto q = project(l.full, pos, sel);
    std::vector<Exemplar> exemplars;
    if (cfg.rag) {
      retrieved[i] = retrieve(index, q, cfg.n);
      exemplars.reserve(retrieved[i].items.size());
      for (const auto& item : retrieved[i].items) {
        exemplars.push_back({index.row(item.id), item.label, item.similarity});
      }
      auto d = diagnostics_json(retrieved[i]);
      d["id"] = l.full.row_id(pos);
      diag << d.dump() << '\n';
    }
    popts.shuffle_seed = Rng::derive(shuffle_base, l.full.row_id(pos)).next();
    prompts[i] = build_prompt(exemplars, q, tpl, sel, popts);
  }
  if (cfg.rag) write_text(run_dir / "retrieval.jsonl", diag.str());
  if (cfg.export_prompts) {
    std::ostringstream out;
    for (std::size_t i = 0; i < count; ++i) out << prompt_json(l.full.row_id(idx.test[i]), prompts[i]).dump() << '\n';
    write_text(run_dir / "prompts.jsonl", out.str());
  }

  auto backend = make_backend(cfg.backend, cfg.mode, tpl);
  const auto snapshot = cfg.snapshot(l.data, tpl);
  std::vector<RunReport> reports;
  for (std::size_t run = 0; run < cfg.generation.runs; ++run) {
    const std::uint64_t gen_seed = Rng::derive(cfg.seed, run).next() >> 1;  // some servers reject seeds >= 2^63
    auto batch = run_batch(count, cfg.backend.concurrency,
                           [&](std::size_t i) { return backend->complete(prompts[i], cfg.generation, gen_seed); });
    RunReport rep;
    rep.run = run;
    rep.config = snapshot;
    for (std::size_t i = 0; i < count; ++i) {
      if (!batch.results[i]) continue;
      const auto& c = *batch.results[i];
      const auto pred = interpret(c.text, cfg.mode);
      ReportRow row;
      row.id = l.full.row_id(idx.test[i]);
      row.truth = l.full.label(idx.test[i]);
      row.prediction = pred.label;
      if (pred.score && pred.score->parse_ok) row.score = pred.score->value;
      row.flagged = pred.flagged;
      if (cfg.rag) {
        row.j_star = retrieved[i].j_star;
        row.pool_size = retrieved[i].pool_size;
        row.examples = retrieved[i].items.size();
        row.positive_fraction = retrieved[i].positive_fraction();
      }
      row.latency_ms = c.latency_ms;
      row.input_tokens = c.input_tokens;
      row.output_tokens = c.output_tokens;
      row.attempts = c.attempts;
      row.response = c.text;
      rep.rows.push_back(std::move(row));
    }
    if (batch.error) {
      write_rows(run_dir / ("rows_run" + std::to_string(run) + ".partial.jsonl"), rep.rows);
      if (!reports.empty()) {
        write_text(run_dir / "summary.partial.json", summary_json(aggregate_runs(reports)).dump(2) + "\n");
      }
      std::rethrow_exception(batch.error);
    }
    write_rows(run_dir / rows_file(run), rep.rows);
    reports.push_back(std::move(rep));
  }

  RunOutcome outcome;
  outcome.run_dir = run_dir;
  outcome.summary = aggregate_runs(reports);
  write_text(run_dir / "summary.json", summary_json(outcome.summary).dump(2) + "\n");
  write_majority(run_dir / "majority.jsonl", outcome.summary.majority);
  return outcome;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

fs::path cmd_prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto l = load_data(cfg);
  ensure_splits(cfg, l, true);
  return cfg.output_dir / kSplitsFile;
}

fs::path cmd_rank(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto l = load_data(cfg);
  const auto idx = ensure_splits(cfg, l, false);
  if (cfg.feature_strategy == "random") {
    throw ConfigError("rank applies to the importance strategy; random selection needs no ranking");
  }
  const auto ranking = ensure_ranking(cfg, l, idx, true);
  const auto sel = select_top_k(ranking.importance, l.full.schema(), cfg.k);
  std::ofstream out(cfg.output_dir / selection_file_name(cfg), std::ios::trunc);
  out << nlohmann::json(sel).dump(2) << '\n';
  return cfg.output_dir / kRankingFile;
}

fs::path cmd_index(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto l = load_data(cfg);
  const auto idx = ensure_splits(cfg, l, false);
  ensure_index(cfg, l, idx, true);
  return cfg.output_dir / index_file_name(cfg);
}

RunOutcome cmd_run(const ExperimentConfig& cfg, const std::optional<fs::path>& run_dir) {
  cfg.validate();
  const auto l = load_data(cfg);
  const auto idx = ensure_splits(cfg, l, false);
  return run_with(cfg, l, idx, run_dir.value_or(cfg.output_dir));
}

std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                                  const std::vector<std::size_t>& values) {
  if (axis != "k" && axis != "n") throw ConfigError("sweep axis must be 'k' or 'n'");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  cfg.validate();
  const auto l = load_data(cfg);
  const auto idx = ensure_splits(cfg, l, false);
  std::vector<SweepPoint> points;
  std::ostringstream table;
  csv::write_row(table, {axis, "F1", "F1_sd", "MCC", "MCC_sd", "Prec.", "Prec._sd", "Rec.", "Rec._sd", "flag_rate"});
  for (const auto v : values) {
    ExperimentConfig c = cfg;
    (axis == "k" ? c.k : c.n) = v;
    c.validate();
    const auto dir = cfg.output_dir / ("sweep_" + axis) / (axis + "_" + std::to_string(v));
    SweepPoint p{v, run_with(c, l, idx, dir)};
    const auto& s = p.outcome.summary;
    csv::write_row(table, {std::to_string(v), fixed(s.f1.mean), fixed(s.f1.sd), fixed(s.mcc.mean), fixed(s.mcc.sd),
                           fixed(s.precision.mean), fixed(s.precision.sd), fixed(s.recall.mean), fixed(s.recall.sd),
                           fixed(s.flag_rate)});
    points.push_back(std::move(p));
  }
  write_text(cfg.output_dir / ("sweep_" + axis + ".csv"), table.str());
  return points;
}

ReportTable cmd_report(const std::vector<fs::path>& run_dirs, bool allow_mismatch) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  constexpr double kTol = 1e-12;
  ReportTable table;
  std::ostringstream out;
  csv::write_row(out, {"run", "dataset", "method", "mode", "k", "n", "features", "runs", "F1", "MCC", "Prec.", "Rec.",
                       "F1_sd", "MCC_sd", "Prec._sd", "Rec._sd", "flag_rate"});
  nlohmann::json protocol;
  for (const auto& dir : run_dirs) {
    if (!fs::is_directory(dir)) throw DataError("run directory not found: " + dir.string());
    std::ifstream in(dir / "summary.json");
    if (!in) throw DataError("no summary.json in " + dir.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError((dir / "summary.json").string() + ": " + e.what());
    }
    auto summary = summary_from_json(doc);

    // Stored metrics must be reproducible from the row files.
    std::vector<RunReport> reports;
    for (std::size_t r = 0; r < summary.runs; ++r) {
      RunReport rep;
      rep.run = r;
      rep.config = summary.config;
      rep.rows = read_rows(dir / rows_file(r));
      const auto m = rep.metrics();
      const auto& stored = doc.at("per_run").at(r);
      for (const auto& [name, value] : {std::pair{"f1", m.f1}, std::pair{"mcc", m.mcc},
                                        std::pair{"precision", m.precision}, std::pair{"recall", m.recall}}) {
        if (std::abs(stored.at(name).get<double>() - value) > kTol) {
          throw DataError(dir.string() + ": run " + std::to_string(r) + " " + name + " does not match its rows");
        }
      }
      reports.push_back(std::move(rep));
    }
    const auto recomputed = aggregate_runs(reports);
    for (const auto& [name, a, b] : {std::tuple{"f1", recomputed.f1.mean, summary.f1.mean},
                                     std::tuple{"mcc", recomputed.mcc.mean, summary.mcc.mean},
                                     std::tuple{"precision", recomputed.precision.mean, summary.precision.mean},
                                     std::tuple{"recall", recomputed.recall.mean, summary.recall.mean}}) {
      if (std::abs(a - b) > kTol) throw DataError(dir.string() + ": mean " + name + " does not match its rows");
    }
    summary.majority = recomputed.majority;

    const auto& cfg = summary.config;
    const nlohmann::json proto = {{"generation", cfg.at("generation")},
                                  {"backend", cfg.at("backend")},
                                  {"exemplar_order", cfg.at("exemplar_order")},
                                  {"seed", cfg.at("seed")}};
    if (protocol.is_null()) {
      protocol = proto;
    } else if (proto != protocol && !allow_mismatch) {
      throw ConfigError("config snapshot of " + dir.string() +
                        " differs from the first run (generation, backend, exemplar order or seed); "
                        "pass --allow-mismatch to merge anyway");
    }
    const bool rag = cfg.at("rag").get<bool>();
    csv::write_row(out, {dir.filename().string(), cfg.at("dataset").get<std::string>(), rag ? "rag" : "direct",
                         cfg.at("mode").get<std::string>(), std::to_string(cfg.at("k").get<std::size_t>()),
                         std::to_string(cfg.at("n").get<std::size_t>()), cfg.at("feature_strategy").get<std::string>(),
                         std::to_string(summary.runs), fixed(summary.f1.mean), fixed(summary.mcc.mean),
                         fixed(summary.precision.mean), fixed(summary.recall.mean), fixed(summary.f1.sd),
                         fixed(summary.mcc.sd), fixed(summary.precision.sd), fixed(summary.recall.sd),
                         fixed(summary.flag_rate)});
    table.lines.push_back({dir, std::move(summary)});
  }
  table.csv = out.str();
  return table;
}

}  // namespace finfre
