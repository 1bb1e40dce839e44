#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finfre/dataset.hpp"
#include "finfre/eval.hpp"
#include "finfre/features.hpp"
#include "finfre/forest.hpp"
#include "finfre/llm.hpp"
#include "finfre/prompt.hpp"
#include "finfre/retrieval.hpp"

namespace finfre {

struct ExperimentConfig {
  std::filesystem::path dataset;     // dataset config file
  std::filesystem::path output_dir;  // shared artifacts and default run dir
  std::size_t k = 10;
  std::size_t n = 20;
  std::string feature_strategy = "importance";  // or "random"
  std::uint64_t feature_seed = 0;               // random strategy only
  PromptMode mode = PromptMode::Scoring;
  bool rag = true;                              // false = direct-prompt baseline
  ExemplarOrder exemplar_order = ExemplarOrder::Descending;
  std::string template_ref;                     // overrides the dataset config's template
  BackendConfig backend;
  GenerationParams generation;
  ForestConfig forest;
  std::uint64_t seed = 42;                      // generation seeds and exemplar shuffles
  bool export_prompts = false;

  void validate() const;
  // Everything that determines results, without filesystem locations.
  nlohmann::json snapshot(const DatasetConfig& data, const TemplateSpec& tpl) const;
};

// Relative paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct Overrides {
  std::optional<std::size_t> k;
  std::optional<std::size_t> n;
  std::optional<std::string> mode;
  bool no_rag = false;
  std::optional<std::string> backend;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

// Artifact names inside output_dir.
inline constexpr std::string_view kSplitsFile = "splits.json";
inline constexpr std::string_view kRankingFile = "ranking.json";
std::string index_file_name(const ExperimentConfig& cfg);
std::string selection_file_name(const ExperimentConfig& cfg);

// Splits as row ids, so they survive re-reading the CSV.
void save_splits(const std::filesystem::path& path, const Dataset& ds, const SplitIndices& idx);
SplitIndices load_splits(const std::filesystem::path& path, const Dataset& ds);

// Each stage writes its artifacts and returns their path. Missing upstream
// artifacts are built on demand; stale ones (different inputs) are rebuilt.
std::filesystem::path cmd_prepare(const ExperimentConfig& cfg);
std::filesystem::path cmd_rank(const ExperimentConfig& cfg);
std::filesystem::path cmd_index(const ExperimentConfig& cfg);

struct RunOutcome {
  std::filesystem::path run_dir;
  Summary summary;
};

// Retrieval, prompting, completion, parsing and thresholding for every test
// row, repeated generation.runs times. Outputs go to run_dir (default
// output_dir): rows_run{r}.jsonl, summary.json, majority.jsonl,
// retrieval.jsonl and, if enabled, prompts.jsonl. On a backend failure the
// finished rows are flushed to rows_run{r}.partial.jsonl before rethrowing.
RunOutcome cmd_run(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& run_dir = {});

struct SweepPoint {
  std::size_t value = 0;
  RunOutcome outcome;
};

// One cmd_run per value with shared splits, ranking and seed. Writes
// sweep_{axis}.csv in output_dir.
std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                                  const std::vector<std::size_t>& values);

struct ReportLine {
  std::filesystem::path run_dir;
  Summary summary;
};

struct ReportTable {
  std::vector<ReportLine> lines;
  std::string csv;
};

// Loads each run dir's summary, re-derives every run's metrics from its row
// files (must agree within 1e-12), and merges them into one table. Snapshots
// must agree on generation, backend and exemplar order unless allow_mismatch.
ReportTable cmd_report(const std::vector<std::filesystem::path>& run_dirs, bool allow_mismatch);

}  // namespace finfre
