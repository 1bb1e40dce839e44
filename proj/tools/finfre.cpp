// Command-line front end: prepare | rank | index | run | sweep | report.
// Exit codes: 0 success, 2 config error, 3 backend failure, 4 data error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "finfre/error.hpp"
#include "finfre/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitData = 4;

void print_summary(const finfre::RunOutcome& o) {
  const auto& s = o.summary;
  std::printf("%s: runs=%zu evaluated=%zu F1=%.4f (sd %.4f) MCC=%.4f (sd %.4f) Prec=%.4f Rec=%.4f flag_rate=%.4f\n",
              o.run_dir.string().c_str(), s.runs, s.evaluated, s.f1.mean, s.f1.sd, s.mcc.mean, s.mcc.sd,
              s.precision.mean, s.recall.mean, s.flag_rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented fraud scoring over tabular transactions"};
  app.require_subcommand(1);

  std::string config_path;
  finfre::Overrides ov;
  std::string mode, backend;
  std::size_t k = 0, n = 0, runs = 0;
  std::uint64_t seed = 0;
  std::string out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--k", k, "Number of retained features")->check(CLI::PositiveNumber);
    sub->add_option("--n", n, "Number of retrieved exemplars")->check(CLI::PositiveNumber);
    sub->add_option("--mode", mode, "Output mode")->check(CLI::IsMember({"scoring", "binary"}));
    sub->add_flag("--no-rag", ov.no_rag, "Direct-prompt baseline without exemplars");
    sub->add_option("--backend", backend, "Chat backend")->check(CLI::IsMember({"mock", "http"}));
    sub->add_option("--seed", seed, "Experiment seed (generation and exemplar shuffles)");
    sub->add_option("--runs", runs, "Repeated generation runs")->check(CLI::PositiveNumber);
    sub->add_option("-o,--output-dir", out_dir, "Override output_dir");
  };

  auto* prepare = app.add_subcommand("prepare", "Stratified test/validation/pool split");
  auto* rank = app.add_subcommand("rank", "Random-forest feature importance ranking");
  auto* index = app.add_subcommand("index", "Build the retrieval index for the selected features");
  auto* run = app.add_subcommand("run", "Score every test transaction");
  auto* sweep = app.add_subcommand("sweep", "Repeat run over values of k or n");
  for (auto* sub : {prepare, rank, index, run, sweep}) add_common(sub);

  std::string run_dir;
  run->add_option("--run-dir", run_dir, "Directory for run outputs (default: output_dir)");
  bool export_prompts = false;
  for (auto* sub : {run, sweep}) sub->add_flag("--export-prompts", export_prompts, "Write prompts.jsonl");

  std::string axis;
  std::vector<std::size_t> values;
  sweep->add_option("--axis", axis, "Sweep axis")->required()->check(CLI::IsMember({"k", "n"}));
  sweep->add_option("--values", values, "Axis values")->required()->delimiter(',');

  auto* report = app.add_subcommand("report", "Merge run summaries into one metric table");
  std::vector<std::string> dirs;
  bool allow_mismatch = false;
  std::string report_out;
  report->add_option("dirs", dirs, "Run directories")->required();
  report->add_flag("--allow-mismatch", allow_mismatch, "Merge runs whose protocol settings differ");
  report->add_option("--out", report_out, "Also write the table to this CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      const auto table = finfre::cmd_report(paths, allow_mismatch);
      std::cout << table.csv;
      if (!report_out.empty()) {
        std::ofstream out(report_out, std::ios::binary | std::ios::trunc);
        if (!out) throw finfre::DataError("cannot write " + report_out);
        out << table.csv;
      }
      return 0;
    }

    auto cfg = finfre::load_experiment_config(config_path);
    if (k) ov.k = k;
    if (n) ov.n = n;
    if (!mode.empty()) ov.mode = mode;
    if (!backend.empty()) ov.backend = backend;
    if (runs) ov.runs = runs;
    if (!out_dir.empty()) ov.output_dir = out_dir;
    for (auto* sub : {prepare, rank, index, run, sweep}) {
      if (sub->parsed() && sub->count("--seed") > 0) ov.seed = seed;
    }
    finfre::apply_overrides(cfg, ov);
    if (export_prompts) cfg.export_prompts = true;
    cfg.backend.apply_env();

    if (prepare->parsed()) {
      std::cout << finfre::cmd_prepare(cfg).string() << '\n';
    } else if (rank->parsed()) {
      std::cout << finfre::cmd_rank(cfg).string() << '\n';
    } else if (index->parsed()) {
      std::cout << finfre::cmd_index(cfg).string() << '\n';
    } else if (run->parsed()) {
      print_summary(finfre::cmd_run(cfg, run_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(run_dir)));
    } else if (sweep->parsed()) {
      for (const auto& p : finfre::cmd_sweep(cfg, axis, values)) print_summary(p.outcome);
      std::cout << (cfg.output_dir / ("sweep_" + axis + ".csv")).string() << '\n';
    }
  } catch (const finfre::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const finfre::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const finfre::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
