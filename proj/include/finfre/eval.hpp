#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace finfre {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Positive class = fraud (1).
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths);

// A metric whose denominator is zero is 0 with its flag set.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
  bool mcc_degenerate = false;

  bool any_degenerate() const { return precision_degenerate || recall_degenerate || f1_degenerate || mcc_degenerate; }
};

Metrics metrics(const ConfusionMatrix& cm);

// One evaluated test transaction within one run.
struct ReportRow {
  std::uint64_t id = 0;
  int truth = 0;
  int prediction = 0;
  std::optional<int> score;
  bool flagged = false;
  std::size_t j_star = 0;
  std::size_t pool_size = 0;
  std::size_t examples = 0;
  double positive_fraction = 0.0;
  double latency_ms = 0.0;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  int attempts = 0;
  std::string response;

  bool operator==(const ReportRow&) const = default;
};

void to_json(nlohmann::json& j, const ReportRow& r);
void from_json(const nlohmann::json& j, ReportRow& r);

struct RunReport {
  std::size_t run = 0;
  nlohmann::json config;  // snapshot shared by all runs of one experiment
  std::vector<ReportRow> rows;

  ConfusionMatrix confusion() const;
  Metrics metrics() const;
  std::size_t flagged() const;
};

void write_rows(const std::filesystem::path& path, std::span<const ReportRow> rows);
std::vector<ReportRow> read_rows(const std::filesystem::path& path);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single run
};

struct MajorityRow {
  std::uint64_t id = 0;
  int truth = 0;
  int label = 0;  // fraud iff more than half of the runs said fraud
  std::size_t fraud_votes = 0;
};

struct Summary {
  nlohmann::json config;
  std::size_t runs = 0;
  std::size_t evaluated = 0;
  MetricSummary precision, recall, f1, mcc;
  std::vector<ConfusionMatrix> run_confusion;
  std::vector<Metrics> run_metrics;
  std::vector<std::size_t> run_flagged;
  double flag_rate = 0.0;  // flagged rows / (rows x runs)
  std::vector<MajorityRow> majority;
};

// Throws ConfigError when config snapshots differ and DataError when the runs
// did not evaluate the same transactions in the same order.
Summary aggregate_runs(std::span<const RunReport> reports);

MetricSummary mean_sd(std::span<const double> values);

// Summary without the majority rows, which go to their own file.
nlohmann::json summary_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);
void write_majority(const std::filesystem::path& path, std::span<const MajorityRow> rows);

}  // namespace finfre
