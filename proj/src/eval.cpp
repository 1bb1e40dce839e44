#include "finfre/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "finfre/error.hpp"

namespace finfre {

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths) {
  if (preds.size() != truths.size()) throw DataError("confusion: predictions and truths differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1;
    const bool t = truths[i] == 1;
    if (p && t) ++cm.tp;
    else if (p) ++cm.fp;
    else if (t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const auto tn = static_cast<double>(cm.tn);
  Metrics m;
  if (cm.tp + cm.fp == 0) m.precision_degenerate = true;
  else m.precision = tp / (tp + fp);
  if (cm.tp + cm.fn == 0) m.recall_degenerate = true;
  else m.recall = tp / (tp + fn);
  if (m.precision + m.recall == 0.0) m.f1_degenerate = true;
  else m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) m.mcc_degenerate = true;
  else m.mcc = std::clamp((tp * tn - fp * fn) / std::sqrt(denom), -1.0, 1.0);
  return m;
}

void to_json(nlohmann::json& j, const ReportRow& r) {
  j = {{"id", r.id},
       {"truth", r.truth},
       {"prediction", r.prediction},
       {"score", r.score ? nlohmann::json(*r.score) : nlohmann::json(nullptr)},
       {"flagged", r.flagged},
       {"j_star", r.j_star},
       {"pool_size", r.pool_size},
       {"examples", r.examples},
       {"positive_fraction", r.positive_fraction},
       {"latency_ms", r.latency_ms},
       {"input_tokens", r.input_tokens},
       {"output_tokens", r.output_tokens},
       {"attempts", r.attempts},
       {"response", r.response}};
}

void from_json(const nlohmann::json& j, ReportRow& r) {
  r.id = j.at("id").get<std::uint64_t>();
  r.truth = j.at("truth").get<int>();
  r.prediction = j.at("prediction").get<int>();
  r.score = j.at("score").is_null() ? std::nullopt : std::optional<int>(j.at("score").get<int>());
  r.flagged = j.at("flagged").get<bool>();
  r.j_star = j.at("j_star").get<std::size_t>();
  r.pool_size = j.at("pool_size").get<std::size_t>();
  r.examples = j.at("examples").get<std::size_t>();
  r.positive_fraction = j.at("positive_fraction").get<double>();
  r.latency_ms = j.at("latency_ms").get<double>();
  r.input_tokens = j.at("input_tokens").get<std::size_t>();
  r.output_tokens = j.at("output_tokens").get<std::size_t>();
  r.attempts = j.at("attempts").get<int>();
  r.response = j.at("response").get<std::string>();
}

ConfusionMatrix RunReport::confusion() const {
  std::vector<int> p, t;
  p.reserve(rows.size());
  t.reserve(rows.size());
  for (const auto& r : rows) {
    p.push_back(r.prediction);
    t.push_back(r.truth);
  }
  return finfre::confusion(p, t);
}

Metrics RunReport::metrics() const { return finfre::metrics(confusion()); }

std::size_t RunReport::flagged() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.flagged ? 1 : 0;
  return n;
}

void write_rows(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : rows) {
    // Fixed key order keeps the files byte-comparable.
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["truth"] = r.truth;
    j["prediction"] = r.prediction;
    j["score"] = r.score ? nlohmann::ordered_json(*r.score) : nlohmann::ordered_json(nullptr);
    j["flagged"] = r.flagged;
    j["j_star"] = r.j_star;
    j["pool_size"] = r.pool_size;
    j["examples"] = r.examples;
    j["positive_fraction"] = r.positive_fraction;
    j["latency_ms"] = r.latency_ms;
    j["input_tokens"] = r.input_tokens;
    j["output_tokens"] = r.output_tokens;
    j["attempts"] = r.attempts;
    j["response"] = r.response;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ReportRow> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ReportRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line).get<ReportRow>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

MetricSummary mean_sd(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

Summary aggregate_runs(std::span<const RunReport> reports) {
  if (reports.empty()) throw DataError("aggregate_runs: no reports");
  Summary s;
  s.config = reports.front().config;
  s.runs = reports.size();
  s.evaluated = reports.front().rows.size();
  std::vector<double> p, r, f, m;
  std::size_t flagged = 0;
  for (const auto& rep : reports) {
    if (rep.config != s.config) throw ConfigError("aggregate_runs: config snapshots differ between runs");
    if (rep.rows.size() != s.evaluated) throw DataError("aggregate_runs: runs evaluated different row counts");
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      if (rep.rows[i].id != reports.front().rows[i].id) {
        throw DataError("aggregate_runs: runs evaluated different transactions");
      }
    }
    const auto cm = rep.confusion();
    const auto mt = finfre::metrics(cm);
    s.run_confusion.push_back(cm);
    s.run_metrics.push_back(mt);
    s.run_flagged.push_back(rep.flagged());
    flagged += rep.flagged();
    p.push_back(mt.precision);
    r.push_back(mt.recall);
    f.push_back(mt.f1);
    m.push_back(mt.mcc);
  }
  s.precision = mean_sd(p);
  s.recall = mean_sd(r);
  s.f1 = mean_sd(f);
  s.mcc = mean_sd(m);
  const std::size_t cells = s.evaluated * s.runs;
  s.flag_rate = cells == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(cells);
  s.majority.reserve(s.evaluated);
  for (std::size_t i = 0; i < s.evaluated; ++i) {
    MajorityRow row;
    row.id = reports.front().rows[i].id;
    row.truth = reports.front().rows[i].truth;
    for (const auto& rep : reports) row.fraud_votes += rep.rows[i].prediction == 1 ? 1 : 0;
    row.label = 2 * row.fraud_votes > s.runs ? 1 : 0;
    s.majority.push_back(row);
  }
  return s;
}

namespace {

nlohmann::ordered_json stat_json(const MetricSummary& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

MetricSummary stat_from(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("sd").get<double>()}; }

}  // namespace

nlohmann::json summary_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["config"] = s.config;
  j["runs"] = s.runs;
  j["evaluated"] = s.evaluated;
  j["metrics"] = {{"f1", stat_json(s.f1)},
                  {"mcc", stat_json(s.mcc)},
                  {"precision", stat_json(s.precision)},
                  {"recall", stat_json(s.recall)}};
  j["flag_rate"] = s.flag_rate;
  auto per_run = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.runs; ++i) {
    const auto& cm = s.run_confusion[i];
    const auto& mt = s.run_metrics[i];
    per_run.push_back({{"run", i},
                       {"tp", cm.tp},
                       {"fp", cm.fp},
                       {"fn", cm.fn},
                       {"tn", cm.tn},
                       {"f1", mt.f1},
                       {"mcc", mt.mcc},
                       {"precision", mt.precision},
                       {"recall", mt.recall},
                       {"degenerate", mt.any_degenerate()},
                       {"flagged", s.run_flagged[i]}});
  }
  j["per_run"] = per_run;
  return nlohmann::json::parse(j.dump());
}

Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  try {
    s.config = j.at("config");
    s.runs = j.at("runs").get<std::size_t>();
    s.evaluated = j.at("evaluated").get<std::size_t>();
    const auto& m = j.at("metrics");
    s.f1 = stat_from(m.at("f1"));
    s.mcc = stat_from(m.at("mcc"));
    s.precision = stat_from(m.at("precision"));
    s.recall = stat_from(m.at("recall"));
    s.flag_rate = j.at("flag_rate").get<double>();
    for (const auto& r : j.at("per_run")) {
      s.run_confusion.push_back({r.at("tp").get<std::size_t>(), r.at("fp").get<std::size_t>(),
                                 r.at("fn").get<std::size_t>(), r.at("tn").get<std::size_t>()});
      s.run_metrics.push_back(metrics(s.run_confusion.back()));
      s.run_flagged.push_back(r.at("flagged").get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed summary: ") + e.what());
  }
  return s;
}

void write_majority(const std::filesystem::path& path, std::span<const MajorityRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["truth"] = r.truth;
    j["label"] = r.label;
    j["fraud_votes"] = r.fraud_votes;
    out << j.dump() << '\n';
  }
}

}  // namespace finfre
