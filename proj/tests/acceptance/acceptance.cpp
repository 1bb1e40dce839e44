// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "finfre/dataset.hpp"
#include "finfre/eval.hpp"
#include "finfre/features.hpp"
#include "finfre/forest.hpp"
#include "finfre/normalize.hpp"
#include "finfre/pipeline.hpp"
#include "finfre/prompt.hpp"
#include "finfre/retrieval.hpp"
#include "finfre/scoring.hpp"
#include "support.hpp"

using namespace finfre;
namespace ft = finfre::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  enum Kind { Pass, Fail, Skip } kind = Pass;
  std::string detail;
};

Verdict pass(std::string d) { return {Verdict::Pass, std::move(d)}; }
Verdict fail(std::string d) { return {Verdict::Fail, std::move(d)}; }
Verdict skip(std::string d) { return {Verdict::Skip, std::move(d)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Selection over every feature of `ds` in a random order.
SelectedFeatures shuffled_selection(const Dataset& ds, Rng& rng) {
  auto cols = ds.schema().feature_indices();
  rng.shuffle(std::span<std::size_t>(cols));
  SelectedFeatures sel;
  for (auto c : cols) {
    const auto& col = ds.schema()[c];
    sel.ordered.push_back({col.name, 0.0, col.kind});
    (col.kind == ColumnKind::Categorical ? sel.categorical : sel.numeric).push_back(sel.ordered.back());
  }
  sel.k = sel.ordered.size();
  return sel;
}

// Random pool with at least one present cell per numeric column.
ft::Table pool_table(Rng& rng, std::size_t rows, std::size_t n_num, std::size_t n_cat, int range, int card) {
  const double missing = 0.3 * rng.uniform();
  auto t = ft::random_pool(rng, rows, n_num, n_cat, missing, range, card);
  for (std::size_t i = 0; i < n_num + n_cat; ++i) {
    if (t.rows[0][i].empty()) t.rows[0][i] = i < n_num ? "1" : "v0";
  }
  return t;
}

// Query from the pool or fresh, with unseen categories and missing cells.
FeatureRow random_query(Rng& rng, const Dataset& ds, const SelectedFeatures& sel, int range, int card) {
  if (rng.uniform() < 0.5) return project(ds, rng.below(ds.size()), sel);
  FeatureRow q;
  for (std::size_t i = 0; i < sel.numeric.size(); ++i) {
    if (rng.uniform() < 0.15) q.numeric.emplace_back();
    else q.numeric.emplace_back(static_cast<double>(static_cast<int>(rng.below(2 * range + 1)) - range));
  }
  for (std::size_t i = 0; i < sel.categorical.size(); ++i) {
    const double u = rng.uniform();
    if (u < 0.15) q.categorical.emplace_back();
    else if (u < 0.25) q.categorical.emplace_back("unseen");
    else q.categorical.emplace_back("v" + std::to_string(rng.below(static_cast<std::uint64_t>(card))));
  }
  return q;
}

Verdict retrieval_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240601);
  std::size_t queries = 0, mismatches = 0;
  for (int pool = 0; pool < 200; ++pool) {
    const std::size_t rows = 20 + rng.below(10000 - 20 + 1);
    const std::size_t d = 1 + rng.below(10);
    const std::size_t n_cat = rng.below(d + 1);
    const int range = std::array{1, 2, 3, 50}[rng.below(4)];
    const int card = 1 + static_cast<int>(rng.below(5));
    const auto ds = ft::to_dataset(pool_table(rng, rows, d - n_cat, n_cat, range, card));
    const auto sel = shuffled_selection(ds, rng);
    const auto idx = build_index(ds, sel, fit_stats(ds, sel));
    for (int qi = 0; qi < 20; ++qi, ++queries) {
      const auto q = random_query(rng, ds, sel, range, card);
      const std::size_t n = 1 + rng.below(30);
      const auto got = retrieve(idx, q, n);
      const auto want = ft::brute_force_retrieve(ds, sel, idx.stats(), q, n);
      const auto chain = ft::brute_force_chain(ds, sel, q);
      bool same = got.items.size() == want.size() && got.j_star == chain.j_star &&
                  got.pool_size == chain.levels[chain.j_star].size();
      for (std::size_t i = 0; same && i < want.size(); ++i) {
        same = got.items[i].id == want[i].id && got.items[i].similarity == want[i].similarity &&
               got.items[i].label == want[i].label;
      }
      if (!same) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  const auto detail = fmt("%zu/%zu queries over 200 pools match the oracle, %.1fs", queries - mismatches, queries, secs);
  return mismatches == 0 && secs < 60.0 ? pass(detail) : fail(detail);
}

Verdict backoff_correctness() {
  Rng rng(77);
  std::size_t checked = 0, bad = 0;
  std::set<std::size_t> depths;
  while (checked < 1000) {
    const std::size_t n_cat = 1 + rng.below(4);
    const int card = 2 + static_cast<int>(rng.below(6));
    const auto ds = ft::to_dataset(pool_table(rng, 50 + rng.below(2000), 2, n_cat, 3, card));
    const auto sel = shuffled_selection(ds, rng);
    const auto idx = build_index(ds, sel, fit_stats(ds, sel));
    for (int qi = 0; qi < 25 && checked < 1000; ++qi, ++checked) {
      const auto q = random_query(rng, ds, sel, 3, card);
      const auto c = categorical_filter(idx, q);
      std::vector<std::uint32_t> ids = c.ids;
      if (c.all) {
        ids.resize(idx.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::uint32_t>(i);
      }
      const auto chain = ft::brute_force_chain(ds, sel, q);
      bool ok = !ids.empty() && c.j_star <= sel.categorical.size();
      // Nested chain: C^(j*) is inside every earlier level and equals its own.
      for (std::size_t j = 0; ok && j <= c.j_star; ++j) {
        const std::set<std::uint32_t> level(chain.levels[j].begin(), chain.levels[j].end());
        for (auto id : ids) ok = ok && level.count(id) == 1;
      }
      ok = ok && ids == chain.levels[c.j_star];
      // Maximality: constraint j*+1 empties the candidates.
      if (ok && c.j_star < sel.categorical.size()) {
        const auto code = idx.encode(c.j_star, q.categorical[c.j_star]);
        for (auto id : ids) ok = ok && idx.code(c.j_star, id) != code;
      }
      depths.insert(c.j_star);
      if (!ok) ++bad;
    }
  }
  const auto detail = fmt("%zu/%zu queries satisfy nesting, nonemptiness and maximality (%zu distinct depths)",
                          checked - bad, checked, depths.size());
  return bad == 0 ? pass(detail) : fail(detail);
}

Verdict standardization_oracle() {
  Rng rng(31337);
  double worst_z = 0.0, worst_mean = 0.0, worst_var = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 200 + rng.below(3000);
    const std::size_t f = 1 + rng.below(8);
    const bool with_missing = trial % 5 == 0;
    DatasetBuilder b{[&] {
      std::vector<Column> cols;
      for (std::size_t i = 0; i < f; ++i) cols.push_back({"x" + std::to_string(i), ColumnKind::Numeric});
      cols.push_back({"y", ColumnKind::Label});
      return Schema(cols);
    }()};
    std::vector<double> offset(f), scale(f);
    for (std::size_t i = 0; i < f; ++i) {
      offset[i] = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(5)));
      scale[i] = std::pow(10.0, static_cast<double>(rng.below(7)) - 3.0);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::string> cells;
      for (std::size_t i = 0; i < f; ++i) {
        if (with_missing && r > 0 && rng.uniform() < 0.2) cells.emplace_back();
        else cells.push_back(ft::num(offset[i] + scale[i] * rng.normal()));
      }
      cells.push_back(r % 7 == 0 ? "1" : "0");
      b.add_row(cells);
    }
    const auto ds = std::move(b).build();
    SelectedFeatures sel;
    for (std::size_t i = 0; i < f; ++i) {
      sel.ordered.push_back({"x" + std::to_string(i), 0.0, ColumnKind::Numeric});
      sel.numeric.push_back(sel.ordered.back());
    }
    const auto stats = fit_stats(ds, sel);
    // Independent statistics in long double.
    std::vector<long double> mu(f, 0.0L), sd(f, 0.0L);
    for (std::size_t i = 0; i < f; ++i) {
      long double s = 0.0L;
      std::size_t n = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        if (!ds.is_missing(r, i)) {
          s += ds.number(r, i);
          ++n;
        }
      }
      mu[i] = s / static_cast<long double>(n);
      long double ss = 0.0L;
      for (std::size_t r = 0; r < rows; ++r) {
        if (!ds.is_missing(r, i)) ss += (ds.number(r, i) - mu[i]) * (ds.number(r, i) - mu[i]);
      }
      sd[i] = std::sqrt(ss / static_cast<long double>(n));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const auto z = z_transform(project(ds, r, sel), stats);
      for (std::size_t i = 0; i < f; ++i) {
        const long double want = ds.is_missing(r, i) ? 0.0L : (ds.number(r, i) - mu[i]) / sd[i];
        worst_z = std::max(worst_z, static_cast<double>(std::fabs(z[i] - want)));
      }
    }
    if (!with_missing) {
      const auto m = vectorize_pool(ds, sel, stats);
      for (std::size_t i = 0; i < f; ++i) {
        long double s = 0.0L, ss = 0.0L;
        for (std::size_t r = 0; r < rows; ++r) s += m.row(r)[i];
        const long double mean = s / static_cast<long double>(rows);
        for (std::size_t r = 0; r < rows; ++r) ss += (m.row(r)[i] - mean) * (m.row(r)[i] - mean);
        worst_mean = std::max(worst_mean, static_cast<double>(std::fabs(mean)));
        worst_var = std::max(worst_var, static_cast<double>(std::fabs(ss / static_cast<long double>(rows) - 1.0L)));
      }
    }
  }
  const auto detail =
      fmt("max |z - oracle| %.2e, max |column mean| %.2e, max |variance - 1| %.2e", worst_z, worst_mean, worst_var);
  return worst_z <= 1e-9 && worst_mean <= 1e-9 && worst_var <= 1e-6 ? pass(detail) : fail(detail);
}

Verdict metric_oracle() {
  Rng rng(4242);
  std::size_t checked = 0, bad = 0, degenerate = 0;
  auto check = [&](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    const auto m = metrics({tp, fp, fn, tn});
    const auto o = ft::oracle_metrics(static_cast<long>(tp), static_cast<long>(fp), static_cast<long>(fn),
                                      static_cast<long>(tn));
    bool ok = std::abs(m.precision - o.precision) <= 1e-12 && std::abs(m.recall - o.recall) <= 1e-12 &&
              std::abs(m.f1 - o.f1) <= 1e-12 && std::abs(m.mcc - o.mcc) <= 1e-12;
    ok = ok && m.precision_degenerate == (tp + fp == 0) && m.recall_degenerate == (tp + fn == 0);
    ok = ok && m.mcc_degenerate == ((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn) == 0);
    degenerate += m.any_degenerate() ? 1 : 0;
    ++checked;
    if (!ok) ++bad;
  };
  for (int i = 0; i < 10000; ++i) check(rng.below(21), rng.below(21), rng.below(21), rng.below(21));
  // Every pattern of zero entries, nonzero entries drawn from 1..20.
  for (int mask = 0; mask < 16; ++mask) {
    for (int rep = 0; rep < 25; ++rep) {
      std::array<std::size_t, 4> v{};
      for (int b = 0; b < 4; ++b) v[b] = (mask >> b) & 1 ? 1 + rng.below(20) : 0;
      check(v[0], v[1], v[2], v[3]);
    }
  }
  const auto detail = fmt("%zu/%zu matrices within 1e-12 (%zu degenerate cases)", checked - bad, checked, degenerate);
  return bad == 0 ? pass(detail) : fail(detail);
}

struct KnnCheck {
  std::size_t agree = 0;
  std::size_t total = 0;
  double mcc = 0.0;
  double seconds = 0.0;
};

// Pipeline with the mock backend versus a standalone neighbour-majority
// classifier over the same pool, selection and n.
KnnCheck knn_check(const ft::Table& table, std::size_t test, std::size_t val, std::size_t k, std::size_t n,
                   const std::string& strategy) {
  ft::TempDir dir;
  ExperimentConfig cfg;
  cfg.dataset = ft::write_dataset_config(dir.path(), "knn", table, test, val, 5);
  cfg.output_dir = dir / "out";
  cfg.k = k;
  cfg.n = n;
  cfg.feature_strategy = strategy;
  cfg.feature_seed = 9;
  const auto t0 = std::chrono::steady_clock::now();
  const auto outcome = cmd_run(cfg);
  KnnCheck r;
  r.seconds = seconds_since(t0);
  r.mcc = outcome.summary.mcc.mean;

  const auto full = ft::to_dataset(table);
  const auto splits = load_splits(cfg.output_dir / kSplitsFile, full);
  const auto sel = nlohmann::json::parse(bytes(cfg.output_dir / selection_file_name(cfg))).get<SelectedFeatures>();
  const auto pool = full.subset(splits.external);
  NormStats stats;
  for (const auto& f : sel.numeric) {
    const auto c = pool.schema().index_of(f.name);
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!pool.is_missing(i, c)) {
        s += pool.number(i, c);
        ++cnt;
      }
    }
    const double mu = s / static_cast<double>(cnt);
    double ss = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!pool.is_missing(i, c)) ss += (pool.number(i, c) - mu) * (pool.number(i, c) - mu);
    }
    stats.features.push_back({f.name, mu, std::sqrt(ss / static_cast<double>(cnt))});
  }
  for (std::size_t run = 0; run < cfg.generation.runs; ++run) {
    const auto rows = read_rows(cfg.output_dir / ("rows_run" + std::to_string(run) + ".jsonl"));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto neighbours = ft::brute_force_retrieve(pool, sel, stats, project(full, splits.test[i], sel), n);
      std::size_t pos = 0;
      for (const auto& it : neighbours) pos += static_cast<std::size_t>(it.label);
      const int vote = 2 * pos > neighbours.size() ? 1 : 0;
      r.agree += rows[i].prediction == vote && rows[i].id == full.row_id(splits.test[i]) ? 1 : 0;
      ++r.total;
    }
  }
  return r;
}

Verdict knn_majority_equivalence() {
  Rng rng(555);
  const auto clusters = knn_check(ft::two_clusters(rng, 5000, 0.05), 500, 100, 5, 20, "importance");
  std::size_t agree = clusters.agree, total = clusters.total;
  // Tie-heavy data with categorical backoff and missing cells; random labels.
  const auto noisy = knn_check(pool_table(rng, 1500, 3, 3, 2, 3), 200, 50, 6, 20, "importance");
  const auto sparse = knn_check(pool_table(rng, 1200, 5, 2, 50, 4), 150, 30, 4, 7, "random");
  agree += noisy.agree + sparse.agree;
  total += noisy.total + sparse.total;
  const auto detail = fmt("%zu/%zu predictions equal the neighbour-majority classifier; clusters MCC %.4f in %.1fs",
                          agree, total, clusters.mcc, clusters.seconds);
  return agree == total && clusters.mcc >= 0.9 && clusters.seconds < 30.0 ? pass(detail) : fail(detail);
}

Verdict importance_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  int first = 0;
  for (int run = 0; run < 100; ++run) {
    Rng rng(1000 + static_cast<std::uint64_t>(run));
    const std::size_t det = static_cast<std::size_t>(run % 8);
    const auto ds = ft::to_dataset(ft::single_determinant(rng, 1000, 8, det));
    ForestConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(run);
    const auto imp = importance_scores(train_forest(ds, cfg));
    const auto best = std::max_element(imp.scores.begin(), imp.scores.end()) - imp.scores.begin();
    first += static_cast<std::size_t>(best) == det ? 1 : 0;
  }
  std::vector<Column> cols;
  FeatureImportance imp;
  for (int i = 0; i < 30; ++i) {
    cols.push_back({"V" + std::to_string(i), ColumnKind::Numeric});
    imp.names.push_back(cols.back().name);
    imp.scores.push_back(1.0 / (1 + i));
  }
  cols.push_back({"Class", ColumnKind::Label});
  const auto sel = select_top_k(imp, Schema(cols), ExperimentConfig{}.k);
  const bool k_ok = ExperimentConfig{}.k == 10 && sel.ordered.size() == 10 && sel.ordered.front().name == "V0" &&
                    sel.ordered.back().name == "V9";
  const auto detail = fmt("determining feature ranked first in %d/100 runs (%.1fs); default k=%zu selects %zu", first,
                          seconds_since(t0), ExperimentConfig{}.k, sel.ordered.size());
  return first >= 95 && k_ok ? pass(detail) : fail(detail);
}

Verdict prompt_goldens() {
  std::size_t matched = 0, total = 0;
  bool has_system = false, has_header = false, has_pos = false, has_neg = false, has_missing = false;
  for (const auto& [name, text] : ft::golden_prompts()) {
    ++total;
    const auto want = bytes(ft::golden_dir() / name);
    if (text == want) ++matched;
    has_system |= want.rfind("You are a helpful financial expert that can help analyze fraud.", 0) == 0;
    has_header |= want.find("You are given several similar historical cases with their ground truth labels.") !=
                  std::string::npos;
    has_pos |= want.find(" It is a fraud.\n") != std::string::npos;
    has_neg |= want.find(" It is not a fraud.\n") != std::string::npos;
    has_missing |= want.find(" is missing,") != std::string::npos || want.find(": missing,") != std::string::npos;
  }
  const bool content = has_system && has_header && has_pos && has_neg && has_missing;
  const auto detail = fmt("%zu/%zu goldens byte-identical; required phrases %s", matched, total,
                          content ? "present" : "absent");
  return matched == total && total > 0 && content ? pass(detail) : fail(detail);
}

Verdict threshold_and_parsing() {
  const auto cases = nlohmann::json::parse(bytes(fs::path(FINFRE_SOURCE_DIR) / "tests" / "acceptance" / "parse_cases.json"));
  std::size_t right = 0;
  std::map<std::string, std::size_t> per_class;
  for (const auto& c : cases) {
    const auto s = parse_score(c.at("text").get<std::string>());
    const auto& want = c.at("expected");
    const bool ok = want.is_null() ? !s.parse_ok : (s.parse_ok && s.value == want.get<int>());
    right += ok ? 1 : 0;
    ++per_class[c.at("class").get<std::string>()];
  }
  auto at = [](int v) {
    RiskScore s;
    s.value = v;
    s.parse_ok = true;
    return apply_threshold(s).label;
  };
  const bool threshold = at(4) == 1 && at(3) == 0 && at(5) == 1 && at(1) == 0 &&
                         apply_threshold(parse_score("Score: 4")).label == 1 &&
                         apply_threshold(parse_score("Score: 3")).label == 0;
  const auto detail = fmt("%zu/%zu fixture cases (plain %zu, markdown %zu, multiple %zu); Score 4 => fraud, Score 3 => "
                          "legit: %s",
                          right, cases.size(), per_class["plain"], per_class["markdown"], per_class["multiple"],
                          threshold ? "yes" : "no");
  return right == cases.size() && cases.size() == 50 && per_class.size() == 3 && threshold ? pass(detail)
                                                                                            : fail(detail);
}

Verdict determinism() {
  // Two independent output trees: splits, forest, index and rows are all rebuilt.
  Rng rng(8080);
  const auto table = ft::two_clusters(rng, 1500, 0.08);
  std::vector<std::string> files;
  bool same = true;
  std::string first_rows;
  for (int rep = 0; rep < 2; ++rep) {
    ft::TempDir dir;
    ExperimentConfig cfg;
    cfg.dataset = ft::write_dataset_config(dir.path(), "det", table, 200, 50, 17);
    cfg.output_dir = dir / "out";
    cfg.k = 5;
    cmd_run(cfg);
    std::string all;
    for (std::size_t r = 0; r < cfg.generation.runs; ++r) all += bytes(cfg.output_dir / ("rows_run" + std::to_string(r) + ".jsonl"));
    all += bytes(cfg.output_dir / kSplitsFile);
    if (rep == 0) first_rows = all;
    else same = all == first_rows;
  }

  // Splits of a fixed fixture against a checked-in file.
  ft::TempDir dir;
  Rng frng(1);
  ft::Table fixture = ft::random_pool(frng, 3000, 2, 1, 0.0, 5, 3);
  for (std::size_t i = 0; i < fixture.rows.size(); ++i) fixture.rows[i].back() = frng.below(100) < 3 ? "1" : "0";
  ExperimentConfig cfg;
  cfg.dataset = ft::write_dataset_config(dir.path(), "fixture", fixture, 800, 200, 42);
  cfg.output_dir = dir / "out";
  const auto produced = bytes(cmd_prepare(cfg));
  const auto golden = bytes(ft::golden_dir() / "splits_fixture.json");
  const bool splits_ok = !golden.empty() && produced == golden;
  const auto detail = fmt("row files of two fresh runs %s; fixture splits %s the checked-in file",
                          same ? "byte-identical" : "differ", splits_ok ? "match" : "do not match");
  return same && splits_ok ? pass(detail) : fail(detail);
}

Verdict real_data() {
  const char* ccfraud = std::getenv("FINFRE_CCFRAUD_CSV");
  const char* paysim = std::getenv("FINFRE_PAYSIM_CSV");
  const char* live = std::getenv("FINFRE_LIVE_CONFIG");
  if (!ccfraud && !paysim && !live) {
    return skip("set FINFRE_CCFRAUD_CSV, FINFRE_PAYSIM_CSV and/or FINFRE_LIVE_CONFIG to run");
  }
  std::string detail;
  bool ok = true;
  auto ratio_check = [&](const char* path, const char* label, double want_pct) {
    SchemaHints h;
    h.kinds[label] = ColumnKind::Label;
    const double pct = 100.0 * fraud_ratio(load_csv(path, h));
    const bool good = std::abs(pct - want_pct) <= 0.01;
    ok = ok && good;
    detail += fmt("%s fraud ratio %.4f%% (want %.2f%%); ", path, pct, want_pct);
  };
  if (ccfraud) ratio_check(ccfraud, "fraudRisk", 5.98);
  if (paysim) ratio_check(paysim, "isFraud", 0.13);
  if (live) {
    auto cfg = load_experiment_config(live);
    cfg.backend.kind = "http";
    cfg.backend.apply_env();
    const auto out = cmd_run(cfg);
    ok = ok && out.summary.flag_rate <= 0.05;
    detail += fmt("live run flag rate %.4f over %zu rows", out.summary.flag_rate, out.summary.evaluated);
  }
  return ok ? pass(detail) : fail(detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"retrieval_exactness", retrieval_exactness},
      {"backoff_correctness", backoff_correctness},
      {"standardization_oracle", standardization_oracle},
      {"metric_oracle", metric_oracle},
      {"knn_majority_equivalence", knn_majority_equivalence},
      {"importance_sanity", importance_sanity},
      {"prompt_goldens", prompt_goldens},
      {"threshold_and_parsing", threshold_and_parsing},
      {"determinism", determinism},
      {"real_data_and_live_backend", real_data},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.kind == Verdict::Pass ? "PASS" : v.kind == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("%s %s: %s\n", tag, name, v.detail.c_str());
    std::fflush(stdout);
    failures += v.kind == Verdict::Fail ? 1 : 0;
  }
  return failures == 0 ? 0 : 1;
}
