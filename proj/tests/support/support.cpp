#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "finfre/csv.hpp"

namespace finfre::testing {
namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  Rng rng((static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ ++counter);
  for (;;) {
    char name[64];
    std::snprintf(name, sizeof name, "finfre-test-%016llx", static_cast<unsigned long long>(rng.next()));
    path_ = fs::temp_directory_path() / name;
    if (fs::create_directory(path_)) return;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Dataset to_dataset(const Table& t) {
  std::vector<Column> cols;
  for (std::size_t i = 0; i < t.header.size(); ++i) cols.push_back({t.header[i], t.kinds[i]});
  DatasetBuilder b{Schema(cols)};
  for (const auto& r : t.rows) b.add_row(r);
  return std::move(b).build();
}

void write_csv(const fs::path& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  csv::write_row(out, t.header);
  for (const auto& r : t.rows) csv::write_row(out, r);
}

fs::path write_dataset_config(const fs::path& dir, const std::string& name, const Table& t, std::size_t test_size,
                              std::size_t val_size, std::uint64_t seed, const std::string& template_ref) {
  write_csv(dir / (name + ".csv"), t);
  nlohmann::json cols = nlohmann::json::object();
  std::string label;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.kinds[i] == ColumnKind::Label) label = t.header[i];
    else cols[t.header[i]] = std::string(to_string(t.kinds[i]));
  }
  nlohmann::json doc = {{"name", name},
                        {"csv", name + ".csv"},
                        {"label", label},
                        {"columns", cols},
                        {"split", {{"test_size", test_size}, {"val_size", val_size}, {"seed", seed}}}};
  if (!template_ref.empty()) doc["template"] = template_ref;
  const auto path = dir / (name + ".dataset.json");
  std::ofstream(path) << doc.dump(2);
  return path;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Table random_pool(Rng& rng, std::size_t rows, std::size_t n_num, std::size_t n_cat, double missing_rate,
                  int value_range, int cardinality) {
  Table t;
  for (std::size_t i = 0; i < n_num; ++i) {
    t.header.push_back("f" + std::to_string(i));
    t.kinds.push_back(ColumnKind::Numeric);
  }
  for (std::size_t i = 0; i < n_cat; ++i) {
    t.header.push_back("c" + std::to_string(i));
    t.kinds.push_back(ColumnKind::Categorical);
  }
  t.header.push_back("y");
  t.kinds.push_back(ColumnKind::Label);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < n_num; ++i) {
      if (rng.uniform() < missing_rate) row.emplace_back();
      else row.push_back(std::to_string(static_cast<int>(rng.below(2 * value_range + 1)) - value_range));
    }
    for (std::size_t i = 0; i < n_cat; ++i) {
      if (rng.uniform() < missing_rate) row.emplace_back();
      else row.push_back("v" + std::to_string(rng.below(static_cast<std::uint64_t>(cardinality))));
    }
    row.push_back(rng.uniform() < 0.3 ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table two_clusters(Rng& rng, std::size_t rows, double positive_rate) {
  Table t;
  t.header = {"a", "b", "c", "d", "region", "channel", "y"};
  t.kinds = {ColumnKind::Numeric,     ColumnKind::Numeric,     ColumnKind::Numeric, ColumnKind::Numeric,
             ColumnKind::Categorical, ColumnKind::Categorical, ColumnKind::Label};
  const std::size_t positives = static_cast<std::size_t>(std::llround(positive_rate * static_cast<double>(rows)));
  std::vector<int> labels(rows, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  rng.shuffle(std::span<int>(labels));
  // Negatives sit around one corner, positives around the opposite one, so
  // the standardized vectors point in opposite directions.
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    const double sign = y == 1 ? 1.0 : -1.0;
    std::vector<std::string> row;
    row.push_back(num(5.0 + sign * 2.0 + 0.3 * rng.normal()));
    row.push_back(num(-3.0 + sign * 1.0 + 0.15 * rng.normal()));
    row.push_back(num(100.0 + sign * 40.0 + 6.0 * rng.normal()));
    row.push_back(num(sign * 0.5 + 0.08 * rng.normal()));
    row.push_back("r" + std::to_string(rng.below(3)));
    row.push_back("ch" + std::to_string(rng.below(2)));
    row.push_back(std::to_string(y));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table single_determinant(Rng& rng, std::size_t rows, std::size_t d, std::size_t det) {
  Table t;
  for (std::size_t i = 0; i < d; ++i) {
    t.header.push_back("x" + std::to_string(i));
    t.kinds.push_back(ColumnKind::Numeric);
  }
  t.header.push_back("y");
  t.kinds.push_back(ColumnKind::Label);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::string> row;
    int y = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const double v = rng.normal();
      if (i == det) y = v > 0.8 ? 1 : 0;
      row.push_back(num(v));
    }
    row.push_back(std::to_string(y));
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

bool same_category(const Dataset& pool, std::size_t row, std::size_t col, const std::optional<std::string>& q) {
  if (pool.is_missing(row, col)) return !q.has_value();
  return q.has_value() && pool.text(row, col) == *q;
}

}  // namespace

Chain brute_force_chain(const Dataset& pool, const SelectedFeatures& sel, const FeatureRow& q) {
  Chain chain;
  std::vector<std::uint32_t> all(pool.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  chain.levels.push_back(all);
  for (std::size_t j = 0; j < sel.categorical.size(); ++j) {
    const auto col = pool.schema().index_of(sel.categorical[j].name);
    std::vector<std::uint32_t> next;
    for (auto id : chain.levels.back()) {
      if (same_category(pool, id, col, q.categorical[j])) next.push_back(id);
    }
    chain.levels.push_back(std::move(next));
  }
  for (std::size_t j = 0; j < chain.levels.size(); ++j) {
    if (!chain.levels[j].empty()) chain.j_star = j;
  }
  return chain;
}

std::vector<RetrievedItem> brute_force_retrieve(const Dataset& pool, const SelectedFeatures& sel,
                                                const NormStats& stats, const FeatureRow& q, std::size_t n) {
  const auto chain = brute_force_chain(pool, sel, q);
  const auto& cand = chain.levels[chain.j_star];
  const std::size_t f = sel.numeric.size();
  auto z = [&](std::optional<double> v, std::size_t k) {
    if (!v || stats.features[k].std == 0.0) return 0.0;
    return (*v - stats.features[k].mean) / stats.features[k].std;
  };
  std::vector<double> zq(f);
  for (std::size_t k = 0; k < f; ++k) zq[k] = z(q.numeric[k], k);
  double qq = 0.0;
  for (double v : zq) qq += v * v;
  const double qn = std::sqrt(qq);

  std::vector<std::size_t> cols(f);
  for (std::size_t k = 0; k < f; ++k) cols[k] = pool.schema().index_of(sel.numeric[k].name);
  std::vector<RetrievedItem> all;
  for (auto id : cand) {
    std::vector<double> zx(f);
    double xx = 0.0;
    for (std::size_t k = 0; k < f; ++k) {
      const auto c = cols[k];
      zx[k] = z(pool.is_missing(id, c) ? std::nullopt : std::optional<double>(pool.number(id, c)), k);
      xx += zx[k] * zx[k];
    }
    const double xn = std::sqrt(xx);
    RetrievedItem it;
    it.id = id;
    it.row_id = pool.row_id(id);
    it.label = pool.label(id);
    if (xn == 0.0 || qn == 0.0) {
      it.zero_norm = true;
    } else {
      double dot = 0.0;
      for (std::size_t k = 0; k < f; ++k) dot += zx[k] * zq[k];
      it.similarity = std::clamp(dot / (xn * qn), -1.0, 1.0);
    }
    all.push_back(it);
  }
  std::sort(all.begin(), all.end(), [](const RetrievedItem& a, const RetrievedItem& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

namespace {

SelectedFeatures ccfraud_selection() {
  SelectedFeatures sel;
  const std::vector<std::pair<std::string, ColumnKind>> cols = {
      {"gender", ColumnKind::Categorical}, {"state", ColumnKind::Numeric},    {"cardholder", ColumnKind::Numeric},
      {"balance", ColumnKind::Numeric},    {"numTrans", ColumnKind::Numeric}, {"numIntlTrans", ColumnKind::Numeric},
      {"creditLine", ColumnKind::Numeric}};
  for (const auto& [name, kind] : cols) {
    sel.ordered.push_back({name, 0.0, kind});
    (kind == ColumnKind::Categorical ? sel.categorical : sel.numeric).push_back(sel.ordered.back());
  }
  sel.k = sel.ordered.size();
  return sel;
}

std::string framed(const RenderedPrompt& p) { return p.system + "\n---\n" + p.user + "\n"; }

}  // namespace

std::vector<std::pair<std::string, std::string>> golden_prompts() {
  std::vector<std::pair<std::string, std::string>> out;
  const auto sel = ccfraud_selection();
  const auto tpl = builtin_template("ccfraud");
  const std::vector<Exemplar> ex{
      {FeatureRow{{5, 1, 7000, 12, 0, 10}, {"male"}}, 1, 0.98},
      {FeatureRow{{5, 2, std::nullopt, 3, 1, 12}, {"female"}}, 0, 0.91},
      {FeatureRow{{17, 1, 12874.5, 40, 2, 8}, {std::nullopt}}, 0, 0.4},
  };
  const FeatureRow query{{5, 1, 6500.25, 11, 0, 10}, {"male"}};
  out.emplace_back("ccfraud_scoring.txt", framed(build_prompt(ex, query, tpl, sel, {})));
  PromptOptions direct;
  direct.rag = false;
  out.emplace_back("ccfraud_direct.txt", framed(build_prompt({}, query, tpl, sel, direct)));

  SelectedFeatures nsel;
  for (const auto* name : {"V14", "V4", "V12", "Amount"}) {
    nsel.ordered.push_back({name, 0.0, ColumnKind::Numeric});
    nsel.numeric.push_back(nsel.ordered.back());
  }
  nsel.k = 4;
  const std::vector<Exemplar> nex{
      {FeatureRow{{-8.19, 4.28, -9.5, 1.0}, {}}, 1, 0.95},
      {FeatureRow{{0.1234567, std::nullopt, 0.33, 149.62}, {}}, 0, 0.9},
  };
  PromptOptions bin;
  bin.mode = PromptMode::Binary;
  out.emplace_back("ccf_binary.txt",
                   framed(build_prompt(nex, FeatureRow{{-7.5, 3.9, -8.8, 0.0}, {}}, builtin_template("ccf"), nsel, bin)));
  return out;
}

fs::path golden_dir() { return fs::path(FINFRE_SOURCE_DIR) / "tests" / "golden"; }

OracleMetrics oracle_metrics(long tp, long fp, long fn, long tn) {
  OracleMetrics m{};
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const long f1_den = 2 * tp + fp + fn;
  m.f1 = (f1_den == 0 || tp == 0) ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(f1_den);
  const long long prod = static_cast<long long>(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  const long long numer = static_cast<long long>(tp) * tn - static_cast<long long>(fp) * fn;
  m.mcc = prod == 0 ? 0.0 : static_cast<double>(numer) / std::sqrt(static_cast<double>(prod));
  return m;
}

}  // namespace finfre::testing
