#include "finfre/features.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "finfre/error.hpp"
#include "finfre/random.hpp"

namespace finfre {
namespace {

SelectedFeatures partition(std::vector<RankedFeature> ordered, std::size_t k) {
  SelectedFeatures sel;
  sel.k = k;
  sel.ordered = std::move(ordered);
  for (const auto& f : sel.ordered) {
    (f.kind == ColumnKind::Categorical ? sel.categorical : sel.numeric).push_back(f);
  }
  return sel;
}

}  // namespace

std::vector<std::string> SelectedFeatures::names() const {
  std::vector<std::string> out;
  for (const auto& f : ordered) out.push_back(f.name);
  return out;
}

SelectedFeatures select_top_k(const FeatureImportance& imp, const Schema& schema, std::size_t k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<RankedFeature> all;
  for (auto c : schema.feature_indices()) {
    const auto& col = schema[c];
    all.push_back({col.name, imp.score(col.name), col.kind});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const RankedFeature& a, const RankedFeature& b) { return a.importance > b.importance; });
  all.resize(std::min(k, all.size()));
  return partition(std::move(all), k);
}

SelectedFeatures select_random_k(const Schema& schema, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("k must be >= 1");
  auto idx = schema.feature_indices();
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(std::min(k, idx.size()));
  std::vector<RankedFeature> picked;
  for (auto c : idx) picked.push_back({schema[c].name, 0.0, schema[c].kind});
  auto sel = partition(std::move(picked), k);
  sel.strategy = "random";
  sel.seed = seed;
  return sel;
}

FeatureRow project(const Dataset& ds, std::size_t row, const SelectedFeatures& sel) {
  const auto& schema = ds.schema();
  FeatureRow out;
  out.numeric.reserve(sel.numeric.size());
  for (const auto& f : sel.numeric) {
    const auto c = schema.index_of(f.name);
    if (schema[c].kind != ColumnKind::Numeric) throw DataError("feature '" + f.name + "' is not numeric in this schema");
    out.numeric.push_back(ds.is_missing(row, c) ? std::nullopt : std::optional<double>(ds.number(row, c)));
  }
  out.categorical.reserve(sel.categorical.size());
  for (const auto& f : sel.categorical) {
    const auto c = schema.index_of(f.name);
    if (schema[c].kind != ColumnKind::Categorical) {
      throw DataError("feature '" + f.name + "' is not categorical in this schema");
    }
    out.categorical.push_back(ds.is_missing(row, c) ? std::nullopt
                                                    : std::optional<std::string>(std::string(ds.text(row, c))));
  }
  return out;
}

void to_json(nlohmann::json& j, const SelectedFeatures& sel) {
  j = nlohmann::json::object();
  j["k"] = sel.k;
  j["strategy"] = sel.strategy;
  j["seed"] = sel.seed;
  auto& arr = j["features"] = nlohmann::json::array();
  for (const auto& f : sel.ordered) {
    arr.push_back({{"name", f.name}, {"importance", f.importance}, {"kind", std::string(to_string(f.kind))}});
  }
}

void from_json(const nlohmann::json& j, SelectedFeatures& sel) {
  std::vector<RankedFeature> ordered;
  for (const auto& f : j.at("features")) {
    ordered.push_back({f.at("name").get<std::string>(), f.at("importance").get<double>(),
                       parse_column_kind(f.at("kind").get<std::string>())});
  }
  sel = partition(std::move(ordered), j.at("k").get<std::size_t>());
  sel.strategy = j.value("strategy", std::string("importance"));
  sel.seed = j.value("seed", std::uint64_t{0});
}

void save_ranking(const std::filesystem::path& path, const Ranking& r) {
  std::vector<std::size_t> order(r.importance.names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.importance.scores[a] > r.importance.scores[b];
  });
  nlohmann::json doc;
  doc["format"] = "finfre-ranking";
  doc["version"] = 1;
  doc["degenerate"] = r.importance.degenerate;
  doc["rows_used"] = r.rows_used;
  doc["forest"] = r.forest;
  auto& arr = doc["importance"] = nlohmann::json::array();
  for (auto i : order) arr.push_back({{"feature", r.importance.names[i]}, {"importance", r.importance.scores[i]}});
  // Schema order, needed to reproduce tie-breaking without the dataset.
  doc["schema_order"] = r.importance.names;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Ranking load_ranking(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ranking " + path.string());
  Ranking r;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.value("format", "") != "finfre-ranking") throw DataError(path.string() + ": not a ranking file");
    r.forest = doc.at("forest").get<ForestConfig>();
    r.rows_used = doc.value("rows_used", std::size_t{0});
    r.importance.degenerate = doc.value("degenerate", false);
    r.importance.names = doc.at("schema_order").get<std::vector<std::string>>();
    r.importance.scores.assign(r.importance.names.size(), 0.0);
    for (const auto& e : doc.at("importance")) {
      const auto name = e.at("feature").get<std::string>();
      auto it = std::find(r.importance.names.begin(), r.importance.names.end(), name);
      if (it == r.importance.names.end()) throw DataError(path.string() + ": unknown feature " + name);
      r.importance.scores[static_cast<std::size_t>(it - r.importance.names.begin())] = e.at("importance").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return r;
}

}  // namespace finfre
