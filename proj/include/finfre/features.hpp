#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "finfre/dataset.hpp"
#include "finfre/forest.hpp"

namespace finfre {

struct RankedFeature {
  std::string name;
  double importance = 0.0;
  ColumnKind kind = ColumnKind::Numeric;

  bool operator==(const RankedFeature&) const = default;
};

// Top-k feature subset. `ordered` is the selection order (importance
// descending, or sampling order for random selection); `categorical` and
// `numeric` are its subsequences by kind, preserving that order.
struct SelectedFeatures {
  std::vector<RankedFeature> ordered;
  std::size_t k = 0;
  std::string strategy = "importance";  // or "random"
  std::uint64_t seed = 0;               // random strategy only

  std::vector<RankedFeature> categorical;
  std::vector<RankedFeature> numeric;

  std::vector<std::string> names() const;
  bool operator==(const SelectedFeatures&) const = default;
};

// min(k, d) features by descending importance; equal scores keep schema order.
SelectedFeatures select_top_k(const FeatureImportance& imp, const Schema& schema, std::size_t k);

// Uniform sample without replacement of non-label features; importances 0.
SelectedFeatures select_random_k(const Schema& schema, std::size_t k, std::uint64_t seed);

// One transaction projected onto the selected features.
struct FeatureRow {
  std::vector<std::optional<double>> numeric;            // SelectedFeatures::numeric order
  std::vector<std::optional<std::string>> categorical;   // SelectedFeatures::categorical order
};

FeatureRow project(const Dataset& ds, std::size_t row, const SelectedFeatures& sel);

void to_json(nlohmann::json& j, const SelectedFeatures& sel);
void from_json(const nlohmann::json& j, SelectedFeatures& sel);

// Persisted ranking: (feature, importance) descending plus the forest
// settings, so later stages can skip retraining.
struct Ranking {
  FeatureImportance importance;
  ForestConfig forest;
  std::size_t rows_used = 0;
};

void save_ranking(const std::filesystem::path& path, const Ranking& r);
Ranking load_ranking(const std::filesystem::path& path);

}  // namespace finfre
