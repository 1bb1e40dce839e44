#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "finfre/dataset.hpp"
#include "finfre/random.hpp"

namespace finfre {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_samples_leaf = 1;
  std::string features_per_split = "sqrt";  // "sqrt", "all", or a positive integer
  bool bootstrap = true;
  std::string class_weighting = "balanced";  // "balanced" or "none"
  std::uint64_t seed = 42;
  std::size_t row_cap = 200000;  // stratified subsample above this; 0 disables
  std::size_t threads = 0;       // 0: hardware concurrency

  std::size_t candidates_per_split(std::size_t d) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ForestConfig& cfg);
void from_json(const nlohmann::json& j, ForestConfig& cfg);

// Dense column-major feature matrix for tree training. Numeric missing cells
// are imputed with the column mean; categorical cells become first-seen codes
// with missing as one more category.
struct TrainingMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }
  std::size_t features() const { return columns.size(); }
};

TrainingMatrix make_training_matrix(const Dataset& ds);

struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // x <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double weight = 0.0;     // weighted sample mass reaching the node
  double impurity = 0.0;   // Gini
  double positive_fraction = 0.0;
};

// One CART tree. Gini impurity, weighted samples, per-node candidate features
// drawn uniformly without replacement.
class DecisionTree {
 public:
  // `weights[i]` is the sample weight of row i (0 excludes the row).
  static DecisionTree fit(const TrainingMatrix& x, std::span<const double> weights,
                          const ForestConfig& cfg, Rng& rng);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t split_count() const;

  // Sum over split nodes of W_t*G_t - W_l*G_l - W_r*G_r, divided by the root
  // weight. Indexed by feature.
  const std::vector<double>& impurity_decrease() const { return decrease_; }

  double predict_proba(std::span<const double> row) const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> decrease_;
};

class RandomForest {
 public:
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const ForestConfig& config() const { return cfg_; }
  std::size_t rows_used() const { return rows_used_; }

  friend RandomForest train_forest(const Dataset& ext, const ForestConfig& cfg);

 private:
  std::vector<DecisionTree> trees_;
  std::vector<std::string> names_;
  ForestConfig cfg_;
  std::size_t rows_used_ = 0;
};

// Throws DataError on single-class data or when every feature is constant.
RandomForest train_forest(const Dataset& ext, const ForestConfig& cfg);

// Per-feature mean-decrease-in-impurity, in schema feature order.
struct FeatureImportance {
  std::vector<std::string> names;
  std::vector<double> scores;
  // True when no tree made a split; scores are then all zero and unnormalized.
  bool degenerate = false;

  double score(std::string_view name) const;
};

FeatureImportance importance_scores(const RandomForest& forest);

}  // namespace finfre
