#include "finfre/forest.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <limits>
#include <cmath>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "finfre/error.hpp"

namespace finfre {
namespace {

double gini(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0.0) return 0.0;
  const double p0 = w0 / w;
  const double p1 = w1 / w;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
  std::int32_t feature = TreeNode::kLeaf;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();  // -(W_l*G_l + W_r*G_r)
  double left_w0 = 0, left_w1 = 0, right_w0 = 0, right_w1 = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingMatrix& x, std::span<const double> weights, const ForestConfig& cfg, Rng& rng)
      : x_(x), w_(weights), cfg_(cfg), rng_(rng), mtry_(cfg.candidates_per_split(x.features())) {
    decrease_.assign(x.features(), 0.0);
    features_.resize(x.features());
    std::iota(features_.begin(), features_.end(), std::int32_t{0});
  }

  void build(std::vector<TreeNode>& nodes, std::vector<double>& decrease) {
    std::vector<std::size_t> samples;
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      if (w_[i] > 0.0) samples.push_back(i);
    }
    double w0 = 0, w1 = 0;
    for (auto i : samples) (x_.labels[i] ? w1 : w0) += w_[i];
    root_weight_ = w0 + w1;
    grow(samples, 0, w0, w1);
    nodes = std::move(nodes_);
    decrease = std::move(decrease_);
    if (root_weight_ > 0.0) {
      for (auto& d : decrease) d /= root_weight_;
    }
  }

 private:
  std::int32_t grow(std::vector<std::size_t>& samples, std::size_t depth, double w0, double w1) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    TreeNode node;
    node.weight = w0 + w1;
    node.impurity = gini(w0, w1);
    node.positive_fraction = node.weight > 0 ? w1 / node.weight : 0.0;
    nodes_.push_back(node);

    if (depth >= cfg_.max_depth || node.impurity <= 0.0 ||
        samples.size() < 2 * std::max<std::size_t>(cfg_.min_samples_leaf, 1)) {
      return id;
    }

    const SplitChoice best = find_split(samples);
    if (best.feature == TreeNode::kLeaf) return id;

    const double wl = best.left_w0 + best.left_w1;
    const double wr = best.right_w0 + best.right_w1;
    // Gini is concave, so the decrease is nonnegative up to rounding.
    decrease_[static_cast<std::size_t>(best.feature)] +=
        std::max(0.0, node.weight * node.impurity - wl * gini(best.left_w0, best.left_w1) -
                          wr * gini(best.right_w0, best.right_w1));

    const auto& col = x_.columns[static_cast<std::size_t>(best.feature)];
    std::vector<std::size_t> left, right;
    for (auto i : samples) (col[i] <= best.threshold ? left : right).push_back(i);
    samples.clear();
    samples.shrink_to_fit();

    nodes_[static_cast<std::size_t>(id)].feature = best.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
    const auto l = grow(left, depth + 1, best.left_w0, best.left_w1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    const auto r = grow(right, depth + 1, best.right_w0, best.right_w1);
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  // Draws features without replacement until `mtry_` non-constant ones have
  // been evaluated (constant features do not count against the budget).
  SplitChoice find_split(const std::vector<std::size_t>& samples) {
    SplitChoice best;
    std::size_t evaluated = 0;
    const std::size_t d = features_.size();
    for (std::size_t drawn = 0; drawn < d && evaluated < mtry_; ++drawn) {
      const auto j = drawn + static_cast<std::size_t>(rng_.below(d - drawn));
      std::swap(features_[drawn], features_[j]);
      const auto f = features_[drawn];
      if (evaluate_feature(samples, f, best)) ++evaluated;
    }
    return best;
  }

  // Returns false when the feature is constant on the node.
  bool evaluate_feature(const std::vector<std::size_t>& samples, std::int32_t f, SplitChoice& best) {
    const auto& col = x_.columns[static_cast<std::size_t>(f)];
    order_.assign(samples.begin(), samples.end());
    std::sort(order_.begin(), order_.end(), [&col](std::size_t a, std::size_t b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
    if (col[order_.front()] == col[order_.back()]) return false;

    double tw0 = 0, tw1 = 0;
    for (auto i : order_) (x_.labels[i] ? tw1 : tw0) += w_[i];

    const std::size_t m = order_.size();
    const std::size_t min_leaf = std::max<std::size_t>(cfg_.min_samples_leaf, 1);
    double lw0 = 0, lw1 = 0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      const auto i = order_[k];
      (x_.labels[i] ? lw1 : lw0) += w_[i];
      const double a = col[i];
      const double b = col[order_[k + 1]];
      if (a == b) continue;
      if (k + 1 < min_leaf || m - k - 1 < min_leaf) continue;
      const double rw0 = tw0 - lw0;
      const double rw1 = tw1 - lw1;
      const double score = -((lw0 + lw1) * gini(lw0, lw1) + (rw0 + rw1) * gini(rw0, rw1));
      if (score > best.score) {
        double t = a + (b - a) / 2.0;
        if (!(t < b)) t = a;
        best = {f, t, score, lw0, lw1, rw0, rw1};
      }
    }
    return true;
  }

  const TrainingMatrix& x_;
  std::span<const double> w_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::size_t mtry_;
  double root_weight_ = 0.0;
  std::vector<TreeNode> nodes_;
  std::vector<double> decrease_;
  std::vector<std::int32_t> features_;
  std::vector<std::size_t> order_;
};

// Stratified row subsample for very large pools; sorted positions.
std::vector<std::size_t> capped_rows(const Dataset& ds, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (cap == 0 || ds.size() <= cap) return all;
  std::array<std::vector<std::size_t>, 2> by_class;
  for (auto i : all) by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  const std::array<std::size_t, 2> counts{by_class[0].size(), by_class[1].size()};
  auto quota = largest_remainder(counts, cap);
  Rng rng = Rng::derive(seed, 0xcafe);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < 2; ++c) {
    // Keep at least one row of each present class.
    if (quota[c] == 0 && counts[c] > 0) quota[c] = 1;
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    out.insert(out.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::size_t ForestConfig::candidates_per_split(std::size_t d) const {
  if (d == 0) return 0;
  if (features_per_split == "sqrt") {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  }
  if (features_per_split == "all") return d;
  std::size_t n = 0;
  try {
    n = std::stoul(features_per_split);
  } catch (const std::exception&) {
    throw ConfigError("features_per_split must be 'sqrt', 'all' or a positive integer");
  }
  if (n == 0) throw ConfigError("features_per_split must be positive");
  return std::min(n, d);
}

void ForestConfig::validate() const {
  if (n_trees < 1) throw ConfigError("forest n_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("forest max_depth must be >= 1");
  if (min_samples_leaf < 1) throw ConfigError("forest min_samples_leaf must be >= 1");
  if (class_weighting != "balanced" && class_weighting != "none") {
    throw ConfigError("forest class_weighting must be 'balanced' or 'none'");
  }
  (void)candidates_per_split(1);
}

void to_json(nlohmann::json& j, const ForestConfig& cfg) {
  j = {{"n_trees", cfg.n_trees},
       {"max_depth", cfg.max_depth},
       {"min_samples_leaf", cfg.min_samples_leaf},
       {"features_per_split", cfg.features_per_split},
       {"bootstrap", cfg.bootstrap},
       {"class_weighting", cfg.class_weighting},
       {"seed", cfg.seed},
       {"row_cap", cfg.row_cap}};
}

void from_json(const nlohmann::json& j, ForestConfig& cfg) {
  cfg.n_trees = j.value("n_trees", cfg.n_trees);
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  cfg.min_samples_leaf = j.value("min_samples_leaf", cfg.min_samples_leaf);
  cfg.features_per_split = j.value("features_per_split", cfg.features_per_split);
  cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
  cfg.class_weighting = j.value("class_weighting", cfg.class_weighting);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.row_cap = j.value("row_cap", cfg.row_cap);
  cfg.threads = j.value("threads", cfg.threads);
}

TrainingMatrix make_training_matrix(const Dataset& ds) {
  TrainingMatrix x;
  const auto& schema = ds.schema();
  const std::size_t n = ds.size();
  for (auto c : schema.feature_indices()) {
    x.names.push_back(schema[c].name);
    std::vector<double> col(n);
    if (schema[c].kind == ColumnKind::Numeric) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (!ds.is_missing(r, c)) {
          sum += ds.number(r, c);
          ++count;
        }
      }
      const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
      for (std::size_t r = 0; r < n; ++r) col[r] = ds.is_missing(r, c) ? mean : ds.number(r, c);
    } else {
      // Missing becomes its own category, coded after the observed ones.
      const auto missing_code = static_cast<double>(ds.categories(c).size());
      for (std::size_t r = 0; r < n; ++r) {
        const auto code = ds.code(r, c);
        col[r] = code == Dataset::kMissingCode ? missing_code : static_cast<double>(code);
      }
    }
    x.columns.push_back(std::move(col));
  }
  x.labels = ds.labels();
  return x;
}

DecisionTree DecisionTree::fit(const TrainingMatrix& x, std::span<const double> weights,
                               const ForestConfig& cfg, Rng& rng) {
  DecisionTree tree;
  TreeBuilder builder(x, weights, cfg, rng);
  builder.build(tree.nodes_, tree.decrease_);
  return tree;
}

std::size_t DecisionTree::split_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(),
                                                [](const TreeNode& n) { return n.feature != TreeNode::kLeaf; }));
}

double DecisionTree::predict_proba(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes_[i].feature != TreeNode::kLeaf) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].positive_fraction;
}

RandomForest train_forest(const Dataset& ext, const ForestConfig& cfg) {
  cfg.validate();
  if (ext.size() < 2) throw DataError("forest training needs at least 2 rows");
  const auto rows = capped_rows(ext, cfg.row_cap, cfg.seed);
  const Dataset sample = rows.size() == ext.size() ? ext : ext.subset(rows);
  const TrainingMatrix x = make_training_matrix(sample);
  if (x.features() == 0) throw DataError("forest training needs at least one feature");

  std::array<std::size_t, 2> counts{0, 0};
  for (int y : x.labels) ++counts[static_cast<std::size_t>(y)];
  if (counts[0] == 0 || counts[1] == 0) throw DataError("forest training needs both classes present");
  const bool all_constant = std::all_of(x.columns.begin(), x.columns.end(), [](const auto& col) {
    return std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
  });
  if (all_constant) throw DataError("forest training: all features are constant");

  std::array<double, 2> class_weight{1.0, 1.0};
  if (cfg.class_weighting == "balanced") {
    const double n = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < 2; ++c) class_weight[c] = n / (2.0 * static_cast<double>(counts[c]));
  }

  RandomForest forest;
  forest.cfg_ = cfg;
  forest.names_ = x.names;
  forest.rows_used_ = x.rows();
  forest.trees_.resize(cfg.n_trees);

  auto fit_one = [&](std::size_t t) {
    Rng rng = Rng::derive(cfg.seed, t);
    std::vector<double> w(x.rows(), 0.0);
    if (cfg.bootstrap) {
      for (std::size_t k = 0; k < x.rows(); ++k) w[static_cast<std::size_t>(rng.below(x.rows()))] += 1.0;
    } else {
      std::fill(w.begin(), w.end(), 1.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= class_weight[static_cast<std::size_t>(x.labels[i])];
    forest.trees_[t] = DecisionTree::fit(x, w, cfg, rng);
  };

  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cfg.n_trees);
  if (threads <= 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) fit_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) {
      pool.emplace_back([&] {
        for (std::size_t t; (t = next.fetch_add(1)) < cfg.n_trees;) fit_one(t);
      });
    }
  }
  return forest;
}

double FeatureImportance::score(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return scores[i];
  }
  throw DataError("no importance entry for '" + std::string(name) + "'");
}

FeatureImportance importance_scores(const RandomForest& forest) {
  FeatureImportance imp;
  imp.names = forest.feature_names();
  imp.scores.assign(imp.names.size(), 0.0);
  // Accumulate in tree-index order so the result does not depend on scheduling.
  for (const auto& tree : forest.trees()) {
    const auto& d = tree.impurity_decrease();
    for (std::size_t f = 0; f < d.size(); ++f) imp.scores[f] += d[f];
  }
  const double trees = static_cast<double>(std::max<std::size_t>(forest.trees().size(), 1));
  for (auto& s : imp.scores) s /= trees;
  const double total = std::accumulate(imp.scores.begin(), imp.scores.end(), 0.0);
  if (total > 0.0) {
    for (auto& s : imp.scores) s /= total;
  } else {
    imp.degenerate = true;
  }
  return imp;
}

}  // namespace finfre
