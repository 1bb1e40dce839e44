#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "finfre/dataset.hpp"
#include "finfre/features.hpp"
#include "finfre/normalize.hpp"
#include "finfre/prompt.hpp"
#include "finfre/random.hpp"
#include "finfre/retrieval.hpp"

namespace finfre::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Raw text table; "" is a missing cell. The label column is "y".
struct Table {
  std::vector<std::string> header;
  std::vector<ColumnKind> kinds;
  std::vector<std::vector<std::string>> rows;
};

Dataset to_dataset(const Table& t);
void write_csv(const std::filesystem::path& path, const Table& t);
// Dataset config naming every column kind; returns its path.
std::filesystem::path write_dataset_config(const std::filesystem::path& dir, const std::string& name, const Table& t,
                                           std::size_t test_size, std::size_t val_size, std::uint64_t seed,
                                           const std::string& template_ref = "");

std::string num(double v);

// Small-integer numerics (ties and zero vectors are common) and
// low-cardinality categoricals, with a share of missing cells.
Table random_pool(Rng& rng, std::size_t rows, std::size_t n_num, std::size_t n_cat, double missing_rate,
                  int value_range, int cardinality);

// Two separable clusters: positives shifted along a fixed direction.
Table two_clusters(Rng& rng, std::size_t rows, double positive_rate);

// Label = 1[x_det > 0]; the other features are independent noise.
Table single_determinant(Rng& rng, std::size_t rows, std::size_t d, std::size_t det);

// Full categorical chain over the pool: sizes[j] = |C^(j)|, j = 0..|F_cat|.
struct Chain {
  std::vector<std::vector<std::uint32_t>> levels;
  std::size_t j_star = 0;
};
Chain brute_force_chain(const Dataset& pool, const SelectedFeatures& sel, const FeatureRow& q);

// Scores every row of C^(j*) and sorts by (similarity desc, id asc).
std::vector<RetrievedItem> brute_force_retrieve(const Dataset& pool, const SelectedFeatures& sel,
                                                const NormStats& stats, const FeatureRow& q, std::size_t n);

// Fixed prompt fixtures: (golden file name, system + "\n---\n" + user + "\n").
std::vector<std::pair<std::string, std::string>> golden_prompts();
std::filesystem::path golden_dir();

struct OracleMetrics {
  double precision, recall, f1, mcc;
};
OracleMetrics oracle_metrics(long tp, long fp, long fn, long tn);

}  // namespace finfre::testing
