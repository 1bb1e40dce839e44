#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "finfre/dataset.hpp"
#include "finfre/features.hpp"
#include "finfre/normalize.hpp"

namespace finfre {

// Immutable retrieval snapshot of the external pool: selected-feature values,
// standardized numeric matrix with precomputed L2 norms, and interned
// categorical codes.
class RetrievalIndex {
 public:
  static constexpr std::int32_t kMissingCode = -1;
  // Query category never seen in the pool; matches nothing.
  static constexpr std::int32_t kUnseenCode = -2;

  std::size_t size() const { return row_ids_.size(); }
  const SelectedFeatures& selected() const { return selected_; }
  const NormStats& stats() const { return stats_; }

  std::uint64_t row_id(std::size_t i) const { return row_ids_[i]; }
  int label(std::size_t i) const { return labels_[i]; }
  std::int32_t code(std::size_t cat, std::size_t i) const { return codes_[cat][i]; }
  const std::vector<std::string>& dictionary(std::size_t cat) const { return dictionaries_[cat]; }
  std::span<const double> z(std::size_t i) const { return z_.row(i); }
  double norm(std::size_t i) const { return norms_[i]; }

  // Rows whose first-ranked categorical feature has code `c` (ascending ids).
  std::span<const std::uint32_t> posting(std::int32_t c) const;

  // Selected-feature values of pool row i, for prompt rendering.
  FeatureRow row(std::size_t i) const;

  std::int32_t encode(std::size_t cat, const std::optional<std::string>& value) const;

  friend RetrievalIndex build_index(const Dataset&, const SelectedFeatures&, const NormStats&);
  friend void save_index(const std::filesystem::path&, const RetrievalIndex&);
  friend RetrievalIndex load_index(const std::filesystem::path&);

 private:
  void finish();

  SelectedFeatures selected_;
  NormStats stats_;
  std::vector<std::uint64_t> row_ids_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::vector<std::int32_t>> codes_;          // [cat][row]
  std::vector<std::vector<std::string>> dictionaries_;    // [cat][code]
  std::vector<double> raw_;                               // row-major, NaN = missing
  Matrix z_;
  std::vector<double> norms_;
  // derived, rebuilt on load
  std::vector<std::vector<std::uint32_t>> postings_;      // by code of categorical feature 0
  std::vector<std::uint32_t> missing_posting_;
  std::vector<std::unordered_map<std::string, std::int32_t>> lookup_;
};

// Throws DataError on an empty pool.
RetrievalIndex build_index(const Dataset& ext, const SelectedFeatures& sel, const NormStats& stats);

void save_index(const std::filesystem::path& path, const RetrievalIndex& idx);
RetrievalIndex load_index(const std::filesystem::path& path);

// Candidate pool after categorical backoff. `all` stands for the whole pool
// without materializing its ids.
struct Candidates {
  bool all = false;
  std::vector<std::uint32_t> ids;
  std::size_t j_star = 0;
  std::size_t size(const RetrievalIndex& idx) const { return all ? idx.size() : ids.size(); }
};

// Progressive equality filtering over the categorical features in importance
// order; stops at the deepest nonempty level.
Candidates categorical_filter(const RetrievalIndex& idx, const FeatureRow& q);

struct RetrievedItem {
  std::uint32_t id = 0;        // pool position
  std::uint64_t row_id = 0;    // source row
  double similarity = 0.0;
  int label = 0;
  bool zero_norm = false;      // similarity defined as 0

  bool operator==(const RetrievedItem&) const = default;
};

struct RetrievedSet {
  std::vector<RetrievedItem> items;  // similarity descending, ties by ascending id
  std::size_t j_star = 0;
  std::size_t pool_size = 0;         // |C(x_q)|

  double positive_fraction() const;
  std::size_t positives() const;
};

// Cosine similarity with s := 0 when either vector has zero norm, clamped
// to [-1, 1].
double cosine(std::span<const double> a, double norm_a, std::span<const double> b, double norm_b);
double l2_norm(std::span<const double> v);

// Exact top-n by similarity over the candidates.
RetrievedSet cosine_topn(const RetrievalIndex& idx, const Candidates& candidates,
                         std::span<const double> zq, std::size_t n);

RetrievedSet retrieve(const RetrievalIndex& idx, const FeatureRow& q, std::size_t n);

// {j_star, pool_size, neighbor_ids, similarities, neighbor_labels, positive_fraction}
nlohmann::json diagnostics_json(const RetrievedSet& rs);

}  // namespace finfre
