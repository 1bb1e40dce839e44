#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finfre/dataset.hpp"
#include "finfre/features.hpp"

namespace finfre {

struct FeatureStats {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // population (1/N) standard deviation

  bool operator==(const FeatureStats&) const = default;
};

// Global z-score statistics for the selected numeric features, fitted on
// non-missing external-pool cells. Missing cells and zero-variance features
// both standardize to 0.
struct NormStats {
  std::vector<FeatureStats> features;  // SelectedFeatures::numeric order

  bool operator==(const NormStats&) const = default;
};

// Throws DataError when a selected numeric feature is entirely missing.
NormStats fit_stats(const Dataset& ext, const SelectedFeatures& sel);

double standardize(double value, const FeatureStats& s);
std::vector<double> z_transform(const FeatureRow& row, const NormStats& stats);

// Row-major N x |F_num| matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

Matrix vectorize_pool(const Dataset& ext, const SelectedFeatures& sel, const NormStats& stats);

void save_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_stats(const std::filesystem::path& path);

}  // namespace finfre
