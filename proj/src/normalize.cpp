#include "finfre/normalize.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "finfre/error.hpp"

namespace finfre {

NormStats fit_stats(const Dataset& ext, const SelectedFeatures& sel) {
  NormStats stats;
  const auto& schema = ext.schema();
  for (const auto& f : sel.numeric) {
    const auto c = schema.index_of(f.name);
    // Extended accumulators: rounding in the mean is amplified by 1/sd.
    long double sum = 0.0L;
    std::size_t n = 0;
    for (std::size_t r = 0; r < ext.size(); ++r) {
      if (ext.is_missing(r, c)) continue;
      sum += ext.number(r, c);
      ++n;
    }
    if (n == 0) throw DataError("feature '" + f.name + "' is entirely missing in the external split");
    const double mean = static_cast<double>(sum / static_cast<long double>(n));
    long double ss = 0.0L;
    for (std::size_t r = 0; r < ext.size(); ++r) {
      if (ext.is_missing(r, c)) continue;
      const long double d = static_cast<long double>(ext.number(r, c)) - sum / static_cast<long double>(n);
      ss += d * d;
    }
    stats.features.push_back({f.name, mean, static_cast<double>(std::sqrt(ss / static_cast<long double>(n)))});
  }
  return stats;
}

double standardize(double value, const FeatureStats& s) {
  if (s.std == 0.0) return 0.0;
  return (value - s.mean) / s.std;
}

std::vector<double> z_transform(const FeatureRow& row, const NormStats& stats) {
  if (row.numeric.size() != stats.features.size()) {
    throw DataError("z_transform: row has " + std::to_string(row.numeric.size()) + " numeric values, stats cover " +
                    std::to_string(stats.features.size()));
  }
  std::vector<double> z(row.numeric.size(), 0.0);
  for (std::size_t f = 0; f < z.size(); ++f) {
    if (row.numeric[f]) z[f] = standardize(*row.numeric[f], stats.features[f]);
  }
  return z;
}

Matrix vectorize_pool(const Dataset& ext, const SelectedFeatures& sel, const NormStats& stats) {
  Matrix m;
  m.rows = ext.size();
  m.cols = stats.features.size();
  m.data.assign(m.rows * m.cols, 0.0);
  const auto& schema = ext.schema();
  for (std::size_t f = 0; f < m.cols; ++f) {
    const auto c = schema.index_of(sel.numeric[f].name);
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (!ext.is_missing(r, c)) m.data[r * m.cols + f] = standardize(ext.number(r, c), stats.features[f]);
    }
  }
  return m;
}

void save_stats(const std::filesystem::path& path, const NormStats& stats) {
  auto doc = nlohmann::ordered_json::object();
  for (const auto& f : stats.features) doc[f.name] = {{"mean", f.mean}, {"std", f.std}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

NormStats load_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  NormStats stats;
  try {
    const auto doc = nlohmann::ordered_json::parse(in);
    for (const auto& [name, v] : doc.items()) {
      stats.features.push_back({name, v.at("mean").get<double>(), v.at("std").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return stats;
}

}  // namespace finfre
