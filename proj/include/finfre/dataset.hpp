#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace finfre {

enum class ColumnKind { Numeric, Categorical, Label };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct Column {
  std::string name;
  ColumnKind kind;

  bool operator==(const Column&) const = default;
};

// Ordered column list in CSV header order. Exactly one Label column.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const Column& operator[](std::size_t i) const { return columns_[i]; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws DataError
  std::size_t label_index() const { return label_; }

  // Non-label columns in schema order; d = feature_count().
  std::vector<std::size_t> feature_indices() const;
  std::size_t feature_count() const { return columns_.size() - 1; }

  bool operator==(const Schema& other) const { return columns_ == other.columns_; }

 private:
  std::vector<Column> columns_;
  std::size_t label_ = 0;
};

// Column kinds supplied by the caller. The label column must be named here;
// it is never inferred. Unlisted columns are typed by inference.
struct SchemaHints {
  std::map<std::string, ColumnKind, std::less<>> kinds;
  std::vector<std::string> drop;
};

// Typed, immutable tabular store. Storage is columnar (numeric columns as
// doubles with NaN for missing, categorical columns as first-seen codes with
// -1 for missing); the accessors present the row-major view.
class Dataset {
 public:
  static constexpr std::int32_t kMissingCode = -1;

  Dataset() = default;

  const Schema& schema() const { return schema_; }
  std::size_t size() const { return row_ids_.size(); }
  std::size_t feature_count() const { return schema_.feature_count(); }

  bool is_missing(std::size_t row, std::size_t col) const;
  double number(std::size_t row, std::size_t col) const;
  std::int32_t code(std::size_t row, std::size_t col) const;
  std::string_view text(std::size_t row, std::size_t col) const;
  const std::vector<std::string>& categories(std::size_t col) const;

  int label(std::size_t row) const;
  std::vector<int> labels() const;

  // Zero-based data-row position in the source file; the row identity used
  // by splits.
  std::uint64_t row_id(std::size_t row) const { return row_ids_[row]; }

  Dataset subset(std::span<const std::size_t> rows) const;

  friend class DatasetBuilder;

 private:
  struct ColumnData {
    std::vector<double> numbers;
    std::vector<std::int32_t> codes;
    std::vector<std::string> dictionary;
  };

  Schema schema_;
  std::vector<ColumnData> data_;
  std::vector<std::uint64_t> row_ids_;
};

// Incremental construction from raw text cells. Used by load_csv and by
// tests that build small fixtures in memory.
class DatasetBuilder {
 public:
  explicit DatasetBuilder(Schema schema);

  // Appends one record; cells.size() must equal the column count.
  void add_row(std::span<const std::string> cells, std::optional<std::uint64_t> row_id = {});
  void add_row(std::initializer_list<std::string> cells);

  Dataset build() &&;

 private:
  Dataset ds_;
  std::vector<std::map<std::string, std::int32_t, std::less<>>> intern_;
};

bool parse_decimal(std::string_view text, double& out);

Dataset load_csv(const std::filesystem::path& path, const SchemaHints& hints);

// Fraction of non-missing cells that must parse as decimals for an unhinted
// column to be typed Numeric.
inline constexpr double kNumericInferenceThreshold = 0.99;

double fraud_ratio(const Dataset& ds);

struct SplitSpec {
  std::size_t test_size = 8000;
  std::size_t val_size = 2000;
  std::uint64_t seed = 42;
};

// Row positions (into the source dataset) for each partition, each sorted
// ascending.
struct SplitIndices {
  std::vector<std::size_t> external;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct Split {
  Dataset external;
  Dataset validation;
  Dataset test;
};

// Per-class quotas by largest-remainder allocation of `total` in proportion to
// `class_counts`. Leftover units go to the largest fractional parts, ties to
// the lower class index.
std::vector<std::size_t> largest_remainder(std::span<const std::size_t> class_counts,
                                           std::size_t total);

SplitIndices stratified_indices(const Dataset& ds, const SplitSpec& spec);
Split apply_split(const Dataset& ds, const SplitIndices& idx);
Split stratified_split(const Dataset& ds, const SplitSpec& spec);

// Everything needed to load and partition one dataset.
struct DatasetConfig {
  std::string name;
  std::filesystem::path csv;
  std::string label;
  std::map<std::string, ColumnKind, std::less<>> kinds;
  std::vector<std::string> drop;
  SplitSpec split;
  std::string template_ref;  // builtin template name or file path

  SchemaHints hints() const;
};

// Relative paths inside the document resolve against the file's directory.
DatasetConfig load_dataset_config(const std::filesystem::path& path);

}  // namespace finfre
