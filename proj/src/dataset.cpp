#include "finfre/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "finfre/csv.hpp"
#include "finfre/error.hpp"
#include "finfre/random.hpp"

namespace finfre {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool is_blank_record(const std::vector<std::string>& rec) {
  return rec.size() == 1 && trim(rec[0]).empty();
}

int parse_label(std::string_view text, std::size_t line) {
  double v = 0.0;
  if (parse_decimal(text, v) && (v == 0.0 || v == 1.0)) return static_cast<int>(v);
  throw DataError("non-binary label '" + std::string(text) + "' on line " + std::to_string(line));
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Label: return "label";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "label") return ColumnKind::Label;
  throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

Schema::Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string_view> seen;
  std::optional<std::size_t> label;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (!seen.insert(columns_[i].name).second) {
      throw DataError("duplicate column name '" + columns_[i].name + "'");
    }
    if (columns_[i].kind == ColumnKind::Label) {
      if (label) throw DataError("more than one label column");
      label = i;
    }
  }
  if (!label) throw DataError("no label column identified");
  label_ = *label;
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("unknown column '" + std::string(name) + "'");
}

std::vector<std::size_t> Schema::feature_indices() const {
  std::vector<std::size_t> out;
  out.reserve(feature_count());
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i != label_) out.push_back(i);
  }
  return out;
}

bool Dataset::is_missing(std::size_t row, std::size_t col) const {
  if (schema_[col].kind == ColumnKind::Categorical) return data_[col].codes[row] == kMissingCode;
  return std::isnan(data_[col].numbers[row]);
}

double Dataset::number(std::size_t row, std::size_t col) const { return data_[col].numbers[row]; }

std::int32_t Dataset::code(std::size_t row, std::size_t col) const { return data_[col].codes[row]; }

std::string_view Dataset::text(std::size_t row, std::size_t col) const {
  const auto c = data_[col].codes[row];
  if (c == kMissingCode) return {};
  return data_[col].dictionary[static_cast<std::size_t>(c)];
}

const std::vector<std::string>& Dataset::categories(std::size_t col) const {
  return data_[col].dictionary;
}

int Dataset::label(std::size_t row) const {
  return static_cast<int>(data_[schema_.label_index()].numbers[row]);
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = label(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.schema_ = schema_;
  out.data_.resize(data_.size());
  for (std::size_t c = 0; c < data_.size(); ++c) {
    const auto& src = data_[c];
    auto& dst = out.data_[c];
    dst.dictionary = src.dictionary;
    if (schema_[c].kind == ColumnKind::Categorical) {
      dst.codes.reserve(rows.size());
      for (auto r : rows) dst.codes.push_back(src.codes[r]);
    } else {
      dst.numbers.reserve(rows.size());
      for (auto r : rows) dst.numbers.push_back(src.numbers[r]);
    }
  }
  out.row_ids_.reserve(rows.size());
  for (auto r : rows) out.row_ids_.push_back(row_ids_[r]);
  return out;
}

DatasetBuilder::DatasetBuilder(Schema schema) {
  ds_.data_.resize(schema.size());
  intern_.resize(schema.size());
  ds_.schema_ = std::move(schema);
}

void DatasetBuilder::add_row(std::span<const std::string> cells, std::optional<std::uint64_t> row_id) {
  const auto& schema = ds_.schema_;
  const std::size_t line = ds_.row_ids_.size() + 2;  // header is line 1
  if (cells.size() != schema.size()) {
    throw DataError("row arity mismatch on data row " + std::to_string(ds_.row_ids_.size()) +
                    ": expected " + std::to_string(schema.size()) + " cells, got " +
                    std::to_string(cells.size()));
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& col = ds_.data_[c];
    const auto cell = trim(cells[c]);
    switch (schema[c].kind) {
      case ColumnKind::Label:
        col.numbers.push_back(parse_label(cell, line));
        break;
      case ColumnKind::Numeric: {
        double v = 0.0;
        col.numbers.push_back(parse_decimal(cell, v) ? v : kNaN);
        break;
      }
      case ColumnKind::Categorical: {
        if (cell.empty()) {
          col.codes.push_back(Dataset::kMissingCode);
          break;
        }
        auto& table = intern_[c];
        auto it = table.find(cell);
        if (it == table.end()) {
          const auto code = static_cast<std::int32_t>(col.dictionary.size());
          col.dictionary.emplace_back(cell);
          it = table.emplace(std::string(cell), code).first;
        }
        col.codes.push_back(it->second);
        break;
      }
    }
  }
  ds_.row_ids_.push_back(row_id.value_or(ds_.row_ids_.size()));
}

void DatasetBuilder::add_row(std::initializer_list<std::string> cells) {
  add_row(std::span<const std::string>(cells.begin(), cells.size()));
}

Dataset DatasetBuilder::build() && {
  if (ds_.size() == 0) throw DataError("dataset has no rows");
  return std::move(ds_);
}

bool parse_decimal(std::string_view text, double& out) {
  auto s = trim(text);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return false;
  out = v;
  return true;
}

Dataset load_csv(const std::filesystem::path& path, const SchemaHints& hints) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || is_blank_record(*header)) throw DataError(path.string() + ": missing header row");
  if (header->size() >= 1 && header->front().starts_with("\xEF\xBB\xBF")) {
    header->front().erase(0, 3);
  }
  for (auto& name : *header) {
    name = std::string(trim(name));
    if (name.empty()) throw DataError(path.string() + ": malformed header (empty column name)");
  }

  std::vector<bool> keep(header->size(), true);
  for (const auto& d : hints.drop) {
    auto it = std::find(header->begin(), header->end(), d);
    if (it == header->end()) throw DataError("drop column '" + d + "' not in header");
    keep[static_cast<std::size_t>(it - header->begin())] = false;
  }
  for (const auto& [name, kind] : hints.kinds) {
    if (std::find(header->begin(), header->end(), name) == header->end()) {
      throw DataError("hinted column '" + name + "' not in header");
    }
  }

  // Pass 1: arity check and inference statistics for unhinted columns.
  const std::size_t width = header->size();
  std::vector<std::size_t> non_missing(width, 0), parsed(width, 0);
  const auto data_start = in.tellg();
  while (auto rec = reader.next()) {
    if (is_blank_record(*rec)) continue;
    if (rec->size() != width) {
      throw DataError(path.string() + ": row arity mismatch on line " + std::to_string(reader.line()) +
                      " (expected " + std::to_string(width) + ", got " +
                      std::to_string(rec->size()) + ")");
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto cell = trim((*rec)[c]);
      if (cell.empty()) continue;
      ++non_missing[c];
      double v;
      if (parse_decimal(cell, v)) ++parsed[c];
    }
  }

  std::vector<Column> columns;
  for (std::size_t c = 0; c < width; ++c) {
    if (!keep[c]) continue;
    const auto& name = (*header)[c];
    ColumnKind kind;
    if (auto it = hints.kinds.find(name); it != hints.kinds.end()) {
      kind = it->second;
    } else {
      const bool numeric = non_missing[c] > 0 &&
          static_cast<double>(parsed[c]) >= kNumericInferenceThreshold * static_cast<double>(non_missing[c]);
      kind = numeric ? ColumnKind::Numeric : ColumnKind::Categorical;
    }
    columns.push_back({name, kind});
  }

  DatasetBuilder builder{Schema(std::move(columns))};

  // Pass 2: typed load.
  in.clear();
  in.seekg(data_start);
  csv::Reader body(in);
  std::vector<std::string> kept;
  std::uint64_t row_id = 0;
  while (auto rec = body.next()) {
    if (is_blank_record(*rec)) continue;
    kept.clear();
    for (std::size_t c = 0; c < width; ++c) {
      if (keep[c]) kept.push_back(std::move((*rec)[c]));
    }
    try {
      builder.add_row(kept, row_id++);
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return std::move(builder).build();
}

double fraud_ratio(const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) pos += static_cast<std::size_t>(ds.label(i));
  return static_cast<double>(pos) / static_cast<double>(ds.size());
}

__extension__ using u128 = unsigned __int128;

std::vector<std::size_t> largest_remainder(std::span<const std::size_t> class_counts,
                                           std::size_t total) {
  const std::size_t n = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  std::vector<std::size_t> quota(class_counts.size(), 0);
  if (n == 0) return quota;
  // Exact integer arithmetic: quota_c = floor(total * n_c / n), remainder (total * n_c) mod n.
  std::vector<std::pair<u128, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    const auto num = static_cast<u128>(total) * class_counts[c];
    quota[c] = static_cast<std::size_t>(num / n);
    assigned += quota[c];
    rem.emplace_back(num % n, c);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < rem.size(); ++i, ++assigned) {
    ++quota[rem[i].second];
  }
  return quota;
}

SplitIndices stratified_indices(const Dataset& ds, const SplitSpec& spec) {
  const std::size_t n = ds.size();
  if (spec.test_size + spec.val_size >= n) {
    throw DataError("split sizes " + std::to_string(spec.test_size) + "+" + std::to_string(spec.val_size) +
                    " leave no retrieval pool from " + std::to_string(n) + " rows");
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].empty()) {
      throw DataError("stratification infeasible: no rows with label " + std::to_string(c));
    }
  }

  const std::array<std::size_t, 2> counts{by_class[0].size(), by_class[1].size()};
  const auto test_q = largest_remainder(counts, spec.test_size);
  const auto val_q = largest_remainder(counts, spec.val_size);

  SplitIndices out;
  Rng rng(spec.seed);
  for (std::size_t c = 0; c < 2; ++c) {
    if (test_q[c] + val_q[c] >= counts[c]) {
      throw DataError("stratification infeasible: class " + std::to_string(c) + " has " +
                      std::to_string(counts[c]) + " rows but test+validation need " +
                      std::to_string(test_q[c] + val_q[c]) + " and the pool needs at least one");
    }
    auto& rows = by_class[c];
    rng.shuffle(std::span<std::size_t>(rows));
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(test_q[c]));
    out.validation.insert(out.validation.end(), rows.begin() + static_cast<std::ptrdiff_t>(test_q[c]),
                          rows.begin() + static_cast<std::ptrdiff_t>(test_q[c] + val_q[c]));
    out.external.insert(out.external.end(), rows.begin() + static_cast<std::ptrdiff_t>(test_q[c] + val_q[c]),
                        rows.end());
  }
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.external.begin(), out.external.end());
  return out;
}

Split apply_split(const Dataset& ds, const SplitIndices& idx) {
  return {ds.subset(idx.external), ds.subset(idx.validation), ds.subset(idx.test)};
}

Split stratified_split(const Dataset& ds, const SplitSpec& spec) {
  return apply_split(ds, stratified_indices(ds, spec));
}

SchemaHints DatasetConfig::hints() const {
  SchemaHints h;
  h.kinds = kinds;
  h.kinds[label] = ColumnKind::Label;
  h.drop = drop;
  return h;
}

DatasetConfig load_dataset_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }

  DatasetConfig cfg;
  try {
    cfg.name = doc.value("name", path.stem().string());
    std::filesystem::path csv = doc.at("csv").get<std::string>();
    cfg.csv = csv.is_absolute() ? csv : path.parent_path() / csv;
    cfg.label = doc.at("label").get<std::string>();
    if (doc.contains("columns")) {
      for (const auto& [name, kind] : doc.at("columns").items()) {
        const auto k = parse_column_kind(kind.get<std::string>());
        if (k == ColumnKind::Label) throw ConfigError("use the 'label' field to name the label column");
        cfg.kinds[name] = k;
      }
    }
    cfg.drop = doc.value("drop", std::vector<std::string>{});
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      cfg.split.test_size = s.value("test_size", cfg.split.test_size);
      cfg.split.val_size = s.value("val_size", cfg.split.val_size);
      cfg.split.seed = s.value("seed", cfg.split.seed);
    }
    cfg.template_ref = doc.value("template", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const auto& ref = cfg.template_ref;
  const bool looks_like_path =
      ref.find('/') != std::string::npos || (ref.size() > 4 && ref.compare(ref.size() - 4, 4, ".txt") == 0);
  if (looks_like_path &&
      std::filesystem::path(cfg.template_ref).is_relative()) {
    cfg.template_ref = (path.parent_path() / cfg.template_ref).string();
  }
  return cfg;
}

}  // namespace finfre
