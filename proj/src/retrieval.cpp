#include "finfre/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "finfre/error.hpp"

namespace finfre {
namespace {

// Strict "ranks ahead of" order: higher similarity first, then lower id.
bool ahead(const RetrievedItem& a, const RetrievedItem& b) {
  return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
}

}  // namespace

std::span<const std::uint32_t> RetrievalIndex::posting(std::int32_t c) const {
  if (c == kMissingCode) return missing_posting_;
  if (c < 0 || static_cast<std::size_t>(c) >= postings_.size()) return {};
  return postings_[static_cast<std::size_t>(c)];
}

FeatureRow RetrievalIndex::row(std::size_t i) const {
  FeatureRow out;
  const std::size_t f = z_.cols;
  for (std::size_t k = 0; k < f; ++k) {
    const double v = raw_[i * f + k];
    out.numeric.push_back(std::isnan(v) ? std::nullopt : std::optional<double>(v));
  }
  for (std::size_t c = 0; c < codes_.size(); ++c) {
    const auto code = codes_[c][i];
    out.categorical.push_back(code == kMissingCode
                                  ? std::nullopt
                                  : std::optional<std::string>(dictionaries_[c][static_cast<std::size_t>(code)]));
  }
  return out;
}

std::int32_t RetrievalIndex::encode(std::size_t cat, const std::optional<std::string>& value) const {
  if (!value) return kMissingCode;
  const auto& table = lookup_[cat];
  const auto it = table.find(*value);
  return it == table.end() ? kUnseenCode : it->second;
}

void RetrievalIndex::finish() {
  norms_.resize(size());
  for (std::size_t i = 0; i < size(); ++i) norms_[i] = l2_norm(z_.row(i));
  postings_.clear();
  missing_posting_.clear();
  lookup_.assign(dictionaries_.size(), {});
  for (std::size_t c = 0; c < dictionaries_.size(); ++c) {
    for (std::size_t k = 0; k < dictionaries_[c].size(); ++k) {
      lookup_[c].emplace(dictionaries_[c][k], static_cast<std::int32_t>(k));
    }
  }
  if (!codes_.empty()) {
    postings_.resize(dictionaries_[0].size());
    for (std::size_t i = 0; i < size(); ++i) {
      const auto c = codes_[0][i];
      (c == kMissingCode ? missing_posting_ : postings_[static_cast<std::size_t>(c)])
          .push_back(static_cast<std::uint32_t>(i));
    }
  }
}

RetrievalIndex build_index(const Dataset& ext, const SelectedFeatures& sel, const NormStats& stats) {
  if (ext.size() == 0) throw DataError("cannot build an index over an empty pool");
  if (ext.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("pool too large for 32-bit ids");
  if (stats.features.size() != sel.numeric.size()) throw DataError("stats do not match the selected numeric features");

  RetrievalIndex idx;
  idx.selected_ = sel;
  idx.stats_ = stats;
  const std::size_t n = ext.size();
  idx.row_ids_.resize(n);
  idx.labels_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx.row_ids_[i] = ext.row_id(i);
    idx.labels_[i] = static_cast<std::uint8_t>(ext.label(i));
  }

  const auto& schema = ext.schema();
  for (const auto& f : sel.categorical) {
    const auto c = schema.index_of(f.name);
    std::map<std::string_view, std::int32_t> intern;
    std::vector<std::string> dict;
    std::vector<std::int32_t> codes(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (ext.is_missing(i, c)) {
        codes[i] = RetrievalIndex::kMissingCode;
        continue;
      }
      const auto text = ext.text(i, c);
      auto [it, inserted] = intern.emplace(text, static_cast<std::int32_t>(dict.size()));
      if (inserted) dict.emplace_back(text);
      codes[i] = it->second;
    }
    idx.codes_.push_back(std::move(codes));
    idx.dictionaries_.push_back(std::move(dict));
  }

  const std::size_t f = sel.numeric.size();
  idx.raw_.assign(n * f, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < f; ++k) {
    const auto c = schema.index_of(sel.numeric[k].name);
    for (std::size_t i = 0; i < n; ++i) {
      if (!ext.is_missing(i, c)) idx.raw_[i * f + k] = ext.number(i, c);
    }
  }
  idx.z_ = vectorize_pool(ext, sel, stats);
  idx.finish();
  return idx;
}

Candidates categorical_filter(const RetrievalIndex& idx, const FeatureRow& q) {
  const auto& cats = idx.selected().categorical;
  if (q.categorical.size() != cats.size()) throw DataError("query does not match the index's categorical features");
  Candidates out;
  out.all = true;
  if (cats.empty()) return out;

  // Level 1 straight from the posting list.
  const auto first = idx.posting(idx.encode(0, q.categorical[0]));
  if (first.empty()) return out;
  out.all = false;
  out.ids.assign(first.begin(), first.end());
  out.j_star = 1;

  std::vector<std::uint32_t> next;
  for (std::size_t j = 1; j < cats.size(); ++j) {
    const auto want = idx.encode(j, q.categorical[j]);
    next.clear();
    if (want != RetrievalIndex::kUnseenCode) {
      for (auto id : out.ids) {
        if (idx.code(j, id) == want) next.push_back(id);
      }
    }
    if (next.empty()) break;
    out.ids.swap(next);
    out.j_star = j + 1;
  }
  return out;
}

double l2_norm(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  return std::sqrt(ss);
}

double cosine(std::span<const double> a, double norm_a, std::span<const double> b, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (norm_a * norm_b), -1.0, 1.0);
}

RetrievedSet cosine_topn(const RetrievalIndex& idx, const Candidates& candidates,
                         std::span<const double> zq, std::size_t n) {
  if (zq.size() != idx.selected().numeric.size()) {
    throw DataError("query vector has dimension " + std::to_string(zq.size()) + ", index expects " +
                    std::to_string(idx.selected().numeric.size()));
  }
  RetrievedSet rs;
  rs.j_star = candidates.j_star;
  rs.pool_size = candidates.size(idx);
  if (n == 0) return rs;

  const double qnorm = l2_norm(zq);
  // Bounded heap; front() is the worst item kept so far.
  std::vector<RetrievedItem> heap;
  heap.reserve(std::min(n, rs.pool_size) + 1);
  auto consider = [&](std::uint32_t id) {
    RetrievedItem item;
    item.id = id;
    item.zero_norm = idx.norm(id) == 0.0 || qnorm == 0.0;
    item.similarity = cosine(idx.z(id), idx.norm(id), zq, qnorm);
    if (heap.size() < n) {
      heap.push_back(item);
      std::push_heap(heap.begin(), heap.end(), ahead);
    } else if (ahead(item, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), ahead);
      heap.back() = item;
      std::push_heap(heap.begin(), heap.end(), ahead);
    }
  };
  if (candidates.all) {
    for (std::size_t i = 0; i < idx.size(); ++i) consider(static_cast<std::uint32_t>(i));
  } else {
    for (auto id : candidates.ids) consider(id);
  }
  std::sort(heap.begin(), heap.end(), ahead);
  for (auto& item : heap) {
    item.row_id = idx.row_id(item.id);
    item.label = idx.label(item.id);
  }
  rs.items = std::move(heap);
  return rs;
}

RetrievedSet retrieve(const RetrievalIndex& idx, const FeatureRow& q, std::size_t n) {
  const auto candidates = categorical_filter(idx, q);
  const auto zq = z_transform(q, idx.stats());
  return cosine_topn(idx, candidates, zq, n);
}

std::size_t RetrievedSet::positives() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const RetrievedItem& it) { return it.label == 1; }));
}

double RetrievedSet::positive_fraction() const {
  if (items.empty()) return 0.0;
  return static_cast<double>(positives()) / static_cast<double>(items.size());
}

nlohmann::json diagnostics_json(const RetrievedSet& rs) {
  nlohmann::json j;
  j["j_star"] = rs.j_star;
  j["pool_size"] = rs.pool_size;
  auto& ids = j["neighbor_ids"] = nlohmann::json::array();
  auto& sims = j["similarities"] = nlohmann::json::array();
  auto& labels = j["neighbor_labels"] = nlohmann::json::array();
  for (const auto& it : rs.items) {
    ids.push_back(it.row_id);
    sims.push_back(it.similarity);
    labels.push_back(it.label);
  }
  j["positive_fraction"] = rs.positive_fraction();
  return j;
}

}  // namespace finfre
