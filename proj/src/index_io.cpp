// Binary index format, all integers little-endian:
//   "FINFREIX"            8-byte magic
//   u32 version           currently 1
//   u64 meta_length       followed by UTF-8 JSON metadata (selected
//                         features, stats, dictionaries, shape)
//   u64  row_ids[N]
//   u8   labels[N]
//   i32  codes[C][N]
//   f64  raw[N*F]         NaN marks a missing cell
//   f64  z[N*F]
// Norms and posting lists are recomputed on load.

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "finfre/error.hpp"
#include "finfre/retrieval.hpp"

namespace finfre {
namespace {

constexpr char kMagic[8] = {'F', 'I', 'N', 'F', 'R', 'E', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    auto bits = std::bit_cast<U>(value);
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bytes[i] = static_cast<unsigned char>(bits & 0xff);
      if constexpr (sizeof(U) > 1) bits >>= 8;
    }
    out_.write(reinterpret_cast<const char*>(bytes), sizeof(U));
  }

  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    unsigned char bytes[sizeof(U)];
    raw(bytes, sizeof(U));
    U bits = 0;
    for (std::size_t i = sizeof(U); i-- > 0;) {
      if constexpr (sizeof(U) > 1) bits <<= 8;
      bits |= bytes[i];
    }
    return std::bit_cast<T>(bits);
  }

  void raw(void* p, std::size_t n) {
    if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
      throw DataError(name_ + ": truncated index file");
    }
  }

 private:
  std::istream& in_;
  std::string name_;
};

}  // namespace

void save_index(const std::filesystem::path& path, const RetrievalIndex& idx) {
  nlohmann::json meta;
  meta["rows"] = idx.size();
  meta["selected"] = idx.selected_;
  auto& stats = meta["stats"] = nlohmann::json::array();
  for (const auto& f : idx.stats_.features) stats.push_back({{"name", f.name}, {"mean", f.mean}, {"std", f.std}});
  meta["dictionaries"] = idx.dictionaries_;
  const std::string meta_text = meta.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  Writer w(out);
  w.raw(kMagic, sizeof(kMagic));
  w.put(kVersion);
  w.put(static_cast<std::uint64_t>(meta_text.size()));
  w.raw(meta_text.data(), meta_text.size());
  for (auto id : idx.row_ids_) w.put(id);
  for (auto y : idx.labels_) w.put(y);
  for (const auto& col : idx.codes_) {
    for (auto c : col) w.put(c);
  }
  for (double v : idx.raw_) w.put(v);
  for (double v : idx.z_.data) w.put(v);
  if (!out) throw DataError("write failed for " + path.string());
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  Reader r(in, path.string());

  char magic[sizeof(kMagic)];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path.string() + ": not a finfre index");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported index version " + std::to_string(version));
  }
  const auto meta_len = r.get<std::uint64_t>();
  std::string meta_text(meta_len, '\0');
  r.raw(meta_text.data(), meta_text.size());

  RetrievalIndex idx;
  std::size_t n = 0;
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    n = meta.at("rows").get<std::size_t>();
    idx.selected_ = meta.at("selected").get<SelectedFeatures>();
    for (const auto& f : meta.at("stats")) {
      idx.stats_.features.push_back({f.at("name").get<std::string>(), f.at("mean").get<double>(),
                                     f.at("std").get<double>()});
    }
    idx.dictionaries_ = meta.at("dictionaries").get<std::vector<std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad index metadata: " + e.what());
  }
  const std::size_t cats = idx.selected_.categorical.size();
  const std::size_t f = idx.selected_.numeric.size();
  if (idx.dictionaries_.size() != cats || idx.stats_.features.size() != f) {
    throw DataError(path.string() + ": index metadata is inconsistent");
  }

  idx.row_ids_.resize(n);
  for (auto& id : idx.row_ids_) id = r.get<std::uint64_t>();
  idx.labels_.resize(n);
  for (auto& y : idx.labels_) y = r.get<std::uint8_t>();
  idx.codes_.assign(cats, std::vector<std::int32_t>(n));
  for (auto& col : idx.codes_) {
    for (auto& c : col) c = r.get<std::int32_t>();
  }
  idx.raw_.resize(n * f);
  for (auto& v : idx.raw_) v = r.get<double>();
  idx.z_.rows = n;
  idx.z_.cols = f;
  idx.z_.data.resize(n * f);
  for (auto& v : idx.z_.data) v = r.get<double>();
  idx.finish();
  return idx;
}

}  // namespace finfre
