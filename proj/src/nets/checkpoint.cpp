#include "conther/nets/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <unordered_map>

#include "conther/error.hpp"

namespace conther::nets {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'C', 'N', 'T', 'H', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kVersion = 1;
// Guards against allocating garbage sizes from a corrupt file.
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 32;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint is truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint8_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, d);
    const auto data = p.tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<CheckpointRecord> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError(path.string() + " is not a checkpoint");
  const auto version = get<std::uint8_t>(in);
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);
  std::vector<CheckpointRecord> records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    CheckpointRecord rec;
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw FormatError("checkpoint record name too long");
    rec.name.resize(name_len);
    in.read(rec.name.data(), name_len);
    const auto ndim = get<std::uint32_t>(in);
    if (ndim == 0 || ndim > 8) throw FormatError("checkpoint record '" + rec.name + "' has bad rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto dim = get<std::uint64_t>(in);
      if (dim == 0 || dim > kMaxValues || n * dim > kMaxValues) {
        throw FormatError("checkpoint record '" + rec.name + "' has bad dimensions");
      }
      n *= dim;
      rec.shape.push_back(static_cast<std::size_t>(dim));
    }
    rec.values.resize(n);
    in.read(reinterpret_cast<char*>(rec.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw FormatError("checkpoint is truncated");
    records.push_back(std::move(rec));
  }
  return records;
}

void restore_parameters(const ParamList& params, const std::vector<CheckpointRecord>& records) {
  if (records.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(records.size()) + " records, network expects " +
                      std::to_string(params.size()));
  }
  std::unordered_map<std::string, const CheckpointRecord*> by_name;
  for (const auto& r : records) by_name[r.name] = &r;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    const CheckpointRecord& r = *it->second;
    if (r.shape != p.tensor.shape()) {
      throw FormatError("checkpoint parameter '" + p.name + "' has shape " + nd::shape_string(r.shape) +
                        ", network expects " + nd::shape_string(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    auto dst = t.mutable_data();
    std::copy(r.values.begin(), r.values.end(), dst.begin());
  }
}

void load_parameters(const std::filesystem::path& path, const ParamList& params) {
  restore_parameters(params, load_checkpoint(path));
}

}  // namespace conther::nets
