#include "conther/replay/dump.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "conther/error.hpp"

namespace conther::replay {

namespace {

static_assert(std::endian::native == std::endian::little, "dump encoding assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'C', 'N', 'T', 'H', 'B', 'U', 'F', '\0'};
constexpr std::uint8_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("buffer dump is truncated");
  return v;
}

void put_values(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_values(std::ifstream& in, std::size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError("buffer dump is truncated");
  return v;
}

}  // namespace

void save_buffer(const MainBuffer& buffer, std::size_t context_length, const std::filesystem::path& path) {
  std::lock_guard lock(buffer.mutex());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const RecordDims d = buffer.dims().value_or(RecordDims{});
  out.write(kMagic.data(), kMagic.size());
  put<std::uint8_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(context_length));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.obs));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.goal));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.achieved_goal));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.action));
  put<std::uint64_t>(out, buffer.capacity());
  const std::size_t count = buffer.episode_count();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(count));
  for (std::size_t e = 0; e < count; ++e) {
    const Episode& ep = buffer.episode(e);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ep.size()));
    for (const StepRecord& s : ep) {
      put_values(out, s.obs);
      put_values(out, s.goal);
      put_values(out, s.achieved_goal);
      put_values(out, s.action);
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::size_t load_buffer(const std::filesystem::path& path, MainBuffer& into) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError(path.string() + " is not a buffer dump");
  const auto version = get<std::uint8_t>(in);
  if (version != kVersion) throw FormatError("unsupported buffer dump version " + std::to_string(version));
  const auto k = get<std::uint32_t>(in);
  RecordDims d;
  d.obs = get<std::uint32_t>(in);
  d.goal = get<std::uint32_t>(in);
  d.achieved_goal = get<std::uint32_t>(in);
  d.action = get<std::uint32_t>(in);
  get<std::uint64_t>(in);  // capacity of the dumped buffer; the target keeps its own
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto steps = get<std::uint32_t>(in);
    Episode ep(steps);
    for (StepRecord& s : ep) {
      s.obs = get_values(in, d.obs);
      s.goal = get_values(in, d.goal);
      s.achieved_goal = get_values(in, d.achieved_goal);
      s.action = get_values(in, d.action);
    }
    into.store_episode(std::move(ep));
  }
  return k;
}

}  // namespace conther::replay
