#pragma once

#include <cstddef>
#include <filesystem>

#include "conther/replay/buffer.hpp"

namespace conther::replay {

// Buffer dump layout, all little-endian:
//   8 bytes  magic "CNTHBUF\0"
//   u8       version (1)
//   u32      context length K
//   u32 x4   obs, goal, achieved-goal, action dimensions
//   u64      capacity
//   u32      episode count
//   per episode: u32 step count, then per step obs, goal, achieved goal,
//   action as float64 arrays of the header dimensions.

void save_buffer(const MainBuffer& buffer, std::size_t context_length, const std::filesystem::path& path);

/// Appends the dumped episodes to `into` and returns the stored K. Throws
/// FormatError on a bad magic, version, or truncated file.
std::size_t load_buffer(const std::filesystem::path& path, MainBuffer& into);

}  // namespace conther::replay
