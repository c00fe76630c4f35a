#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "conther/nets/layers.hpp"

namespace conther::nets {

// Checkpoint layout, little-endian:
//   8 bytes  magic "CNTHCKPT"
//   u8       version (1)
//   u32      record count
//   per record:
//     u32 name length, name bytes (UTF-8, no terminator)
//     u32 ndim, u64 x ndim dims
//     float64 x prod(dims) values, row-major

struct CheckpointRecord {
  std::string name;
  nd::Shape shape;
  std::vector<double> values;
};

void save_checkpoint(const std::filesystem::path& path, const ParamList& params);

/// Throws FormatError on bad magic, version or truncation.
std::vector<CheckpointRecord> load_checkpoint(const std::filesystem::path& path);

/// Copies every record into the parameter of the same name. The record set
/// must match `params` exactly in names and shapes (FormatError otherwise).
void restore_parameters(const ParamList& params, const std::vector<CheckpointRecord>& records);

/// load_checkpoint followed by restore_parameters.
void load_parameters(const std::filesystem::path& path, const ParamList& params);

}  // namespace conther::nets
