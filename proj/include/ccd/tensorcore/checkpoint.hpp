#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ccd/tensorcore/graph.hpp"

namespace ccd::tc {

/// Named tensor table.
///
/// Binary layout (all integers and reals little-endian):
///   8 bytes   magic "CCDCKPT\0"
///   u32       format version (kCheckpointVersion)
///   u32       tensor count
///   per tensor, in name order:
///     u32 name length, name bytes (UTF-8)
///     u32 rank, u64 extent per dimension
///     f64 values, row-major
using TensorTable = std::map<std::string, Tensor>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const TensorTable& table);
TensorTable read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const TensorTable& table);
TensorTable load_checkpoint(const std::filesystem::path& path);

/// Snapshot of parameter values keyed by name (optionally prefixed).
TensorTable snapshot(const std::vector<Parameter*>& params, const std::string& prefix = "");
/// Copies values back by name; every parameter must be present with a matching shape.
void restore(const std::vector<Parameter*>& params, const TensorTable& table, const std::string& prefix = "");

}  // namespace ccd::tc
