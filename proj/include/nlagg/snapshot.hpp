#pragma once

#include "nlagg/grid.hpp"

#include <filesystem>
#include <string>

namespace nlagg {

struct Snapshot {
  Field field;
  double time = 0.0;
  int species = 1;  // 1-based
};

/// Writes <stem>.csv (one line per grid row j, cells i = 0..n-1 in order) and
/// <stem>.json with the grid bounds, n, time and species. Values are printed
/// with 17 significant digits so reading back is bit-exact.
void write_snapshot(const std::filesystem::path& stem, const Snapshot& snap);

/// Reads a snapshot from its JSON sidecar path (the CSV is found next to it).
/// Throws std::runtime_error naming the file on malformed input.
Snapshot read_snapshot(const std::filesystem::path& json_path);

/// "%.17g"
std::string format_double(double v);

}  // namespace nlagg
