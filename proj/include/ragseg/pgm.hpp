#pragma once

#include <filesystem>

#include "ragseg/map2d.hpp"

namespace ragseg {

/// Reads a binary (P5) 8-bit PGM; values are scaled to [0, 1] by maxval.
Map2d read_pgm(const std::filesystem::path& path);

/// Writes a P5 PGM with maxval 255: each value is clamped to [0, 1], scaled
/// by 255 and rounded half up.
void write_pgm(const std::filesystem::path& path, const Map2d& map);

}  // namespace ragseg
