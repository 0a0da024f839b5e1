#pragma once

// SamplePath file formats.
//
// CSV: header "t,x1,...,xp" optionally followed by ",f1,...,fk,e1,...,ep" when
// latent paths are present; one row per grid point, values printed with
// "%.17g" so doubles round-trip. On import h = t_n / n and the grid must be
// uniform to 1e-9 relative.
//
// Binary (all little-endian):
//   offset 0   8 bytes  magic "FSDPATH1"
//   offset 8   u64      rows  (n + 1)
//   offset 16  u64      p
//   offset 24  u64      k     (0 when no latent paths are stored)
//   offset 32  f64      h
//   offset 40  f64[rows * cols] row-major, cols = 1 + p (+ k + p), same
//              column order as the CSV (t first).

#include <filesystem>
#include <iosfwd>

#include "factorsde/sde_sim.hpp"

namespace factorsde {

void write_path_csv(const SamplePath& path, std::ostream& out);
SamplePath read_path_csv(std::istream& in);

void write_path_binary(const SamplePath& path, std::ostream& out);
SamplePath read_path_binary(std::istream& in);

/// Dispatches on extension: ".bin" is binary, everything else CSV.
void save_path(const SamplePath& path, const std::filesystem::path& file);
SamplePath load_path(const std::filesystem::path& file);

}  // namespace factorsde
