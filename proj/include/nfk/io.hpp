#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "nfk/grid.hpp"

namespace nfk {

// Flat lattice-array format shared by fields and kernels:
//   magic "NFKF", u32 version, i32 d, i64 N, f64 L, then N^d f64 row-major,
//   little-endian throughout. The binary round-trip is bit-exact.
void write_lattice_binary(const std::filesystem::path& path, const Grid& grid,
                          std::span<const double> values);

struct LatticeData {
    Grid grid;
    std::vector<double> values;
};

LatticeData read_lattice_binary(const std::filesystem::path& path);

// CSV layout: one header row "d,L,N", one data row, then one value per line.
void write_lattice_csv(const std::filesystem::path& path, const Grid& grid,
                       std::span<const double> values);

void write_norms_csv(const std::filesystem::path& path, std::span<const double> times,
                     std::span<const double> sup_norms, std::span<const double> means);

}  // namespace nfk
