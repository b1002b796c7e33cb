#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "nfk/grid.hpp"
#include "nfk/kernels.hpp"
#include "nfk/seed.hpp"

namespace nfk {

// One piecewise-constant right-continuous trajectory of the jump process.
// The value on [jump_times[i], jump_times[i+1]) is positions[i].
struct JumpPath {
    std::size_t start = 0;
    double horizon = 0.0;
    std::vector<double> jump_times;       // strictly increasing, in (0, horizon]
    std::vector<std::size_t> positions;   // cell index after each jump

    bool operator==(const JumpPath&) const = default;
};

// Walker alias table over non-negative weights: O(n) build, O(1) draw.
class AliasTable {
  public:
    explicit AliasTable(std::span<const double> weights);
    std::size_t size() const { return prob_.size(); }
    std::size_t sample(Rng& rng) const;

  private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

// Kernel-bound path sampler. Waiting times are Exponential(mass); jump
// displacements follow the discrete law values/sum(values) via the alias
// table, with positions wrapped periodically. A kernel of zero mass yields
// jump-free paths.
class JumpProcessSampler {
  public:
    explicit JumpProcessSampler(const Kernel& j);

    double rate() const { return mu_; }
    const Grid& grid() const { return grid_; }

    JumpPath sample(std::size_t start_cell, double horizon, const SeedSpec& seed) const;

  private:
    Grid grid_;
    double mu_ = 0.0;
    std::optional<AliasTable> table_;  // unset when mu == 0
};

JumpPath sample_path(const Kernel& j, std::size_t start_cell, double horizon,
                     const SeedSpec& seed);

// X_s, right-continuous lookup; throws DomainError outside [0, horizon].
std::size_t position_at(const JumpPath& path, double s);

// Quadrature of int_{s_lo}^{s_hi} W(X_{t-s}, s) ds. Exact in space between
// jumps; trapezoidal in time on the W grid refined by the path's jump times.
// t defaults to the path horizon and must not exceed it.
double path_potential_integral(const JumpPath& path, const FieldSeries& w, double t = -1.0,
                               double s_lo = 0.0, double s_hi = -1.0);

// Frozen common-random-number ensemble: n_paths paths per start cell, one
// seed stream per path in a fixed layout.
struct PathEnsemble {
    Grid grid;
    double horizon = 0.0;
    int n_paths = 0;
    std::vector<std::size_t> start_cells;
    std::vector<JumpPath> paths;  // start_cells.size() * n_paths, path-major per cell
    SeedSpec base_seed;

    const JumpPath& path(std::size_t cell_slot, int k) const {
        return paths[cell_slot * std::size_t(n_paths) + std::size_t(k)];
    }
    std::uint64_t stream_of(std::size_t cell_slot, int k) const {
        return base_seed.stream_index + cell_slot * std::uint64_t(n_paths) + std::uint64_t(k);
    }
};

PathEnsemble sample_ensemble(const Kernel& j, std::span<const std::size_t> start_cells,
                             int n_paths, double horizon, const SeedSpec& seed);

// Debug dump, columns: stream_index, jump_time, cell_index.
void dump_paths_csv(std::ostream& os, const PathEnsemble& ensemble);

}  // namespace nfk
