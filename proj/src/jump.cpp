#include "nfk/jump.hpp"

#include <algorithm>
#include <cmath>

#include "nfk/parallel.hpp"

namespace nfk {

AliasTable::AliasTable(std::span<const double> weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw DomainError("alias table: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw DomainError("alias table: invalid weight");
        total += w;
    }
    if (!(total > 0.0)) throw DomainError("alias table: all weights zero");

    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<std::uint32_t> small, large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        prob_[i] = weights[i] * double(n) / total;
        (prob_[i] < 1.0 ? small : large).push_back(std::uint32_t(i));
    }
    while (!small.empty() && !large.empty()) {
        std::uint32_t s = small.back();
        std::uint32_t l = large.back();
        small.pop_back();
        alias_[s] = l;
        prob_[l] -= 1.0 - prob_[s];
        if (prob_[l] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
    // Leftovers are numerically 1.
    for (std::uint32_t i : small) prob_[i] = 1.0;
    for (std::uint32_t i : large) prob_[i] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
    double x = rng.uniform01() * double(prob_.size());
    std::size_t idx = std::min(std::size_t(x), prob_.size() - 1);
    double frac = x - double(idx);
    return frac < prob_[idx] ? idx : std::size_t(alias_[idx]);
}

JumpProcessSampler::JumpProcessSampler(const Kernel& j) : grid_(j.grid), mu_(j.mass) {
    if (mu_ < 0.0) throw DomainError("jump sampler: negative kernel mass");
    if (mu_ > 0.0) table_.emplace(j.values);
}

JumpPath JumpProcessSampler::sample(std::size_t start_cell, double horizon,
                                    const SeedSpec& seed) const {
    if (horizon < 0.0) throw DomainError("jump sampler: negative horizon");
    if (start_cell >= grid_.total()) throw DomainError("jump sampler: start cell out of range");
    JumpPath path;
    path.start = start_cell;
    path.horizon = horizon;
    if (!table_ || horizon == 0.0) return path;

    Rng rng(seed);
    auto pos = grid_.unflatten(start_cell);
    double t = 0.0;
    while (true) {
        t += rng.exponential(mu_);
        if (t > horizon) break;
        // The generator moves x to x - z with z drawn from the kernel law.
        auto disp = grid_.unflatten(table_->sample(rng));
        pos = {grid_.wrap(pos[0] - disp[0]), grid_.wrap(pos[1] - disp[1])};
        path.jump_times.push_back(t);
        path.positions.push_back(grid_.flatten(pos));
    }
    return path;
}

JumpPath sample_path(const Kernel& j, std::size_t start_cell, double horizon,
                     const SeedSpec& seed) {
    return JumpProcessSampler(j).sample(start_cell, horizon, seed);
}

std::size_t position_at(const JumpPath& path, double s) {
    if (s < 0.0 || s > path.horizon * (1.0 + 1e-12) + 1e-15)
        throw DomainError("position_at: time outside [0, horizon]");
    auto it = std::upper_bound(path.jump_times.begin(), path.jump_times.end(), s);
    std::size_t idx = std::size_t(it - path.jump_times.begin());
    return idx == 0 ? path.start : path.positions[idx - 1];
}

double path_potential_integral(const JumpPath& path, const FieldSeries& w, double t, double s_lo,
                               double s_hi) {
    if (t < 0.0) t = path.horizon;
    if (s_hi < 0.0) s_hi = t;
    if (t > path.horizon * (1.0 + 1e-12) + 1e-15)
        throw DomainError("path integral: t exceeds path horizon");
    if (s_lo < -1e-15 || s_hi > t * (1.0 + 1e-12) + 1e-15 || s_lo > s_hi)
        throw DomainError("path integral: bad subinterval");
    if (!w.covers(t))
        throw DomainError("path integral: potential series does not cover the horizon");
    if (s_hi == s_lo) return 0.0;

    // Breakpoints: potential grid times and the times where X_{t-s} jumps.
    std::vector<double> cuts;
    cuts.reserve(w.size() + path.jump_times.size() + 2);
    cuts.push_back(s_lo);
    cuts.push_back(s_hi);
    for (std::size_t m = 0; m < w.size(); ++m) {
        double s = w.time(m);
        if (s > s_lo && s < s_hi) cuts.push_back(s);
    }
    for (double tau : path.jump_times) {
        double s = t - tau;
        if (s > s_lo && s < s_hi) cuts.push_back(s);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = cuts[i];
        double b = cuts[i + 1];
        if (b <= a) continue;
        std::size_t cell = position_at(path, t - 0.5 * (a + b));
        acc += 0.5 * (b - a) * (w.value_at(a, cell) + w.value_at(b, cell));
    }
    return acc;
}

PathEnsemble sample_ensemble(const Kernel& j, std::span<const std::size_t> start_cells,
                             int n_paths, double horizon, const SeedSpec& seed) {
    if (n_paths <= 0) throw DomainError("sample_ensemble: n_paths must be positive");
    PathEnsemble ens;
    ens.grid = j.grid;
    ens.horizon = horizon;
    ens.n_paths = n_paths;
    ens.start_cells.assign(start_cells.begin(), start_cells.end());
    ens.base_seed = seed;
    ens.paths.resize(ens.start_cells.size() * std::size_t(n_paths));
    JumpProcessSampler sampler(j);
    parallel_for(ens.start_cells.size(), [&](std::size_t c) {
        for (int k = 0; k < n_paths; ++k) {
            SeedSpec s{seed.master_seed, ens.stream_of(c, k)};
            ens.paths[c * std::size_t(n_paths) + std::size_t(k)] =
                sampler.sample(ens.start_cells[c], horizon, s);
        }
    });
    return ens;
}

void dump_paths_csv(std::ostream& os, const PathEnsemble& ensemble) {
    os << "stream_index,jump_time,cell_index\n";
    os.precision(17);
    for (std::size_t c = 0; c < ensemble.start_cells.size(); ++c) {
        for (int k = 0; k < ensemble.n_paths; ++k) {
            const JumpPath& p = ensemble.path(c, k);
            std::uint64_t stream = ensemble.stream_of(c, k);
            for (std::size_t i = 0; i < p.jump_times.size(); ++i)
                os << stream << ',' << p.jump_times[i] << ',' << p.positions[i] << '\n';
        }
    }
}

}  // namespace nfk
