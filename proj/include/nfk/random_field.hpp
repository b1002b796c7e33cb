#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nfk/grid.hpp"
#include "nfk/kernels.hpp"
#include "nfk/seed.hpp"
#include "nfk/spectral.hpp"

namespace nfk {

// Target spectral density Bhat(lambda) = amplitude / |lambda|^alpha, with the
// mode-0 atom handled by a configurable regularization and optional band cuts.
struct SpectrumProfile {
    double alpha = 0.5;
    double amplitude = 1.0;
    enum class ZeroMode { nearest, zero, value };
    ZeroMode zero_mode = ZeroMode::nearest;
    double zero_value = 0.0;  // variance of the mode-0 component when ZeroMode::value
    double cutoff_high = std::numeric_limits<double>::infinity();
    double cutoff_low = 0.0;
};

// Discrete spectral weights S_k = Bhat(lambda_k) / L^d on the full mode
// lattice (flattened like the physical layout). sum(S_k) is the field variance.
class SpectrumWeights {
  public:
    SpectrumWeights(Grid grid, std::vector<double> full);

    const Grid& grid() const { return grid_; }
    double at(std::size_t full_mode) const { return full_[full_mode]; }
    const std::vector<double>& full() const { return full_; }
    double total() const;
    double zero_mode() const { return full_[0]; }

    // Same weights rearranged to the half-spectrum layout of a Spectral engine.
    std::vector<double> half_layout(const Spectral& eng) const;

    // |lambda| of a full-layout mode.
    double mode_magnitude(std::size_t full_mode) const;

  private:
    Grid grid_;
    std::vector<double> full_;
};

SpectrumWeights make_weights(const SpectrumProfile& profile, const Grid& grid);

// Gaussian homogeneous field with covariance B(x) = sum_k S_k e^{i lambda_k x}:
// white noise shaped in Fourier space, so the Hermitian pairing is automatic.
Field sample_field(const SpectrumWeights& weights, const Spectral& eng, const SeedSpec& seed);

// Lattice evaluation of E k_{1,t}^2 = theta^2 sum_k S_k e^{2 t (Re Jhat_theta(lambda_k) - kappa+)}.
// Requires J_theta pointwise non-negative (so the e^{-2 beta t} prefactor of the
// continuum computation applies).
double second_moment_spectral(const SpectrumWeights& weights, const SignedKernel& j_theta,
                              const ModelParams& params, double t);

struct McMoment {
    double estimate = 0.0;
    double stderr_mean = 0.0;
    int n_samples = 0;
};

// Monte Carlo counterpart: sample xi, evolve the linearized mode spectrally,
// square at one point (homogeneity makes the point irrelevant), average.
McMoment mc_second_moment(const SpectrumWeights& weights, const SignedKernel& j_theta,
                          const ModelParams& params, double t, int n_samples,
                          const SeedSpec& seed);

// Small-frequency model of the normalized jump symbol:
// Jhat(lambda)/m = 1 - b |lambda|^beta_spec + o(|lambda|^beta_spec).
struct JumpSymbolProfile {
    double b = 0.0;
    double beta_spec = 2.0;
};

struct ExponentFitReport {
    enum class Status { ok, inconclusive, exponential_branch };
    Status status = Status::inconclusive;
    double fitted_exponent = 0.0;
    double target_exponent = 0.0;
    double tolerance = 0.0;
    bool exponent_ok = false;

    // Constructive split-bound data (d = 1): values(t) - atom <=
    // d1 * t^target + edge_term(t) + d2 * exp(-2 delta t).
    bool raw_bound_ok = false;
    double d1 = 0.0;
    double d2 = 0.0;
    double delta = 0.0;       // spectral gap rate of the high-|lambda| part
    double split_radius = 0.0;
    double zero_mode_floor = 0.0;  // excluded atom contribution, reported separately
    std::string note;
};

// Fits the exponent rho in e^{2 beta t} E k^2 / theta^2 ~ D t^rho on
// [fit_lo, fit_hi] and checks |rho - (alpha - d)/beta_spec| <= tol, plus the
// constructive two-term bound derived from the grid symbol.
ExponentFitReport decay_exponent_fit(std::span<const double> times,
                                     std::span<const double> values, const ModelParams& params,
                                     const SpectrumWeights& weights, const SignedKernel& j_theta,
                                     const SpectrumProfile& profile,
                                     const JumpSymbolProfile& symbol, double fit_lo,
                                     double fit_hi, double tol);

}  // namespace nfk
