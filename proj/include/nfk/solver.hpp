#pragma once

#include <cstdint>
#include <vector>

#include "nfk/grid.hpp"
#include "nfk/kernels.hpp"

namespace nfk {

struct SolveOptions {
    double horizon = 1.0;
    double dt = 0.01;
    int store_every = 1;  // frame cadence; must divide the step count
};

struct SolveResult {
    FieldSeries series;               // stored frames, spacing dt * store_every
    std::vector<double> norm_times;   // dense, every step
    std::vector<double> sup_dev;      // ||u_t - reference||_inf, dense
    std::vector<double> mean_value;   // mean(u_t), dense
    std::vector<double> min_value;    // min u_t, dense
    std::vector<double> max_value;    // max u_t, dense
    double reference = 0.0;
    double dt_used = 0.0;
    int refinements = 0;              // dt halvings triggered by positivity loss
};

// Exponential integrator for du/dt = L_J u + W(x,t) u: Strang step with the
// exact spectral flow in the middle and pointwise exp(W dt/2) half-steps.
// Global accuracy O(dt^2).
SolveResult solve_perturbed(const Field& u0, const FieldSeries& w, const Kernel& j,
                            const SolveOptions& opts);

// Splitting scheme for du/dt = kappa+ L_{a+} u + (kappa+ - m) u - kappa- u (a-*u):
// midpoint half-steps for the reaction, exact spectral flow for the dispersal.
// Preserves u == 0 and u == theta exactly on the grid. Negative values beyond
// -1e-10 trigger a dt refinement (up to 3 halvings).
SolveResult solve_logistic(const Field& u0, const ModelParams& params, const Kernel& a_plus,
                           const Kernel& a_minus, const SolveOptions& opts);

// Spatially constant solution q_t = theta / (1 + e^{-beta t} (theta/q0 - 1)).
double logistic_closed_form(double q0, const ModelParams& params, double t);

struct ComparisonReport {
    bool pass = false;
    bool assumption_ok = false;
    double worst_margin = 0.0;  // min over stored (x,t) of u - (q_t - tol)
    double t_worst = 0.0;
    std::size_t x_worst = 0;
};

// Checks u_t(x) >= q_t - tol on all stored frames, under the kernel-domination
// hypothesis with kappa = q0.
ComparisonReport comparison_check(const SolveResult& u, const ModelParams& params,
                                  const Kernel& a_plus, const Kernel& a_minus, double q0,
                                  double tol);

struct TaylorOptions {
    int n_max = 4;
    double horizon = 1.0;
    double dt = 0.01;
    int store_every = 1;
};

struct TaylorResult {
    std::vector<FieldSeries> coeff;            // k_0 .. k_{n_max}, stored frames
    std::vector<double> norm_times;            // dense
    std::vector<std::vector<double>> sup_norm; // per order, dense ||k_n||_inf
    double theta = 0.0;
    double gamma = 0.0;  // kappa+ - integral(J_theta) realized by the spectral step
};

// Coefficient hierarchy for initial data theta e^{lambda xi}: k_0 == theta and
//   dk_n/dt = J_theta * k_n - kappa+ k_n - kappa- sum_{l=1}^{n-1} C(n,l) k_l (a-*k_{n-l}),
// k_{n,0} = theta xi^n. Lower orders enter as known sources; each order uses
// the exact spectral flow of its linear part plus trapezoidal source handling.
TaylorResult solve_taylor_hierarchy(const Field& xi, const ModelParams& params,
                                    const Kernel& a_plus, const Kernel& a_minus,
                                    const TaylorOptions& opts);

// Row n of Pascal's triangle in exact integer arithmetic (n <= 30 supported
// everywhere this is used; larger n up to 62 stays exact in 64 bits).
std::vector<std::uint64_t> binomial_row(int n);

}  // namespace nfk
