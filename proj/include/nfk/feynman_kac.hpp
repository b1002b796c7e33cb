#pragma once

#include <functional>
#include <vector>

#include "nfk/grid.hpp"
#include "nfk/jump.hpp"
#include "nfk/kernels.hpp"
#include "nfk/seed.hpp"

namespace nfk {

// Monte Carlo estimate of E^x[ u0(X_t) exp( int_0^t W(X_{t-s}, s) ds ) ] at a
// set of start cells.
struct PointEstimate {
    std::vector<std::size_t> points;
    std::vector<double> mean;
    std::vector<double> stderr_mean;
    int n_paths = 0;
    SeedSpec seed;
};

PointEstimate fk_linear_estimate(const Field& u0, const FieldSeries& w, const Kernel& j, double t,
                                 int n_paths, const SeedSpec& seed,
                                 std::span<const std::size_t> eval_points);

// Same estimator on a frozen ensemble (common random numbers); t may be any
// time <= ensemble horizon.
PointEstimate fk_linear_from_ensemble(const Field& u0, const FieldSeries& w,
                                      const PathEnsemble& ensemble, double t);

// Partial sum of the Duhamel series sum_{j<=n_terms} Q^j (e^{tL} u0), where
// (Qf)(t) = int_0^t e^{(t-s)L}(W_s f_s) ds is applied spectrally with
// trapezoidal time quadrature of step dt. remainder_bound estimates the
// dropped tail as t^{n+1}/(n+1)! * ||W||^{n+1} * ||u||.
struct DuhamelResult {
    Field partial_sum;       // at the final time t
    double remainder_bound = 0.0;
    double series_sup = 0.0; // sup over the time grid of the partial-sum series
};

DuhamelResult duhamel_series(const Field& u0, const FieldSeries& w, const Kernel& j, double t,
                             int n_terms, double dt);

// Picard iteration of the self-consistent Feynman-Kac map
//   (Psi w)(x,t) = E^x[ g0(X_t) exp( int_0^t V(w_{t-s})(X_s) ds ) ]
// on frozen path ensembles. The horizon is subdivided into contraction blocks
// of length <= 1/(2 d M) with d the sup bound of the running initial value
// and M the supplied Lipschitz constant.
struct FixedPointOptions {
    double horizon = 1.0;
    double dt = 0.1;
    int n_paths = 400;
    SeedSpec seed;
    int max_iter = 30;
    double tol = 1e-3;
    double lipschitz = 1.0;  // M_c for the local Lipschitz bound of V
};

struct FixedPointResult {
    FieldSeries w;                        // fixed point on [0, horizon]
    std::vector<double> stderr_sup;       // per frame, sup over cells
    std::vector<double> update_history;   // sup-norm change per Picard sweep
    double final_residual = 0.0;          // change from one extra Psi sweep
    int iterations = 0;
    int segments = 0;
};

FixedPointResult fk_nonlinear_fixed_point(const Field& g0,
                                          const std::function<Field(const Field&)>& potential,
                                          const Kernel& j, const FixedPointOptions& opts);

// Cross-check of the representation
//   u(x,t) = theta + E^x[ (u0(X_t) - theta) exp( -kappa- int_0^t (a-*u_{t-s})(X_s) ds ) ]
// against a solver series u. Requires J_theta pointwise non-negative.
struct LogisticIdentityReport {
    std::vector<std::size_t> points;
    std::vector<double> lhs;
    std::vector<double> rhs_mean;
    std::vector<double> rhs_stderr;
    double max_residual = 0.0;
    double max_stderr = 0.0;
};

LogisticIdentityReport fk_logistic_identity_check(const FieldSeries& u, const Field& u0,
                                                  const ModelParams& params,
                                                  const SignedKernel& j_theta,
                                                  const Kernel& a_minus, double t, int n_paths,
                                                  const SeedSpec& seed,
                                                  std::span<const std::size_t> eval_points);

}  // namespace nfk
