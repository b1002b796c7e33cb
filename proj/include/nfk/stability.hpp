#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nfk/errors.hpp"

namespace nfk {

using RateFn = std::function<double(double, double)>;

// Block recursion c_n = c_{n-1} e^{-T p(c_{n-1}, d_{n-1})}, d_n alike, together
// with the cross-bounds c_k e^{-T(n-k)p_k} <= c_n and d_k e^{-T(n-k)p_k} >= d_n.
struct DecayEnvelope {
    std::vector<double> c_seq;   // length n_blocks + 1, c_seq[0] = c0
    std::vector<double> d_seq;
    std::vector<double> rates;   // p(c_k, d_k) per block start
    double block_length = 0.0;
    double limit_rate = 0.0;     // p at the last visited block
    double rate_at_zero = 0.0;   // p(0, 0)
    bool cross_bounds_ok = false;
    double cross_worst = 0.0;    // most negative slack over all (k, n) pairs

    // Envelope value at time t in [0, n_blocks * T]: lower (c side) and upper
    // (d side) interpolants of the per-block exponentials.
    double lower_at(double t) const;
    double upper_at(double t) const;
};

DecayEnvelope decay_envelope(double c0, double d0, const RateFn& p, double block_length,
                             int n_blocks);

struct DecayFit {
    double slope = 0.0;
    double slope_ci = 0.0;   // 95% half-width
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t n_used = 0;
    bool stationary = false;  // all norms at the double-precision floor
};

// Least-squares fit of ln ||u_t - theta|| against t on [window_lo, window_hi];
// norms below 1e-14 are dropped from the window.
DecayFit logistic_decay_rate(std::span<const double> times, std::span<const double> sup_dev,
                             double window_lo, double window_hi);

// C_1 = 1, C_n = 1 + (beta/gamma) sum_{l=1}^{n-1} C(n,l) C_l C_{n-l}.
// Returns C_0..C_{n_max} with C_0 = 0. Requires gamma > 0 and n_max <= 30.
std::vector<double> cn_coefficients(double beta, double gamma, int n_max);

// H(x) = gamma/(2 beta) - sqrt(gamma^2/(4 beta^2) - (e^x - 1) gamma/beta),
// defined for x < ln(gamma/(4 beta) + 1); satisfies H = e^x - 1 + (beta/gamma) H^2
// and has Taylor coefficients C_n / n!.
double generating_function(double x, double beta, double gamma);
double generating_function_radius(double beta, double gamma);

// Taylor coefficients of the closed form via binomial-series composition,
// independent of the C_n recursion; used as its cross-check.
std::vector<double> generating_function_taylor(double beta, double gamma, int n_max);

struct BoundReport {
    bool pass = false;
    double worst_excess = 0.0;  // max over times of observed - bound (.le. 0 on pass)
    double t_worst = 0.0;
    std::size_t n_checked = 0;
};

// ||u_t - theta|| <= theta e^{-gamma t} H(|lambda| ||xi||) + tol at every
// sampled time.
BoundReport taylor_bound_check(std::span<const double> times, std::span<const double> sup_dev,
                               double theta, double gamma, double beta, double lambda_xi_norm,
                               double tol);

// ||k_{1,t}|| <= theta ||xi|| e^{-gamma t} + tol at every sampled time.
BoundReport k1_decay_check(std::span<const double> times, std::span<const double> k1_sup,
                           double theta, double xi_sup, double gamma, double tol);

}  // namespace nfk
