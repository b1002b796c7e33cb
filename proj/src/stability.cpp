#include "nfk/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nfk/solver.hpp"
#include "nfk/stats.hpp"

namespace nfk {

double DecayEnvelope::lower_at(double t) const {
    if (t < 0.0) throw DomainError("decay envelope: negative time");
    std::size_t blocks = c_seq.size() - 1;
    std::size_t n = std::min(std::size_t(t / block_length), blocks - 1);
    return c_seq[n] * std::exp(-(t - double(n) * block_length) * rates[n]);
}

double DecayEnvelope::upper_at(double t) const {
    if (t < 0.0) throw DomainError("decay envelope: negative time");
    std::size_t blocks = d_seq.size() - 1;
    std::size_t n = std::min(std::size_t(t / block_length), blocks - 1);
    return d_seq[n] * std::exp(-(t - double(n) * block_length) * rates[n]);
}

DecayEnvelope decay_envelope(double c0, double d0, const RateFn& p, double block_length,
                             int n_blocks) {
    if (c0 > 0.0 || d0 < 0.0) throw DomainError("decay envelope: need c0 <= 0 <= d0");
    if (!(block_length > 0.0) || n_blocks < 1)
        throw DomainError("decay envelope: bad block parameters");

    DecayEnvelope env;
    env.block_length = block_length;
    env.c_seq.push_back(c0);
    env.d_seq.push_back(d0);
    env.rate_at_zero = p(0.0, 0.0);

    for (int n = 0; n < n_blocks; ++n) {
        double c = env.c_seq.back();
        double d = env.d_seq.back();
        double rate = p(c, d);
        if (!(rate >= 0.0)) throw DomainError("decay envelope: rate function must be non-negative");
        if (!env.rates.empty() && rate < env.rates.back() * (1.0 - 1e-12) - 1e-300) {
            std::ostringstream msg;
            msg << "decay envelope: rate function is not monotone along the visited points "
                << "(p fell from " << env.rates.back() << " to " << rate << " at block " << n << ")";
            throw DomainError(msg.str());
        }
        env.rates.push_back(rate);
        double factor = std::exp(-block_length * rate);
        env.c_seq.push_back(c * factor);
        env.d_seq.push_back(d * factor);
    }
    env.rates.push_back(p(env.c_seq.back(), env.d_seq.back()));
    env.limit_rate = env.rates.back();

    // Cross-bounds, checked on the computed doubles with ulp-scale slack.
    env.cross_bounds_ok = true;
    env.cross_worst = 0.0;
    double scale = std::max(std::abs(c0), d0);
    for (std::size_t k = 0; k + 1 < env.c_seq.size(); ++k) {
        for (std::size_t n = k; n < env.c_seq.size(); ++n) {
            double decay = std::exp(-block_length * double(n - k) * env.rates[k]);
            double c_slack = env.c_seq[n] - env.c_seq[k] * decay;   // >= 0 expected
            double d_slack = env.d_seq[k] * decay - env.d_seq[n];   // >= 0 expected
            double slack = std::min(c_slack, d_slack);
            env.cross_worst = std::min(env.cross_worst, slack);
            if (slack < -1e-12 * scale) env.cross_bounds_ok = false;
        }
    }
    return env;
}

DecayFit logistic_decay_rate(std::span<const double> times, std::span<const double> sup_dev,
                             double window_lo, double window_hi) {
    if (times.size() != sup_dev.size()) throw DomainError("decay rate: length mismatch");
    DecayFit fit;
    fit.window_lo = window_lo;
    fit.window_hi = window_hi;
    std::vector<double> ts, ys;
    bool any_in_window = false;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window_lo || times[i] > window_hi) continue;
        any_in_window = true;
        if (sup_dev[i] < 1e-14) continue;  // double-precision floor
        ts.push_back(times[i]);
        ys.push_back(std::log(sup_dev[i]));
    }
    if (ts.size() < 3) {
        if (any_in_window) {
            fit.stationary = true;
            return fit;
        }
        throw DomainError("decay rate: window contains no samples");
    }
    LinearFit lf = least_squares(ts, ys);
    fit.slope = lf.slope;
    fit.slope_ci = 1.96 * lf.slope_stderr;
    fit.n_used = lf.n;
    return fit;
}

std::vector<double> cn_coefficients(double beta, double gamma, int n_max) {
    if (!(gamma > 0.0)) throw DomainError("cn_coefficients: gamma must be positive");
    if (!(beta > 0.0)) throw DomainError("cn_coefficients: beta must be positive");
    if (n_max < 1 || n_max > 30)
        throw DomainError("cn_coefficients: n_max must lie in [1, 30] (exact binomials)");
    std::vector<double> c(std::size_t(n_max) + 1, 0.0);
    c[0] = 0.0;
    if (n_max >= 1) c[1] = 1.0;
    for (int n = 2; n <= n_max; ++n) {
        auto binom = binomial_row(n);
        double acc = 0.0;
        for (int l = 1; l <= n - 1; ++l)
            acc += double(binom[std::size_t(l)]) * c[std::size_t(l)] * c[std::size_t(n - l)];
        c[std::size_t(n)] = 1.0 + beta / gamma * acc;
    }
    return c;
}

double generating_function_radius(double beta, double gamma) {
    if (!(gamma > 0.0) || !(beta > 0.0))
        throw DomainError("generating function: beta and gamma must be positive");
    return std::log1p(gamma / (4.0 * beta));
}

double generating_function(double x, double beta, double gamma) {
    double radius = generating_function_radius(beta, gamma);
    if (!(x < radius)) {
        std::ostringstream msg;
        msg << "generating function: x = " << x << " is at or above the radius ln(gamma/(4 beta)+1) = "
            << radius;
        throw DomainError(msg.str());
    }
    double r = gamma / (2.0 * beta);
    double disc = r * r - std::expm1(x) * gamma / beta;
    return r - std::sqrt(std::max(disc, 0.0));
}

std::vector<double> generating_function_taylor(double beta, double gamma, int n_max) {
    if (n_max < 1 || n_max > 60) throw DomainError("generating function taylor: bad n_max");
    double r = gamma / (4.0 * beta);  // H = 2 r (1 - sqrt(1 - z)), z = (e^x - 1)/r
    const std::size_t len = std::size_t(n_max) + 1;

    // Taylor coefficients of z(x) = (e^x - 1)/r.
    std::vector<double> z(len, 0.0);
    double fact = 1.0;
    for (int n = 1; n <= n_max; ++n) {
        fact *= double(n);
        z[std::size_t(n)] = 1.0 / (r * fact);
    }

    // Compose sqrt(1 - z) = sum_m binom(1/2, m) (-z)^m by Cauchy products;
    // (-z)^m starts at order m, so m <= n_max suffices.
    std::vector<double> out(len, 0.0);
    out[0] = 1.0;
    std::vector<double> zpow(len, 0.0);
    zpow[0] = 1.0;
    double coef = 1.0;  // binom(1/2, m) accumulated iteratively
    for (int m = 1; m <= n_max; ++m) {
        coef *= (0.5 - double(m - 1)) / double(m);
        std::vector<double> next(len, 0.0);
        for (std::size_t a = 0; a < len; ++a) {
            if (zpow[a] == 0.0) continue;
            for (std::size_t b = 1; a + b < len; ++b) next[a + b] += zpow[a] * (-z[b]);
        }
        zpow = std::move(next);
        for (std::size_t i = 0; i < len; ++i) out[i] += coef * zpow[i];
    }

    // H = 2 r (1 - sqrt(1 - z)).
    std::vector<double> h(len, 0.0);
    for (std::size_t i = 1; i < len; ++i) h[i] = -2.0 * r * out[i];
    return h;
}

BoundReport taylor_bound_check(std::span<const double> times, std::span<const double> sup_dev,
                               double theta, double gamma, double beta, double lambda_xi_norm,
                               double tol) {
    if (times.size() != sup_dev.size()) throw DomainError("taylor bound: length mismatch");
    if (lambda_xi_norm < 0.0) throw DomainError("taylor bound: negative argument");
    double h = lambda_xi_norm == 0.0 ? 0.0 : generating_function(lambda_xi_norm, beta, gamma);
    BoundReport rep;
    rep.worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < times.size(); ++i) {
        double bound = theta * std::exp(-gamma * times[i]) * h + tol;
        double excess = sup_dev[i] - bound;
        if (excess > rep.worst_excess) {
            rep.worst_excess = excess;
            rep.t_worst = times[i];
        }
    }
    rep.n_checked = times.size();
    rep.pass = rep.worst_excess <= 0.0;
    return rep;
}

BoundReport k1_decay_check(std::span<const double> times, std::span<const double> k1_sup,
                           double theta, double xi_sup, double gamma, double tol) {
    if (times.size() != k1_sup.size()) throw DomainError("k1 decay: length mismatch");
    BoundReport rep;
    rep.worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < times.size(); ++i) {
        double bound = theta * xi_sup * std::exp(-gamma * times[i]) + tol;
        double excess = k1_sup[i] - bound;
        if (excess > rep.worst_excess) {
            rep.worst_excess = excess;
            rep.t_worst = times[i];
        }
    }
    rep.n_checked = times.size();
    rep.pass = rep.worst_excess <= 0.0;
    return rep;
}

}  // namespace nfk
