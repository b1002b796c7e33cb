#include "nfk/feynman_kac.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "nfk/parallel.hpp"
#include "nfk/stats.hpp"

namespace nfk {

namespace {

constexpr double kExpGuard = 700.0;  // exp() overflows just above 709

// Weight of one path: u0(X_t) * exp(path integral). Throws on exponent
// overflow with the offending path identified.
double path_weight(const Field& u0, const FieldSeries& w, const JumpPath& path, double t,
                   std::uint64_t stream) {
    double ex = path_potential_integral(path, w, t);
    if (ex > kExpGuard) {
        std::ostringstream msg;
        msg << "estimator-overflow: exponent " << ex << " on stream " << stream << " ("
            << path.jump_times.size() << " jumps, t = " << t << ")";
        throw EstimatorOverflow(msg.str());
    }
    return u0.v[position_at(path, t)] * std::exp(ex);
}

}  // namespace

PointEstimate fk_linear_from_ensemble(const Field& u0, const FieldSeries& w,
                                      const PathEnsemble& ensemble, double t) {
    require_same_grid(u0.grid, ensemble.grid, "fk_linear");
    if (t < 0.0 || t > ensemble.horizon * (1.0 + 1e-12) + 1e-15)
        throw DomainError("fk_linear: t outside the ensemble horizon");
    if (!w.covers(t)) throw DomainError("fk_linear: potential series does not cover t");

    PointEstimate est;
    est.points = ensemble.start_cells;
    est.n_paths = ensemble.n_paths;
    est.seed = ensemble.base_seed;
    est.mean.assign(est.points.size(), 0.0);
    est.stderr_mean.assign(est.points.size(), 0.0);

    parallel_for(est.points.size(), [&](std::size_t c) {
        // Fixed-order accumulation per cell keeps the reduction deterministic;
        // two-pass variance avoids cancellation when the weights are (near)
        // deterministic.
        const int n = ensemble.n_paths;
        std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
        for (int k = 0; k < n; ++k)
            weights[std::size_t(k)] =
                path_weight(u0, w, ensemble.path(c, k), t, ensemble.stream_of(c, k));
        MeanVar mv = mean_var(weights);
        est.mean[c] = mv.mean;
        est.stderr_mean[c] = mv.stderr_mean();
    });
    return est;
}

PointEstimate fk_linear_estimate(const Field& u0, const FieldSeries& w, const Kernel& j, double t,
                                 int n_paths, const SeedSpec& seed,
                                 std::span<const std::size_t> eval_points) {
    if (n_paths < 100) throw DomainError("fk_linear: need at least 100 paths");
    PathEnsemble ens = sample_ensemble(j, eval_points, n_paths, t, seed);
    return fk_linear_from_ensemble(u0, w, ens, t);
}

DuhamelResult duhamel_series(const Field& u0, const FieldSeries& w, const Kernel& j, double t,
                             int n_terms, double dt) {
    if (n_terms < 1) throw DomainError("duhamel: n_terms must be >= 1");
    if (!(dt > 0.0)) throw DomainError("duhamel: dt must be positive");
    double steps = t / dt;
    std::size_t m_steps = std::size_t(std::llround(steps));
    if (m_steps < 1 || std::abs(steps - double(m_steps)) > 1e-9)
        throw DomainError("duhamel: dt must divide t");
    if (!w.covers(t)) throw DomainError("duhamel: potential series does not cover t");
    require_same_grid(u0.grid, j.grid, "duhamel");

    auto eng = std::make_shared<Spectral>(j.grid);
    KernelSpectrum ks = make_kernel_spectrum(*eng, j.values);
    const std::size_t n_modes = eng->n_modes();

    // One-step semigroup multiplier.
    std::vector<std::complex<double>> step_mult(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k)
        step_mult[k] = std::exp(dt * (ks.symbol[k] - ks.symbol[0].real()));

    const std::size_t m_count = m_steps + 1;

    // Base term e^{t_m L} u0 for every grid time.
    std::vector<std::complex<double>> u0_spec;
    eng->forward(u0.v, u0_spec);
    std::vector<Field> term(m_count, Field(u0.grid));
    {
        std::vector<std::complex<double>> acc = u0_spec;
        eng->inverse(acc, term[0].v);
        for (std::size_t m = 1; m < m_count; ++m) {
            for (std::size_t k = 0; k < n_modes; ++k) acc[k] *= step_mult[k];
            std::vector<std::complex<double>> tmp = acc;
            eng->inverse(std::move(tmp), term[m].v);
        }
    }

    std::vector<Field> sum = term;
    double w_sup = 0.0;
    std::vector<Field> w_frames(m_count, Field(u0.grid));
    for (std::size_t m = 0; m < m_count; ++m) {
        w_frames[m] = w.at(double(m) * dt);
        w_sup = std::max(w_sup, w_frames[m].sup_norm());
    }

    // Q f via the prefix recursion: with g_m = W_m f_m and q the one-step
    // multiplier, trapezoid gives (Qf)_m = dt (g_m/2 + T_m), T_m = q (T_{m-1} + g_{m-1})
    // for m >= 2 and T_1 = q g_0 / 2. Identical to applying the semigroup to
    // each quadrature node.
    for (int j_term = 1; j_term <= n_terms; ++j_term) {
        std::vector<std::vector<std::complex<double>>> g_spec(m_count);
        for (std::size_t m = 0; m < m_count; ++m) {
            Field g = pointwise(w_frames[m], term[m]);
            eng->forward(g.v, g_spec[m]);
        }
        std::vector<std::complex<double>> tail(n_modes, 0.0);
        std::vector<std::complex<double>> out(n_modes);
        for (std::size_t m = 0; m < m_count; ++m) {
            if (m == 0) {
                term[0] = Field(u0.grid, std::vector<double>(u0.grid.total(), 0.0));
                continue;
            }
            if (m == 1) {
                for (std::size_t k = 0; k < n_modes; ++k) tail[k] = 0.5 * step_mult[k] * g_spec[0][k];
            } else {
                for (std::size_t k = 0; k < n_modes; ++k)
                    tail[k] = step_mult[k] * (tail[k] + g_spec[m - 1][k]);
            }
            for (std::size_t k = 0; k < n_modes; ++k) out[k] = dt * (0.5 * g_spec[m][k] + tail[k]);
            std::vector<std::complex<double>> tmp = out;
            eng->inverse(std::move(tmp), term[m].v);
        }
        for (std::size_t m = 0; m < m_count; ++m) sum[m] += term[m];
    }

    DuhamelResult res{Field(u0.grid), 0.0, 0.0};
    res.partial_sum = sum.back();
    for (const Field& f : sum) res.series_sup = std::max(res.series_sup, f.sup_norm());
    // Dropped tail: t^{n+1}/(n+1)! ||W||^{n+1} ||u||.
    double log_tail = double(n_terms + 1) * std::log(std::max(t * w_sup, 1e-300)) -
                      std::lgamma(double(n_terms + 2));
    res.remainder_bound = w_sup == 0.0 ? 0.0 : std::exp(log_tail) * res.series_sup;
    return res;
}

namespace {

// One Picard sweep of Psi over a segment-local time grid, on frozen paths.
// frames_in holds w at times m*dt; the result is written to frames_out.
void psi_sweep(const Field& g0, const std::function<Field(const Field&)>& potential,
               const PathEnsemble& ens, double dt, std::size_t m_count,
               std::vector<Field>& frames_in, std::vector<Field>& frames_out,
               std::vector<double>* stderr_sup) {
    const Grid& grid = g0.grid;
    std::vector<Field> pot_frames;
    pot_frames.reserve(m_count);
    for (std::size_t m = 0; m < m_count; ++m) pot_frames.push_back(potential(frames_in[m]));
    FieldSeries w_series(dt, pot_frames);

    if (stderr_sup) stderr_sup->assign(m_count, 0.0);
    std::vector<std::vector<double>> out_cols(m_count, std::vector<double>(grid.total(), 0.0));
    std::vector<std::vector<double>> err_cols;
    if (stderr_sup) err_cols.assign(m_count, std::vector<double>(grid.total(), 0.0));

    parallel_for(grid.total(), [&](std::size_t c) {
        const int n = ens.n_paths;
        std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
        for (std::size_t m = 0; m < m_count; ++m) {
            double t_m = double(m) * dt;
            for (int k = 0; k < n; ++k)
                weights[std::size_t(k)] =
                    path_weight(g0, w_series, ens.path(c, k), t_m, ens.stream_of(c, k));
            MeanVar mv = mean_var(weights);
            out_cols[m][c] = mv.mean;
            if (stderr_sup) err_cols[m][c] = mv.stderr_mean();
        }
    });

    frames_out.assign(m_count, Field(grid));
    for (std::size_t m = 0; m < m_count; ++m) {
        frames_out[m].v = std::move(out_cols[m]);
        if (stderr_sup)
            for (double e : err_cols[m]) (*stderr_sup)[m] = std::max((*stderr_sup)[m], e);
    }
}

double sup_diff(const std::vector<Field>& a, const std::vector<Field>& b) {
    double d = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m)
        for (std::size_t i = 0; i < a[m].size(); ++i)
            d = std::max(d, std::abs(a[m].v[i] - b[m].v[i]));
    return d;
}

}  // namespace

FixedPointResult fk_nonlinear_fixed_point(const Field& g0,
                                          const std::function<Field(const Field&)>& potential,
                                          const Kernel& j, const FixedPointOptions& opts) {
    require_same_grid(g0.grid, j.grid, "fk_nonlinear");
    if (!(opts.dt > 0.0) || !(opts.horizon > 0.0))
        throw DomainError("fk_nonlinear: horizon and dt must be positive");
    if (!(opts.lipschitz > 0.0)) throw DomainError("fk_nonlinear: lipschitz bound must be positive");
    std::size_t total_steps = std::size_t(std::llround(opts.horizon / opts.dt));
    if (total_steps < 1 || std::abs(opts.horizon / opts.dt - double(total_steps)) > 1e-9)
        throw DomainError("fk_nonlinear: dt must divide the horizon");

    const Grid& grid = g0.grid;
    std::vector<std::size_t> all_cells(grid.total());
    for (std::size_t i = 0; i < all_cells.size(); ++i) all_cells[i] = i;

    FixedPointResult res;
    std::vector<Field> global_frames;
    global_frames.reserve(total_steps + 1);
    global_frames.push_back(g0);
    res.stderr_sup.assign(total_steps + 1, 0.0);

    Field seg_init = g0;
    std::size_t step_cursor = 0;
    int segment = 0;
    while (step_cursor < total_steps) {
        double bound = seg_init.sup_norm();
        if (bound == 0.0) {
            // Zero initial data is a fixed point of Psi.
            for (std::size_t s = step_cursor; s < total_steps; ++s)
                global_frames.push_back(Field(grid));
            step_cursor = total_steps;
            break;
        }
        // Contraction block length 1/(2 d M), at least one step.
        double seg_len = 1.0 / (2.0 * bound * opts.lipschitz);
        std::size_t seg_steps = std::max<std::size_t>(1, std::size_t(seg_len / opts.dt));
        seg_steps = std::min(seg_steps, total_steps - step_cursor);
        std::size_t m_count = seg_steps + 1;
        double seg_horizon = double(seg_steps) * opts.dt;
        ++segment;

        SeedSpec seg_seed = opts.seed.stream(
            std::uint64_t(segment - 1) * grid.total() * std::uint64_t(opts.n_paths));
        PathEnsemble ens = sample_ensemble(j, all_cells, opts.n_paths, seg_horizon, seg_seed);

        std::vector<Field> w_frames(m_count, seg_init);
        std::vector<Field> next;
        std::vector<double> seg_err;
        bool converged = false;
        for (int it = 0; it < opts.max_iter; ++it) {
            psi_sweep(seg_init, potential, ens, opts.dt, m_count, w_frames, next, &seg_err);
            double delta = sup_diff(w_frames, next);
            res.update_history.push_back(delta);
            ++res.iterations;
            w_frames.swap(next);
            if (delta < opts.tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            std::ostringstream msg;
            msg << "fk_nonlinear: Picard iteration did not reach tol " << opts.tol << " in "
                << opts.max_iter << " sweeps on segment " << segment << "; updates:";
            for (double d : res.update_history) msg << ' ' << d;
            throw ConvergenceFailure(msg.str());
        }
        // Residual of one extra sweep on the final segment state.
        psi_sweep(seg_init, potential, ens, opts.dt, m_count, w_frames, next, nullptr);
        res.final_residual = std::max(res.final_residual, sup_diff(w_frames, next));

        for (std::size_t m = 1; m < m_count; ++m) {
            global_frames.push_back(w_frames[m]);
            res.stderr_sup[step_cursor + m] = seg_err[m];
        }
        seg_init = w_frames.back();
        step_cursor += seg_steps;
    }

    res.w = FieldSeries(opts.dt, std::move(global_frames));
    res.segments = segment;
    return res;
}

LogisticIdentityReport fk_logistic_identity_check(const FieldSeries& u, const Field& u0,
                                                  const ModelParams& params,
                                                  const SignedKernel& j_theta,
                                                  const Kernel& a_minus, double t, int n_paths,
                                                  const SeedSpec& seed,
                                                  std::span<const std::size_t> eval_points) {
    params.validate();
    if (!j_theta.nonneg)
        throw AssumptionViolation(
            "logistic identity: J_theta has negative values, the jump representation "
            "with kappa = theta is not justified");
    if (!u.covers(t)) throw DomainError("logistic identity: solution series does not cover t");
    const double theta = params.theta();

    // Potential frames W_s = -kappa- (a- * u_s); the -beta and +kappa- theta
    // terms of the linearization cancel because a- has unit mass.
    auto eng = std::make_shared<Spectral>(u.grid());
    SemigroupOperator conv_minus = make_operator(eng, a_minus);
    std::vector<Field> w_frames;
    w_frames.reserve(u.size());
    for (std::size_t m = 0; m < u.size(); ++m) {
        Field w = conv_minus.convolve(u.frame(m));
        w *= -params.kappa_minus;
        w_frames.push_back(std::move(w));
    }
    FieldSeries w_series(u.dt(), std::move(w_frames));

    Field shifted = u0;
    shifted += -theta;
    Kernel j = to_kernel(j_theta);
    PointEstimate est = fk_linear_estimate(shifted, w_series, j, t, n_paths, seed, eval_points);

    LogisticIdentityReport rep;
    rep.points.assign(eval_points.begin(), eval_points.end());
    Field u_t = u.at(t);
    for (std::size_t c = 0; c < rep.points.size(); ++c) {
        double lhs = u_t.v[rep.points[c]];
        double rhs = theta + est.mean[c];
        rep.lhs.push_back(lhs);
        rep.rhs_mean.push_back(rhs);
        rep.rhs_stderr.push_back(est.stderr_mean[c]);
        rep.max_residual = std::max(rep.max_residual, std::abs(lhs - rhs));
        rep.max_stderr = std::max(rep.max_stderr, est.stderr_mean[c]);
    }
    return rep;
}

}  // namespace nfk
