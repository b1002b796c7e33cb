#include "nfk/solver.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace nfk {

namespace {

std::size_t checked_steps(double horizon, double dt, int store_every) {
    if (!(dt > 0.0) || !(horizon > 0.0))
        throw DomainError("solver: horizon and dt must be positive");
    double steps = horizon / dt;
    std::size_t n = std::size_t(std::llround(steps));
    if (n < 1 || std::abs(steps - double(n)) > 1e-9)
        throw DomainError("solver: horizon must be a multiple of dt");
    if (store_every < 1 || n % std::size_t(store_every) != 0)
        throw DomainError("solver: store cadence must divide the step count");
    return n;
}

}  // namespace

SolveResult solve_perturbed(const Field& u0, const FieldSeries& w, const Kernel& j,
                            const SolveOptions& opts) {
    require_same_grid(u0.grid, j.grid, "solve_perturbed");
    std::size_t steps = checked_steps(opts.horizon, opts.dt, opts.store_every);
    if (!w.covers(opts.horizon))
        throw DomainError("solve_perturbed: potential series does not cover the horizon");

    double w_sup = 0.0;
    for (std::size_t m = 0; m < w.size(); ++m) w_sup = std::max(w_sup, w.frame(m).sup_norm());
    if (opts.dt > 0.1 / (j.mass + w_sup) + 1e-12) {
        std::ostringstream msg;
        msg << "solve_perturbed: dt = " << opts.dt << " exceeds the stability bound 0.1/(mass+|W|) = "
            << 0.1 / (j.mass + w_sup);
        throw DomainError(msg.str());
    }
    const double guard = 10.0 * std::exp(w_sup * opts.horizon) * std::max(u0.sup_norm(), 1e-300);

    auto eng = std::make_shared<Spectral>(j.grid);
    SemigroupOperator flow = make_operator(eng, j);

    SolveResult res;
    res.reference = 0.0;
    res.dt_used = opts.dt;
    Field u = u0;
    std::vector<Field> frames{u};
    auto record = [&](double t) {
        res.norm_times.push_back(t);
        res.sup_dev.push_back(u.sup_norm());
        res.mean_value.push_back(u.mean());
        res.min_value.push_back(u.min_value());
        res.max_value.push_back(u.max_value());
    };
    record(0.0);

    Field w_lo = w.at(0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        double t1 = double(s + 1) * opts.dt;
        Field w_hi = w.at(t1);
        for (std::size_t i = 0; i < u.size(); ++i) u.v[i] *= std::exp(0.5 * opts.dt * w_lo.v[i]);
        u = flow.apply(opts.dt, u);
        for (std::size_t i = 0; i < u.size(); ++i) u.v[i] *= std::exp(0.5 * opts.dt * w_hi.v[i]);
        w_lo = std::move(w_hi);

        if (u.sup_norm() > guard)
            throw NumericalError("solve_perturbed: sup norm exceeded the growth guard; "
                                 "reduce the step size");
        record(t1);
        if ((s + 1) % std::size_t(opts.store_every) == 0) frames.push_back(u);
    }
    res.series = FieldSeries(opts.dt * opts.store_every, std::move(frames));
    return res;
}

double logistic_closed_form(double q0, const ModelParams& params, double t) {
    params.validate();
    if (!(q0 > 0.0)) throw DomainError("logistic closed form: q0 must be positive");
    double theta = params.theta();
    return theta / (1.0 + std::exp(-params.beta_rate() * t) * (theta / q0 - 1.0));
}

namespace {

// Reaction term F(u) = beta u - kappa- u (a-*u); both constant solutions are
// exact roots of F so the splitting preserves them.
struct LogisticReaction {
    double beta;
    double kappa_minus;
    const SemigroupOperator& conv_minus;

    Field eval(const Field& u) const {
        Field c = conv_minus.convolve(u);
        Field out = u;
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = beta * u.v[i] - kappa_minus * u.v[i] * c.v[i];
        return out;
    }

    // Explicit midpoint over a half interval.
    void half_step(Field& u, double dt_half) const {
        Field k1 = eval(u);
        Field mid = u;
        for (std::size_t i = 0; i < mid.size(); ++i) mid.v[i] += 0.5 * dt_half * k1.v[i];
        Field k2 = eval(mid);
        for (std::size_t i = 0; i < u.size(); ++i) u.v[i] += dt_half * k2.v[i];
    }
};

}  // namespace

SolveResult solve_logistic(const Field& u0, const ModelParams& params, const Kernel& a_plus,
                           const Kernel& a_minus, const SolveOptions& opts) {
    params.validate();
    require_same_grid(u0.grid, a_plus.grid, "solve_logistic");
    require_same_grid(u0.grid, a_minus.grid, "solve_logistic");
    if (u0.min_value() < -1e-12)
        throw DomainError("solve_logistic: initial condition must be non-negative");

    const double theta = params.theta();
    double rate_bound = params.kappa_plus + params.kappa_plus +
                        params.kappa_minus * u0.sup_norm();
    if (opts.dt > 0.1 / rate_bound + 1e-12) {
        std::ostringstream msg;
        msg << "solve_logistic: dt = " << opts.dt << " exceeds the stability bound "
            << 0.1 / rate_bound;
        throw DomainError(msg.str());
    }

    auto eng = std::make_shared<Spectral>(u0.grid);
    SemigroupOperator dispersal = make_operator(eng, a_plus);
    SemigroupOperator competition = make_operator(eng, a_minus);
    LogisticReaction reaction{params.beta_rate(), params.kappa_minus, competition};
    const double guard = 10.0 * std::max(u0.sup_norm(), theta);

    SolveOptions current = opts;
    for (int attempt = 0;; ++attempt) {
        std::size_t steps = checked_steps(current.horizon, current.dt, current.store_every);
        SolveResult res;
        res.reference = theta;
        res.dt_used = current.dt;
        res.refinements = attempt;

        std::vector<Field> frames;
        Field u = u0;
        frames.push_back(u);
        auto record = [&](double t) {
            res.norm_times.push_back(t);
            Field dev = u;
            dev += -theta;
            res.sup_dev.push_back(dev.sup_norm());
            res.mean_value.push_back(u.mean());
            res.min_value.push_back(u.min_value());
            res.max_value.push_back(u.max_value());
        };
        record(0.0);

        bool negative = false;
        for (std::size_t s = 0; s < steps && !negative; ++s) {
            reaction.half_step(u, 0.5 * current.dt);
            u = dispersal.apply(params.kappa_plus * current.dt, u);
            reaction.half_step(u, 0.5 * current.dt);

            if (u.min_value() < -1e-10) {
                negative = true;
                break;
            }
            if (u.sup_norm() > guard)
                throw NumericalError("solve_logistic: solution escaped the growth guard");

            record(double(s + 1) * current.dt);
            if ((s + 1) % std::size_t(current.store_every) == 0) frames.push_back(u);
        }
        if (!negative) {
            res.series = FieldSeries(current.dt * current.store_every, std::move(frames));
            return res;
        }
        if (attempt >= 3)
            throw NumericalError("solve_logistic: positivity violation persisted after "
                                 "3 step-size refinements");
        current.dt *= 0.5;
        current.store_every *= 2;
    }
}

ComparisonReport comparison_check(const SolveResult& u, const ModelParams& params,
                                  const Kernel& a_plus, const Kernel& a_minus, double q0,
                                  double tol) {
    params.validate();
    if (!(q0 > 0.0) || q0 >= params.theta() * (1.0 + 1e-12))
        throw DomainError("comparison_check: q0 must lie in (0, theta)");
    ComparisonReport rep;
    rep.assumption_ok = combined_kernel(params, a_plus, a_minus, q0).nonneg;
    if (!rep.assumption_ok)
        throw AssumptionViolation("comparison_check: J_q0 has negative values, the comparison "
                                  "hypothesis fails");
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < u.series.size(); ++m) {
        double t = u.series.time(m);
        double q_t = logistic_closed_form(q0, params, t);
        const Field& f = u.series.frame(m);
        for (std::size_t i = 0; i < f.size(); ++i) {
            double margin = f.v[i] - (q_t - tol);
            if (margin < rep.worst_margin) {
                rep.worst_margin = margin;
                rep.t_worst = t;
                rep.x_worst = i;
            }
        }
    }
    rep.pass = rep.worst_margin >= 0.0;
    return rep;
}

std::vector<std::uint64_t> binomial_row(int n) {
    if (n < 0 || n > 62) throw DomainError("binomial_row: n out of the exact-integer range");
    std::vector<std::uint64_t> row(std::size_t(n) + 1, 1);
    for (int i = 1; i <= n; ++i)
        for (int k = i - 1; k >= 1; --k) row[std::size_t(k)] += row[std::size_t(k) - 1];
    return row;
}

TaylorResult solve_taylor_hierarchy(const Field& xi, const ModelParams& params,
                                    const Kernel& a_plus, const Kernel& a_minus,
                                    const TaylorOptions& opts) {
    params.validate();
    require_same_grid(xi.grid, a_plus.grid, "solve_taylor_hierarchy");
    require_same_grid(xi.grid, a_minus.grid, "solve_taylor_hierarchy");
    if (opts.n_max < 1) throw DomainError("solve_taylor_hierarchy: n_max must be >= 1");
    if (opts.n_max > 30) throw DomainError("solve_taylor_hierarchy: n_max capped at 30");
    std::size_t steps = checked_steps(opts.horizon, opts.dt, opts.store_every);

    const double theta = params.theta();
    const int n_max = opts.n_max;
    SignedKernel j_theta = combined_kernel(params, a_plus, a_minus, theta);

    auto eng = std::make_shared<Spectral>(xi.grid);
    SemigroupOperator theta_flow = make_operator(eng, j_theta);
    SemigroupOperator competition = make_operator(eng, a_minus);
    // Linear flow of every order: multiplier exp(dt (symbol(k) - kappa+)).
    const double shift = theta_flow.integral() - params.kappa_plus;

    TaylorResult res;
    res.theta = theta;
    res.gamma = params.kappa_plus - theta_flow.integral();

    // k_{n,0} = theta xi^n.
    std::vector<Field> k(std::size_t(n_max) + 1, Field(xi.grid));
    {
        Field pow(xi.grid, 1.0);
        for (int n = 0; n <= n_max; ++n) {
            for (std::size_t i = 0; i < pow.size(); ++i) k[std::size_t(n)].v[i] = theta * pow.v[i];
            if (n < n_max) pow = pointwise(pow, xi);
        }
    }

    auto source = [&](int n, const std::vector<Field>& coeffs,
                      const std::vector<Field>& convs) -> Field {
        Field s(xi.grid);
        auto binom = binomial_row(n);
        for (int l = 1; l <= n - 1; ++l) {
            double c = double(binom[std::size_t(l)]);
            const Field& kl = coeffs[std::size_t(l)];
            const Field& cv = convs[std::size_t(n - l)];
            for (std::size_t i = 0; i < s.size(); ++i) s.v[i] += c * kl.v[i] * cv.v[i];
        }
        return s;
    };

    res.sup_norm.assign(std::size_t(n_max) + 1, {});
    std::vector<std::vector<Field>> stored(std::size_t(n_max) + 1);
    auto record = [&](bool store_frame) {
        for (int n = 0; n <= n_max; ++n) {
            res.sup_norm[std::size_t(n)].push_back(k[std::size_t(n)].sup_norm());
            if (store_frame) stored[std::size_t(n)].push_back(k[std::size_t(n)]);
        }
    };
    res.norm_times.push_back(0.0);
    record(true);

    std::vector<Field> convs(std::size_t(n_max) + 1, Field(xi.grid));
    for (std::size_t s = 0; s < steps; ++s) {
        // a- * k_l at the current time, for the explicit halves of the sources.
        for (int l = 1; l <= n_max - 1; ++l)
            convs[std::size_t(l)] = competition.convolve(k[std::size_t(l)]);
        std::vector<Field> old = k;

        // Orders step in increasing n, so the updated lower orders feed the
        // trapezoidal source at the new time.
        std::vector<Field> new_convs = convs;
        for (int n = 1; n <= n_max; ++n) {
            Field& kn = k[std::size_t(n)];
            if (n >= 2) {
                Field s_old = source(n, old, convs);
                for (std::size_t i = 0; i < kn.size(); ++i)
                    kn.v[i] -= 0.5 * opts.dt * params.kappa_minus * s_old.v[i];
            }
            kn = theta_flow.apply_shifted(opts.dt, shift, kn);
            if (n >= 2) {
                Field s_new = source(n, k, new_convs);
                for (std::size_t i = 0; i < kn.size(); ++i)
                    kn.v[i] -= 0.5 * opts.dt * params.kappa_minus * s_new.v[i];
            }
            if (n <= n_max - 1) new_convs[std::size_t(n)] = competition.convolve(kn);
        }

        res.norm_times.push_back(double(s + 1) * opts.dt);
        record((s + 1) % std::size_t(opts.store_every) == 0);
    }

    for (int n = 0; n <= n_max; ++n)
        res.coeff.emplace_back(opts.dt * opts.store_every, std::move(stored[std::size_t(n)]));
    return res;
}

}  // namespace nfk
