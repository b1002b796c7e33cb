#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nfk/solver.hpp"

using namespace nfk;

namespace {

ModelParams demo_params() {
    ModelParams p;
    p.kappa_plus = 2.0;
    p.kappa_minus = 1.0;
    p.mortality = 1.0;  // theta = beta = 1
    return p;
}

Field sin_field(const Grid& g, double base, double amp, double mode = 1.0) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double x = g.unflatten(i)[0] * g.h();
        f.v[i] = base + amp * std::sin(2.0 * std::numbers::pi * mode * x / g.extent);
    }
    return f;
}

// Mild-form residual: u_m - e^{kappa+ t_m L} u0 - trapezoid of
// e^{kappa+ (t_m - s) L} F(u_s); an independent consistency gauge for the
// splitting scheme.
double mild_form_residual(const SolveResult& sol, const ModelParams& p, const Kernel& a_plus,
                          const Kernel& a_minus) {
    const FieldSeries& u = sol.series;
    const Grid& g = u.grid();
    auto eng = std::make_shared<Spectral>(g);
    SemigroupOperator disp = make_operator(eng, a_plus);
    SemigroupOperator comp = make_operator(eng, a_minus);
    double dt = u.dt();
    auto reaction = [&](const Field& f) {
        Field c = comp.convolve(f);
        Field out = f;
        for (std::size_t i = 0; i < f.size(); ++i)
            out.v[i] = p.beta_rate() * f.v[i] - p.kappa_minus * f.v[i] * c.v[i];
        return out;
    };
    double worst = 0.0;
    for (std::size_t m = 1; m < u.size(); ++m) {
        double t_m = u.time(m);
        Field acc = disp.apply(p.kappa_plus * t_m, u.frame(0));
        for (std::size_t j = 0; j <= m; ++j) {
            double wq = (j == 0 || j == m) ? 0.5 : 1.0;
            Field term = disp.apply(p.kappa_plus * (t_m - u.time(j)), reaction(u.frame(j)));
            term *= wq * dt;
            acc += term;
        }
        Field diff = u.frame(m) - acc;
        worst = std::max(worst, diff.sup_norm());
    }
    return worst;
}

}  // namespace

TEST_CASE("perturbed solver with zero potential is the semigroup") {
    Grid g(1, 20.0, 64);
    Kernel j = scale_kernel(build_kernel(KernelProfile::gaussian(1.0), g), 2.0);
    Field u0 = sin_field(g, 1.0, 0.5);
    FieldSeries w = constant_in_time(Field(g, 0.0), 1.0);
    SolveOptions opts;
    opts.horizon = 1.0;
    opts.dt = 1.0 / 64.0;
    opts.store_every = 64;
    SolveResult res = solve_perturbed(u0, w, j, opts);
    Field oracle = semigroup_apply(j, 1.0, u0);
    Field diff = res.series.frame(1) - oracle;
    CHECK(diff.sup_norm() <= 1e-12);
}

TEST_CASE("perturbed solver with constant potential tracks e^{w t}") {
    Grid g(1, 20.0, 32);
    Kernel j = build_kernel(KernelProfile::gaussian(1.0), g);
    Field u0(g, 1.0);
    const double wv = 0.7, t = 2.0;
    FieldSeries w = constant_in_time(Field(g, wv), t);
    SolveOptions opts;
    opts.horizon = t;
    opts.dt = 0.02;
    opts.store_every = 100;
    SolveResult res = solve_perturbed(u0, w, j, opts);
    double expect = std::exp(wv * t);
    for (double v : res.series.frame(1).v)
        CHECK(std::abs(v - expect) <= 1.0 * opts.dt * opts.dt * expect);
}

TEST_CASE("halving dt reduces the perturbed-solver error by about four") {
    Grid g(1, 20.0, 32);
    Kernel j = scale_kernel(build_kernel(KernelProfile::gaussian(1.0), g), 1.5);
    Field u0 = sin_field(g, 1.0, 0.5);
    const double t = 1.0;
    FieldSeries w = constant_in_time(sin_field(g, 0.0, 0.6), t);

    auto final_frame = [&](double dt) {
        SolveOptions opts;
        opts.horizon = t;
        opts.dt = dt;
        opts.store_every = int(std::llround(t / dt));
        SolveResult r = solve_perturbed(u0, w, j, opts);
        return r.series.frame(1);
    };
    Field fine = final_frame(1.0 / 1024.0);
    double e1 = (final_frame(1.0 / 32.0) - fine).sup_norm();
    double e2 = (final_frame(1.0 / 64.0) - fine).sup_norm();
    double ratio = e1 / e2;
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.5);
}

TEST_CASE("perturbed solver rejects steps beyond the stability bound") {
    Grid g(1, 20.0, 32);
    Kernel j = scale_kernel(build_kernel(KernelProfile::gaussian(1.0), g), 2.0);
    Field u0(g, 1.0);
    FieldSeries w = constant_in_time(Field(g, 3.0), 1.0);
    SolveOptions opts;
    opts.horizon = 1.0;
    opts.dt = 0.25;  // above 0.1/(2+3)
    opts.store_every = 4;
    CHECK_THROWS_AS(solve_perturbed(u0, w, j, opts), DomainError);
}

TEST_CASE("logistic stationary states are preserved") {
    Grid g(1, 16.0, 32);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    SolveOptions opts;
    opts.horizon = 20.0;
    opts.dt = 0.01;  // 2000 steps
    opts.store_every = 2000;

    SUBCASE("u == theta drifts below 1e-13") {
        SolveResult res = solve_logistic(Field(g, p.theta()), p, a, a, opts);
        double worst = 0.0;
        for (double d : res.sup_dev) worst = std::max(worst, d);
        CHECK(worst <= 1e-13 * p.theta());
    }
    SUBCASE("u == 0 stays exactly zero") {
        SolveResult res = solve_logistic(Field(g, 0.0), p, a, a, opts);
        for (std::size_t i = 0; i < res.norm_times.size(); ++i) {
            CHECK(res.min_value[i] == 0.0);
            CHECK(res.max_value[i] == 0.0);
        }
    }
}

TEST_CASE("logistic solver matches the constant closed form over [0, 10]") {
    Grid g(1, 16.0, 16);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    const double q0 = 0.5 * p.theta();
    SolveOptions opts;
    opts.horizon = 10.0;
    opts.dt = 0.005;
    opts.store_every = 100;
    SolveResult res = solve_logistic(Field(g, q0), p, a, a, opts);

    double tol = 5.0 * opts.dt * opts.dt;
    for (std::size_t m = 0; m < res.series.size(); ++m) {
        double expect = logistic_closed_form(q0, p, res.series.time(m));
        for (double v : res.series.frame(m).v) CHECK(std::abs(v - expect) <= tol);
    }
    // value at t = ln 2 via a densely stored run: theta/(1 + 1/2) = 2/3
    SolveOptions dense = opts;
    dense.horizon = 1.0;
    dense.store_every = 1;
    SolveResult res_dense = solve_logistic(Field(g, q0), p, a, a, dense);
    Field at_ln2 = res_dense.series.at(std::log(2.0));
    CHECK(std::abs(at_ln2.v[7] - 2.0 / 3.0) <= tol);
}

TEST_CASE("logistic solver keeps [0, theta] invariant and decays monotonically") {
    Grid g(1, 20.0, 64);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    Field u0 = sin_field(g, 0.5, 0.5);  // spans [0, theta]
    SolveOptions opts;
    opts.horizon = 5.0;
    opts.dt = 0.005;
    opts.store_every = 100;
    SolveResult res = solve_logistic(u0, p, a, a, opts);
    for (std::size_t i = 0; i < res.norm_times.size(); ++i) {
        CHECK(res.min_value[i] >= -1e-10);
        CHECK(res.max_value[i] <= p.theta() + 1e-10);
    }
    double dt2 = res.dt_used * res.dt_used;
    // The deviation norm may not shrink while the profile still touches zero;
    // it must never grow.
    for (std::size_t i = 0; i + 1 < res.sup_dev.size(); ++i)
        CHECK(res.sup_dev[i + 1] <= res.sup_dev[i] + dt2);
}

TEST_CASE("two-dimensional logistic flow: stationarity and constant dynamics") {
    Grid g(2, 12.0, 8);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.5), g);
    SolveOptions opts;
    opts.horizon = 2.0;
    opts.dt = 0.01;
    opts.store_every = 200;

    SolveResult at_theta = solve_logistic(Field(g, p.theta()), p, a, a, opts);
    double drift = 0.0;
    for (double d : at_theta.sup_dev) drift = std::max(drift, d);
    CHECK(drift <= 1e-13);

    const double q0 = 0.4;
    SolveResult res = solve_logistic(Field(g, q0), p, a, a, opts);
    for (std::size_t i = 0; i < res.norm_times.size(); ++i) {
        double expect = logistic_closed_form(q0, p, res.norm_times[i]);
        CHECK(std::abs(res.max_value[i] - expect) <= 5.0 * opts.dt * opts.dt);
        CHECK(std::abs(res.min_value[i] - expect) <= 5.0 * opts.dt * opts.dt);
    }
}

TEST_CASE("logistic solver rejects negative initial data and coarse steps") {
    Grid g(1, 16.0, 16);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    SolveOptions opts;
    opts.horizon = 1.0;
    opts.dt = 0.01;
    opts.store_every = 100;
    CHECK_THROWS_AS(solve_logistic(Field(g, -0.5), p, a, a, opts), DomainError);
    opts.dt = 0.5;
    opts.store_every = 2;
    CHECK_THROWS_AS(solve_logistic(Field(g, 1.0), p, a, a, opts), DomainError);
}

TEST_CASE("closed-form solution: values, asymptotics, domain") {
    ModelParams p = demo_params();
    CHECK(logistic_closed_form(p.theta(), p, 5.0) == doctest::Approx(p.theta()));
    CHECK(logistic_closed_form(0.5, p, std::log(2.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // e^{beta t} (theta - q_t) -> theta (theta/q0 - 1)
    double q0 = 0.25;
    double limit = p.theta() * (p.theta() / q0 - 1.0);
    double probe = std::exp(p.beta_rate() * 20.0) * (p.theta() - logistic_closed_form(q0, p, 20.0));
    CHECK(std::abs(probe - limit) <= 1e-6);
    // q0 > theta decays toward theta from above
    CHECK(logistic_closed_form(2.0, p, 1.0) > p.theta());
    CHECK(logistic_closed_form(2.0, p, 1.0) < 2.0);
    CHECK_THROWS_AS(logistic_closed_form(0.0, p, 1.0), DomainError);
    CHECK_THROWS_AS(logistic_closed_form(-1.0, p, 1.0), DomainError);
}

TEST_CASE("comparison check: equality, dominance, and hypothesis failure") {
    ModelParams p = demo_params();
    Grid g(1, 20.0, 64);
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    SolveOptions opts;
    opts.horizon = 5.0;
    opts.dt = 0.005;
    opts.store_every = 200;

    SUBCASE("u0 == q0 reproduces the comparison solution") {
        SolveResult res = solve_logistic(Field(g, 0.5), p, a, a, opts);
        ComparisonReport rep = comparison_check(res, p, a, a, 0.5, 1e-4);
        CHECK(rep.pass);
        CHECK(rep.worst_margin <= 2.5e-4);  // equality within solver error
    }
    SUBCASE("a bump above q0 stays above q_t") {
        Field u0 = sin_field(g, 0.6, 0.1);  // >= 0.5 everywhere
        SolveResult res = solve_logistic(u0, p, a, a, opts);
        ComparisonReport rep = comparison_check(res, p, a, a, 0.5, 1e-4);
        CHECK(rep.pass);
    }
    SUBCASE("u0 == theta dominates trivially") {
        SolveResult res = solve_logistic(Field(g, p.theta()), p, a, a, opts);
        ComparisonReport rep = comparison_check(res, p, a, a, 0.5, 1e-6);
        CHECK(rep.pass);
    }
    SUBCASE("failing kernel hypothesis is reported") {
        Grid gd(1, 20.0, 128);
        Kernel ap = build_kernel(KernelProfile::gaussian(1.0), gd);
        Kernel am = build_kernel(KernelProfile::gaussian(0.3), gd);
        SolveOptions o2 = opts;
        o2.horizon = 1.0;
        o2.store_every = 40;
        SolveResult res = solve_logistic(Field(gd, 0.9), p, ap, am, o2);
        CHECK_THROWS_AS(comparison_check(res, p, ap, am, 0.9, 1e-4), AssumptionViolation);
    }
}

TEST_CASE("taylor hierarchy: zero perturbation gives zero coefficients") {
    Grid g(1, 16.0, 16);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    TaylorOptions opts;
    opts.n_max = 4;
    opts.horizon = 1.0;
    opts.dt = 1e-3;
    opts.store_every = 1000;
    TaylorResult res = solve_taylor_hierarchy(Field(g, 0.0), p, a, a, opts);
    CHECK(res.theta == doctest::Approx(p.theta()));
    for (int n = 1; n <= opts.n_max; ++n)
        for (double s : res.sup_norm[std::size_t(n)]) CHECK(s == 0.0);
    // k_0 is pinned to theta
    for (double s : res.sup_norm[0]) CHECK(s == doctest::Approx(p.theta()));
}

TEST_CASE("taylor hierarchy: constant perturbation decays at exactly gamma") {
    Grid g(1, 20.0, 64);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    TaylorOptions opts;
    opts.n_max = 3;
    opts.horizon = 2.0;
    opts.dt = 1e-3;
    opts.store_every = 2000;
    TaylorResult res = solve_taylor_hierarchy(Field(g, 1.0), p, a, a, opts);
    CHECK(std::abs(res.gamma - p.beta_rate()) <= 1e-12);  // J_theta >= 0 here
    for (std::size_t i = 0; i < res.norm_times.size(); ++i) {
        double expect = p.theta() * std::exp(-res.gamma * res.norm_times[i]);
        CHECK(std::abs(res.sup_norm[1][i] - expect) <= 1e-10);
    }
}

TEST_CASE("taylor hierarchy: a spike decays strictly faster than the sup bound") {
    Grid g(1, 16.0, 32);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    Field xi(g);
    xi.v[5] = 1.0;
    TaylorOptions opts;
    opts.n_max = 1;
    opts.horizon = 1.0;
    opts.dt = 1e-3;
    opts.store_every = 1000;
    TaylorResult res = solve_taylor_hierarchy(xi, p, a, a, opts);
    for (std::size_t i = 0; i < res.norm_times.size(); ++i) {
        double t = res.norm_times[i];
        double bound = p.theta() * std::exp(-res.gamma * t);
        if (t == 0.0) {
            CHECK(res.sup_norm[1][i] == doctest::Approx(bound));
        } else if (t >= 0.1) {
            // dispersal spreads the spike: strictly below the sup bound
            CHECK(res.sup_norm[1][i] < (1.0 - 1e-3) * bound);
        } else {
            CHECK(res.sup_norm[1][i] <= bound + 1e-12);
        }
    }
}

TEST_CASE("taylor hierarchy: first coefficient is linear in xi") {
    Grid g(1, 20.0, 32);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    Field xi = sin_field(g, 0.2, 1.0);
    Field xi2 = 2.0 * xi;
    TaylorOptions opts;
    opts.n_max = 2;
    opts.horizon = 1.0;
    opts.dt = 1e-3;
    opts.store_every = 500;
    TaylorResult r1 = solve_taylor_hierarchy(xi, p, a, a, opts);
    TaylorResult r2 = solve_taylor_hierarchy(xi2, p, a, a, opts);
    for (std::size_t m = 0; m < r1.coeff[1].size(); ++m) {
        Field diff = r2.coeff[1].frame(m) - 2.0 * r1.coeff[1].frame(m);
        CHECK(diff.sup_norm() <= 1e-10);
    }
}

TEST_CASE("taylor series truncation reconstructs the nonlinear solution") {
    Grid g(1, 20.0, 64);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.0), g);
    Field xi = sin_field(g, 0.0, 1.0);
    const double lambda = 0.1;
    const int n_max = 6;

    TaylorOptions topts;
    topts.n_max = n_max;
    topts.horizon = 2.0;
    topts.dt = 2e-3;
    topts.store_every = 250;
    TaylorResult hier = solve_taylor_hierarchy(xi, p, a, a, topts);

    Field u0(g);
    for (std::size_t i = 0; i < u0.size(); ++i)
        u0.v[i] = p.theta() * std::exp(lambda * xi.v[i]);
    SolveOptions sopts;
    sopts.horizon = topts.horizon;
    sopts.dt = topts.dt;
    sopts.store_every = topts.store_every;
    SolveResult logist = solve_logistic(u0, p, a, a, sopts);

    // tail bound theta * sum_{n > n_max} C_n (lambda ||xi||)^n / n!
    double x = lambda * xi.sup_norm();
    double tail = 0.0;
    {
        double beta = p.beta_rate();
        std::vector<double> cn(31, 0.0);
        cn[1] = 1.0;
        for (int n = 2; n <= 30; ++n) {
            auto row = binomial_row(n);
            double acc = 0.0;
            for (int l = 1; l <= n - 1; ++l)
                acc += double(row[std::size_t(l)]) * cn[std::size_t(l)] * cn[std::size_t(n - l)];
            cn[std::size_t(n)] = 1.0 + beta / hier.gamma * acc;
        }
        double fact = 1.0;
        for (int n = 1; n <= 30; ++n) {
            fact *= double(n);
            if (n > n_max) tail += cn[std::size_t(n)] * std::pow(x, n) / fact;
        }
        tail *= p.theta();
    }

    double worst = 0.0;
    for (std::size_t m = 0; m < logist.series.size(); ++m) {
        Field sum(g);
        double lam_pow = 1.0, fact = 1.0;
        for (int n = 0; n <= n_max; ++n) {
            if (n > 0) {
                lam_pow *= lambda;
                fact *= double(n);
            }
            const Field& kn = hier.coeff[std::size_t(n)].frame(m);
            for (std::size_t i = 0; i < sum.size(); ++i) sum.v[i] += lam_pow / fact * kn.v[i];
        }
        worst = std::max(worst, (sum - logist.series.frame(m)).sup_norm());
    }
    CHECK(worst <= tail + 5.0 * topts.dt * topts.dt);
}

TEST_CASE("stored series satisfies the mild integral form to second order") {
    Grid g(1, 16.0, 16);
    ModelParams p = demo_params();
    Kernel a = build_kernel(KernelProfile::gaussian(1.2), g);
    Field u0 = sin_field(g, 0.6, 0.3);

    auto residual_at = [&](double dt) {
        SolveOptions opts;
        opts.horizon = 1.0;
        opts.dt = dt;
        opts.store_every = 1;
        SolveResult res = solve_logistic(u0, p, a, a, opts);
        return mild_form_residual(res, p, a, a);
    };
    double r1 = residual_at(0.02);
    double r2 = residual_at(0.01);
    CHECK(r1 / r2 >= 3.0);  // second-order self-convergence
    CHECK(r1 <= 20.0 * 0.02 * 0.02);
}

TEST_CASE("binomial rows are exact") {
    auto r5 = binomial_row(5);
    CHECK(r5[2] == 10);
    CHECK(r5[5] == 1);
    auto r30 = binomial_row(30);
    std::uint64_t sum = 0;
    for (auto v : r30) sum += v;
    CHECK(sum == (1ull << 30));
    CHECK(r30[15] == 155117520ull);
    CHECK_THROWS_AS(binomial_row(70), DomainError);
}
