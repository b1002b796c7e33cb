#include "nfk/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nfk/errors.hpp"
#include "nfk/feynman_kac.hpp"
#include "nfk/io.hpp"
#include "nfk/jump.hpp"
#include "nfk/random_field.hpp"
#include "nfk/solver.hpp"
#include "nfk/stability.hpp"
#include "nfk/stats.hpp"

namespace nfk::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing with exhaustive error collection.

struct Validator {
    const json& root;
    std::vector<std::string> errors;

    const json* find(const std::string& path) const {
        const json* cur = &root;
        std::size_t pos = 0;
        while (pos < path.size()) {
            std::size_t dot = path.find('.', pos);
            std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
            if (!cur->is_object() || !cur->contains(key)) return nullptr;
            cur = &(*cur)[key];
            if (dot == std::string::npos) break;
            pos = dot + 1;
        }
        return cur;
    }

    void fail(const std::string& path, const std::string& why) { errors.push_back(path + ": " + why); }

    double num(const std::string& path, double fallback, bool required = false) {
        const json* j = find(path);
        if (!j) {
            if (required) fail(path, "missing");
            return fallback;
        }
        if (!j->is_number()) {
            fail(path, "must be a number");
            return fallback;
        }
        return j->get<double>();
    }

    std::int64_t integer(const std::string& path, std::int64_t fallback, bool required = false) {
        const json* j = find(path);
        if (!j) {
            if (required) fail(path, "missing");
            return fallback;
        }
        if (!j->is_number_integer()) {
            fail(path, "must be an integer");
            return fallback;
        }
        return j->get<std::int64_t>();
    }

    std::string str(const std::string& path, const std::string& fallback, bool required = false) {
        const json* j = find(path);
        if (!j) {
            if (required) fail(path, "missing");
            return fallback;
        }
        if (!j->is_string()) {
            fail(path, "must be a string");
            return fallback;
        }
        return j->get<std::string>();
    }

    void check(bool ok, const std::string& path, const std::string& why) {
        if (!ok) fail(path, why);
    }

    void throw_if_failed() const {
        if (errors.empty()) return;
        std::ostringstream msg;
        msg << "configuration invalid (" << errors.size() << " problem(s)):";
        for (const auto& e : errors) msg << "\n  - " << e;
        throw ConfigError(msg.str());
    }
};

KernelProfile parse_kernel_profile(Validator& v, const std::string& path) {
    std::string type = v.str(path + ".type", "gaussian", true);
    if (type == "gaussian") {
        double sigma = v.num(path + ".sigma", 1.0, true);
        v.check(sigma > 0.0, path + ".sigma", "must be positive");
        return KernelProfile::gaussian(sigma);
    }
    if (type == "tophat") {
        double radius = v.num(path + ".radius", 1.0, true);
        v.check(radius > 0.0, path + ".radius", "must be positive");
        return KernelProfile::tophat(radius);
    }
    if (type == "tabulated") {
        const json* j = v.find(path + ".values");
        std::vector<double> values;
        if (!j || !j->is_array()) {
            v.fail(path + ".values", "tabulated kernel needs an array of values");
        } else {
            for (const auto& x : *j) values.push_back(x.get<double>());
        }
        return KernelProfile::tabulated(std::move(values));
    }
    v.fail(path + ".type", "unknown kernel profile '" + type + "'");
    return KernelProfile::gaussian(1.0);
}

struct CommonConfig {
    Grid grid;
    ModelParams params;
    KernelProfile a_plus_profile = KernelProfile::gaussian(1.0);
    KernelProfile a_minus_profile = KernelProfile::gaussian(1.0);
    Kernel a_plus;
    Kernel a_minus;
    SignedKernel j_theta;
    SolveOptions solver;
    int n_paths = 1000;
    std::uint64_t master_seed = 0;
    json experiment;
};

CommonConfig parse_common(const json& config, const Overrides& ov) {
    Validator v{config, {}};

    int dim = int(v.integer("grid.d", 1, true));
    double extent = v.num("grid.L", 0.0, true);
    int n = int(v.integer("grid.N", 0, true));
    v.check(dim == 1 || dim == 2, "grid.d", "must be 1 or 2");
    v.check(extent > 0.0, "grid.L", "must be positive");
    v.check(n >= 4, "grid.N", "must be >= 4");

    ModelParams params;
    params.kappa_plus = v.num("model.kappa_plus", 0.0, true);
    params.kappa_minus = v.num("model.kappa_minus", 0.0, true);
    params.mortality = v.num("model.m", 0.0, true);
    v.check(params.kappa_plus > 0.0, "model.kappa_plus", "must be positive");
    v.check(params.kappa_minus > 0.0, "model.kappa_minus", "must be positive");
    v.check(params.mortality > 0.0 && params.mortality < params.kappa_plus, "model.m",
            "need 0 < m < kappa_plus");

    KernelProfile ap = parse_kernel_profile(v, "kernels.a_plus");
    KernelProfile am = parse_kernel_profile(v, "kernels.a_minus");

    SolveOptions solver;
    solver.horizon = v.num("solver.T", 1.0);
    solver.dt = v.num("solver.dt", 0.01);
    solver.store_every = int(v.integer("solver.store_every", 1));
    v.check(solver.horizon > 0.0, "solver.T", "must be positive");
    v.check(solver.dt > 0.0, "solver.dt", "must be positive");
    v.check(solver.store_every >= 1, "solver.store_every", "must be >= 1");
    if (solver.dt > 0.0 && solver.horizon > 0.0) {
        double steps = solver.horizon / solver.dt;
        v.check(std::abs(steps - std::round(steps)) < 1e-9, "solver.T", "must be a multiple of dt");
        if (solver.store_every >= 1 && std::abs(steps - std::round(steps)) < 1e-9) {
            auto nsteps = std::llround(steps);
            v.check(nsteps % solver.store_every == 0, "solver.store_every",
                    "must divide the step count");
        }
    }

    int n_paths = int(v.integer("monte_carlo.n_paths", 1000));
    v.check(n_paths >= 100, "monte_carlo.n_paths", "must be >= 100");
    std::uint64_t seed = std::uint64_t(v.integer("monte_carlo.master_seed", 0));

    v.throw_if_failed();

    CommonConfig cc;
    cc.grid = Grid(dim, extent, n);
    cc.params = params;
    cc.a_plus_profile = ap;
    cc.a_minus_profile = am;
    try {
        cc.a_plus = build_kernel(ap, cc.grid);
        cc.a_minus = build_kernel(am, cc.grid);
    } catch (const KernelError& e) {
        throw ConfigError(std::string("kernels: ") + e.what());
    }
    cc.j_theta = combined_kernel(params, cc.a_plus, cc.a_minus, params.theta());
    cc.solver = solver;
    cc.n_paths = ov.paths.value_or(n_paths);
    cc.master_seed = ov.seed.value_or(seed);
    cc.experiment = config.contains("experiment") ? config["experiment"] : json::object();
    return cc;
}

// ---------------------------------------------------------------------------
// Field constructors from config blocks.

double axis_coord(const Grid& g, std::size_t idx) { return g.unflatten(idx)[0] * g.h(); }

Field build_xi(const json& spec, const CommonConfig& cc) {
    std::string type = spec.value("type", "constant");
    Field xi(cc.grid);
    if (type == "constant") {
        double val = spec.value("value", 1.0);
        for (auto& x : xi.v) x = val;
    } else if (type == "cos") {
        double amp = spec.value("amplitude", 1.0);
        double mode = spec.value("mode", 1.0);
        for (std::size_t i = 0; i < xi.size(); ++i)
            xi.v[i] = amp * std::cos(2.0 * std::numbers::pi * mode * axis_coord(cc.grid, i) /
                                     cc.grid.extent);
    } else if (type == "spike") {
        xi.v[spec.value("cell", 0)] = spec.value("value", 1.0);
    } else if (type == "random") {
        if (!spec.contains("spectrum")) throw ConfigError("xi.random: missing spectrum block");
        SpectrumProfile prof;
        prof.alpha = spec["spectrum"].value("alpha", 0.5);
        prof.amplitude = spec["spectrum"].value("amplitude", 1.0);
        SpectrumWeights w = make_weights(prof, cc.grid);
        Spectral eng(cc.grid);
        xi = sample_field(w, eng, SeedSpec{cc.master_seed, spec.value("stream", 0ull)});
    } else {
        throw ConfigError("xi: unknown type '" + type + "'");
    }
    return xi;
}

Field build_u0(const json& spec, const CommonConfig& cc) {
    std::string type = spec.value("type", "theta");
    double theta = cc.params.theta();
    Field u0(cc.grid);
    if (type == "theta") {
        for (auto& x : u0.v) x = theta;
    } else if (type == "zero") {
        // all zeros
    } else if (type == "constant") {
        double val = spec.value("value", theta);
        for (auto& x : u0.v) x = val;
    } else if (type == "theta_exp") {
        double lambda = spec.value("lambda", 0.0);
        Field xi = build_xi(spec.contains("xi") ? spec["xi"] : json{{"type", "constant"}}, cc);
        for (std::size_t i = 0; i < u0.size(); ++i) u0.v[i] = theta * std::exp(lambda * xi.v[i]);
    } else if (type == "sin") {
        double base = spec.value("base", theta);
        double amp = spec.value("amplitude", 0.0);
        double mode = spec.value("mode", 1.0);
        for (std::size_t i = 0; i < u0.size(); ++i)
            u0.v[i] = base + amp * std::sin(2.0 * std::numbers::pi * mode *
                                            axis_coord(cc.grid, i) / cc.grid.extent);
    } else {
        throw ConfigError("u0: unknown type '" + type + "'");
    }
    return u0;
}

// ---------------------------------------------------------------------------
// Run directory and report plumbing.

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::filesystem::path fresh_run_dir(const std::filesystem::path& out_dir,
                                    const std::string& subcommand) {
    std::filesystem::create_directories(out_dir);
    std::string stem = subcommand + "-" + utc_timestamp();
    for (int k = 0;; ++k) {
        std::filesystem::path dir = out_dir / (k == 0 ? stem : stem + "-" + std::to_string(k));
        if (!std::filesystem::exists(dir)) {
            std::filesystem::create_directories(dir);
            return dir;
        }
    }
}

json derived_block(const CommonConfig& cc) {
    return json{{"theta", cc.params.theta()},
                {"beta", cc.params.beta_rate()},
                {"gamma", cc.params.gamma_rate(cc.j_theta)},
                {"j_theta_nonneg", cc.j_theta.nonneg},
                {"j_theta_l1", cc.j_theta.l1_mass},
                {"j_theta_integral", cc.j_theta.integral}};
}

void write_report(const std::filesystem::path& run_dir, const json& report) {
    std::ofstream os(run_dir / "report.json", std::ios::trunc);
    os << report.dump(2) << '\n';
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<double>>& columns) {
    std::ofstream os(path, std::ios::trunc);
    os.precision(17);
    os << header << '\n';
    if (columns.empty()) return;
    for (std::size_t r = 0; r < columns[0].size(); ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            os << columns[c][r] << (c + 1 == columns.size() ? '\n' : ',');
    }
}

std::vector<std::size_t> stride_points(const Grid& g, int stride) {
    std::vector<std::size_t> pts;
    for (std::size_t i = 0; i < g.total(); i += std::size_t(std::max(1, stride))) pts.push_back(i);
    return pts;
}

// ---------------------------------------------------------------------------
// Subcommand runners. Each returns (pass, results-json) and writes artifacts.

struct SubResult {
    bool pass = true;
    json results;
};

SubResult run_solve(const CommonConfig& cc, const std::filesystem::path& run_dir) {
    Field u0 = build_u0(cc.experiment.value("u0", json{{"type", "theta"}}), cc);
    SolveResult sol = solve_logistic(u0, cc.params, cc.a_plus, cc.a_minus, cc.solver);

    write_norms_csv(run_dir / "norms.csv", sol.norm_times, sol.sup_dev, sol.mean_value);
    std::filesystem::create_directories(run_dir / "fields");
    json manifest;
    manifest["grid"] = {{"d", cc.grid.dim}, {"L", cc.grid.extent}, {"N", cc.grid.n}};
    manifest["params"] = {{"kappa_plus", cc.params.kappa_plus},
                          {"kappa_minus", cc.params.kappa_minus},
                          {"m", cc.params.mortality}};
    json times = json::array();
    json files = json::array();
    for (std::size_t m = 0; m < sol.series.size(); ++m) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06zu.bin", m);
        write_lattice_binary(run_dir / "fields" / name, cc.grid, sol.series.frame(m).v);
        times.push_back(sol.series.time(m));
        files.push_back(name);
    }
    manifest["times"] = times;
    manifest["files"] = files;
    std::ofstream(run_dir / "fields" / "manifest.json") << manifest.dump(2) << '\n';

    double max_dev = 0.0;
    for (double d : sol.sup_dev) max_dev = std::max(max_dev, d);
    bool stationary = max_dev <= 1e-14;
    SubResult out;
    out.results = {{"stationary", stationary},
                   {"final_sup_dev", sol.sup_dev.back()},
                   {"max_sup_dev", max_dev},
                   {"dt_used", sol.dt_used},
                   {"refinements", sol.refinements},
                   {"frames", sol.series.size()}};
    return out;
}

SubResult run_fk_verify(const CommonConfig& cc, const std::filesystem::path& run_dir) {
    const json& ex = cc.experiment;
    double t = ex.value("t", 1.0);
    double w_amp = ex.value("w_amplitude", 0.5);
    double w_mode = ex.value("w_mode", 1.0);
    int n_terms = ex.value("duhamel_terms", 6);
    double dt_q = ex.value("duhamel_dt", t / 128.0);
    int stride = ex.value("eval_stride", std::max(1, cc.grid.n / 8));
    double sigma_tol = ex.value("mc_tolerance_sigma", 3.0);
    double det_tol = ex.value("det_tolerance", 1e-4);
    double jump_mass = ex.value("jump_mass", cc.params.kappa_plus);

    Kernel j = scale_kernel(cc.a_plus, jump_mass / cc.a_plus.mass);
    Field u0 = build_u0(ex.value("u0", json{{"type", "sin"},
                                            {"base", 1.0},
                                            {"amplitude", 0.5},
                                            {"mode", 1.0}}),
                        cc);
    Field w_field(cc.grid);
    for (std::size_t i = 0; i < w_field.size(); ++i)
        w_field.v[i] = w_amp * std::sin(2.0 * std::numbers::pi * w_mode *
                                        axis_coord(cc.grid, i) / cc.grid.extent);
    FieldSeries w = constant_in_time(w_field, t);

    SolveOptions popts = cc.solver;
    popts.horizon = t;
    std::size_t steps = std::size_t(std::llround(t / popts.dt));
    popts.store_every = int(steps);
    SolveResult pde = solve_perturbed(u0, w, j, popts);
    const Field& u_pde = pde.series.frame(pde.series.size() - 1);

    DuhamelResult duh = duhamel_series(u0, w, j, t, n_terms, dt_q);

    auto points = stride_points(cc.grid, stride);
    PointEstimate mc = fk_linear_estimate(u0, w, j, t, cc.n_paths,
                                          SeedSpec{cc.master_seed, 0}, points);

    Field det_diff = duh.partial_sum - u_pde;
    double det_gap = det_diff.sup_norm();
    double worst_z_pde = 0.0, worst_z_duh = 0.0;
    std::vector<double> col_pt, col_pde, col_duh, col_mc, col_err;
    for (std::size_t c = 0; c < points.size(); ++c) {
        double se = std::max(mc.stderr_mean[c], 1e-12);
        worst_z_pde = std::max(worst_z_pde, std::abs(mc.mean[c] - u_pde.v[points[c]]) / se);
        worst_z_duh = std::max(worst_z_duh, std::abs(mc.mean[c] - duh.partial_sum.v[points[c]]) / se);
        col_pt.push_back(double(points[c]));
        col_pde.push_back(u_pde.v[points[c]]);
        col_duh.push_back(duh.partial_sum.v[points[c]]);
        col_mc.push_back(mc.mean[c]);
        col_err.push_back(mc.stderr_mean[c]);
    }
    write_csv(run_dir / "triangle.csv", "point,pde,duhamel,mc,mc_stderr",
              {col_pt, col_pde, col_duh, col_mc, col_err});

    bool pass = det_gap <= det_tol && worst_z_pde <= sigma_tol && worst_z_duh <= sigma_tol;
    SubResult out;
    out.pass = pass;
    out.results = {{"det_gap", det_gap},
                   {"det_tolerance", det_tol},
                   {"duhamel_remainder_bound", duh.remainder_bound},
                   {"mc_worst_z_vs_pde", worst_z_pde},
                   {"mc_worst_z_vs_duhamel", worst_z_duh},
                   {"sigma_tolerance", sigma_tol},
                   {"estimator",
                    {{"points", points},
                     {"mean", mc.mean},
                     {"stderr", mc.stderr_mean},
                     {"n_paths", mc.n_paths},
                     {"master_seed", mc.seed.master_seed},
                     {"stream_base", mc.seed.stream_index}}},
                   {"n_paths", cc.n_paths},
                   {"eval_points", points.size()}};

    if (ex.contains("identity")) {
        const json& idj = ex["identity"];
        Field u0_log = build_u0(idj.value("u0", json{{"type", "sin"},
                                                     {"base", cc.params.theta()},
                                                     {"amplitude", 0.4 * cc.params.theta()},
                                                     {"mode", 1.0}}),
                                cc);
        SolveOptions lopts = cc.solver;
        lopts.horizon = t;
        lopts.store_every = idj.value("store_every", 20);
        SolveResult logist = solve_logistic(u0_log, cc.params, cc.a_plus, cc.a_minus, lopts);
        LogisticIdentityReport rep = fk_logistic_identity_check(
            logist.series, u0_log, cc.params, cc.j_theta, cc.a_minus, t, cc.n_paths,
            SeedSpec{cc.master_seed, 1u << 20}, points);
        double abs_tol = idj.value("abs_tolerance", 1e-3);
        bool id_pass = rep.max_residual <= sigma_tol * rep.max_stderr + abs_tol;
        out.pass = out.pass && id_pass;
        out.results["identity"] = {{"max_residual", rep.max_residual},
                                   {"max_stderr", rep.max_stderr},
                                   {"abs_tolerance", abs_tol},
                                   {"pass", id_pass}};
        std::vector<double> pt, lhs, rhs, err;
        for (std::size_t c = 0; c < rep.points.size(); ++c) {
            pt.push_back(double(rep.points[c]));
            lhs.push_back(rep.lhs[c]);
            rhs.push_back(rep.rhs_mean[c]);
            err.push_back(rep.rhs_stderr[c]);
        }
        write_csv(run_dir / "identity.csv", "point,lhs,rhs,rhs_stderr", {pt, lhs, rhs, err});
    }

    if (ex.value("dump_paths", false)) {
        PathEnsemble ens = sample_ensemble(j, std::vector<std::size_t>{0}, std::min(cc.n_paths, 32),
                                           t, SeedSpec{cc.master_seed, 0});
        std::ofstream os(run_dir / "paths.csv");
        dump_paths_csv(os, ens);
    }
    return out;
}

SubResult run_stability(const CommonConfig& cc, const std::filesystem::path& run_dir) {
    const json& ex = cc.experiment;
    Field u0 = build_u0(ex.value("u0", json{{"type", "constant"},
                                            {"value", 0.5 * cc.params.theta()}}),
                        cc);
    double theta = cc.params.theta();
    double block = ex.value("block_length", 1.0);
    int n_blocks = ex.value("n_blocks", 10);
    double rate_frac = ex.value("rate_tolerance_frac", 0.05);
    double sandwich_tol = ex.value("sandwich_tolerance",
                                   10.0 * cc.solver.dt * cc.solver.dt + 1e-9);
    double window_lo = ex.value("window_lo", 0.5 * cc.solver.horizon);
    double window_hi = ex.value("window_hi", cc.solver.horizon);

    if (!cc.j_theta.nonneg)
        throw AssumptionViolation("stability: J_theta has negative values; the decay theorem "
                                  "hypotheses fail for this kernel pair");
    if (u0.min_value() <= 0.0)
        throw AssumptionViolation("stability: initial condition must be bounded away from zero");

    SolveResult sol = solve_logistic(u0, cc.params, cc.a_plus, cc.a_minus, cc.solver);
    write_norms_csv(run_dir / "norms.csv", sol.norm_times, sol.sup_dev, sol.mean_value);

    double c0 = std::min(u0.min_value() - theta, 0.0);
    double d0 = std::max(u0.max_value() - theta, 0.0);
    double km = cc.params.kappa_minus;
    DecayEnvelope env = decay_envelope(
        c0, d0, [theta, km](double c, double) { return km * (theta + c); }, block, n_blocks);
    {
        std::vector<double> idx, cs, ds, rs;
        for (std::size_t k = 0; k < env.c_seq.size(); ++k) {
            idx.push_back(double(k));
            cs.push_back(env.c_seq[k]);
            ds.push_back(env.d_seq[k]);
            rs.push_back(env.rates[k]);
        }
        write_csv(run_dir / "envelope.csv", "block,c_n,d_n,rate", {idx, cs, ds, rs});
    }

    // Signed sandwich of u - theta between the envelope interpolants.
    double worst_lower = std::numeric_limits<double>::infinity();
    double worst_upper = std::numeric_limits<double>::infinity();
    double t_max_env = double(n_blocks) * block;
    json violations = json::array();
    for (std::size_t i = 0; i < sol.norm_times.size(); ++i) {
        double t = sol.norm_times[i];
        if (t > t_max_env) break;
        double lo = env.lower_at(t);
        double hi = env.upper_at(t);
        double lo_slack = (sol.min_value[i] - theta) - (lo - sandwich_tol);
        double hi_slack = (hi + sandwich_tol) - (sol.max_value[i] - theta);
        worst_lower = std::min(worst_lower, lo_slack);
        worst_upper = std::min(worst_upper, hi_slack);
        if ((lo_slack < 0.0 || hi_slack < 0.0) && violations.size() < 32)
            violations.push_back({{"t", t}, {"slack", std::min(lo_slack, hi_slack)}});
    }
    bool sandwich_ok = worst_lower >= 0.0 && worst_upper >= 0.0;

    // Monotone decay of the deviation norm.
    double dt2 = sol.dt_used * sol.dt_used;
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < sol.sup_dev.size(); ++i)
        if (sol.sup_dev[i + 1] > sol.sup_dev[i] + dt2) monotone = false;

    DecayFit fit = logistic_decay_rate(sol.norm_times, sol.sup_dev, window_lo, window_hi);
    double beta = cc.params.beta_rate();
    bool rate_ok = fit.stationary || fit.slope <= -beta + rate_frac * beta;

    SubResult out;
    out.pass = sandwich_ok && monotone && rate_ok && env.cross_bounds_ok;
    out.results = {{"envelope",
                    {{"c_final", env.c_seq.back()},
                     {"d_final", env.d_seq.back()},
                     {"limit_rate", env.limit_rate},
                     {"rate_at_zero", env.rate_at_zero},
                     {"cross_bounds_ok", env.cross_bounds_ok},
                     {"cross_worst", env.cross_worst}}},
                   {"sandwich", {{"ok", sandwich_ok},
                                 {"worst_lower_slack", worst_lower},
                                 {"worst_upper_slack", worst_upper},
                                 {"violations", violations},
                                 {"tolerance", sandwich_tol}}},
                   {"monotone_norm", monotone},
                   {"fit", {{"slope", fit.slope},
                            {"slope_ci", fit.slope_ci},
                            {"stationary", fit.stationary},
                            {"window", {window_lo, window_hi}},
                            {"target", -beta},
                            {"ok", rate_ok}}}};
    return out;
}

SubResult run_taylor(const CommonConfig& cc, const std::filesystem::path& run_dir) {
    const json& ex = cc.experiment;
    Field xi = build_xi(ex.value("xi", json{{"type", "cos"}, {"amplitude", 1.0}, {"mode", 1.0}}),
                        cc);
    int n_max = ex.value("n_max", 8);
    double theta = cc.params.theta();
    double beta = cc.params.beta_rate();

    if (!cc.j_theta.nonneg)
        throw AssumptionViolation("taylor: J_theta has negative values; gamma = beta fails");

    TaylorOptions topts;
    topts.n_max = n_max;
    topts.horizon = cc.solver.horizon;
    topts.dt = cc.solver.dt;
    topts.store_every = cc.solver.store_every;
    TaylorResult hier = solve_taylor_hierarchy(xi, cc.params, cc.a_plus, cc.a_minus, topts);
    double gamma = hier.gamma;

    double radius = generating_function_radius(beta, gamma);
    double xi_sup = xi.sup_norm();
    double lambda = ex.value("lambda", 0.5 * radius / std::max(xi_sup, 1e-12));
    double x_arg = std::abs(lambda) * xi_sup;
    if (!(x_arg < radius))
        throw DomainError("taylor: |lambda| ||xi|| is at or above the radius of the "
                          "generating function");

    // Coefficient recursion against the closed-form Taylor expansion.
    auto cn = cn_coefficients(beta, gamma, 30);
    auto h_taylor = generating_function_taylor(beta, gamma, 12);
    double coef_worst = 0.0;
    double x_half = 0.5 * radius;
    double fact = 1.0;
    for (int n = 1; n <= 10; ++n) {
        fact *= double(n);
        coef_worst = std::max(coef_worst, std::abs(h_taylor[std::size_t(n)] -
                                                   cn[std::size_t(n)] / fact) *
                                              std::pow(x_half, n));
    }
    double id_x = 0.9 * radius;
    double h_id = generating_function(id_x, beta, gamma);
    double id_residual = std::abs(h_id - (std::expm1(id_x) + beta / gamma * h_id * h_id));

    // Truncated lambda-series against the nonlinear solve.
    Field u0(cc.grid);
    for (std::size_t i = 0; i < u0.size(); ++i) u0.v[i] = theta * std::exp(lambda * xi.v[i]);
    SolveResult logist = solve_logistic(u0, cc.params, cc.a_plus, cc.a_minus, cc.solver);

    double series_gap = 0.0;
    for (std::size_t m = 0; m < logist.series.size(); ++m) {
        Field sum(cc.grid);
        double lam_pow = 1.0;
        double factn = 1.0;
        for (int n = 0; n <= n_max; ++n) {
            if (n > 0) {
                lam_pow *= lambda;
                factn *= double(n);
            }
            const Field& kn = hier.coeff[std::size_t(n)].frame(m);
            for (std::size_t i = 0; i < sum.size(); ++i)
                sum.v[i] += lam_pow / factn * kn.v[i];
        }
        Field diff = sum - logist.series.frame(m);
        series_gap = std::max(series_gap, diff.sup_norm());
    }
    // Dropped-tail estimate theta sum_{n>n_max} C_n x^n / n!.
    double tail = 0.0;
    {
        double factn = 1.0;
        for (int n = 1; n <= 30; ++n) {
            factn *= double(n);
            if (n > n_max) tail += cn[std::size_t(n)] * std::pow(x_arg, n) / factn;
        }
        tail *= theta;
    }
    double dt2_tol = ex.value("series_dt_factor", 5.0) * cc.solver.dt * cc.solver.dt;
    bool series_ok = series_gap <= tail + dt2_tol;

    double solver_tol = ex.value("bound_tolerance", dt2_tol);
    BoundReport anal = taylor_bound_check(logist.norm_times, logist.sup_dev, theta, gamma, beta,
                                          x_arg, solver_tol);
    BoundReport k1 = k1_decay_check(hier.norm_times, hier.sup_norm[1], theta, xi_sup, gamma,
                                    solver_tol);
    json anal_violations = json::array();
    {
        double h_val = generating_function(x_arg, beta, gamma);
        for (std::size_t i = 0; i < logist.norm_times.size() && anal_violations.size() < 32; ++i) {
            double bound = theta * std::exp(-gamma * logist.norm_times[i]) * h_val + solver_tol;
            if (logist.sup_dev[i] > bound)
                anal_violations.push_back(
                    {{"t", logist.norm_times[i]}, {"excess", logist.sup_dev[i] - bound}});
        }
    }

    {
        std::vector<double> ts, obs, bnd;
        double h_val = generating_function(x_arg, beta, gamma);
        for (std::size_t i = 0; i < logist.norm_times.size(); ++i) {
            ts.push_back(logist.norm_times[i]);
            obs.push_back(logist.sup_dev[i]);
            bnd.push_back(theta * std::exp(-gamma * logist.norm_times[i]) * h_val);
        }
        write_csv(run_dir / "taylor_bound.csv", "t,observed,bound", {ts, obs, bnd});
    }
    {
        std::vector<double> ns, cs;
        for (std::size_t n = 0; n < cn.size(); ++n) {
            ns.push_back(double(n));
            cs.push_back(cn[n]);
        }
        write_csv(run_dir / "cn.csv", "n,C_n", {ns, cs});
    }

    bool coef_ok = coef_worst <= 1e-8;
    bool id_ok = id_residual <= 1e-12;
    SubResult out;
    out.pass = coef_ok && id_ok && series_ok && anal.pass && k1.pass;
    out.results = {{"gamma", gamma},
                   {"radius", radius},
                   {"lambda", lambda},
                   {"coef_worst", coef_worst},
                   {"coef_ok", coef_ok},
                   {"identity_residual", id_residual},
                   {"identity_ok", id_ok},
                   {"series_gap", series_gap},
                   {"series_tail_bound", tail},
                   {"series_ok", series_ok},
                   {"decay_bound",
                    {{"pass", anal.pass},
                     {"worst_excess", anal.worst_excess},
                     {"violations", anal_violations}}},
                   {"k1_bound", {{"pass", k1.pass}, {"worst_excess", k1.worst_excess}}}};
    return out;
}

SubResult run_random_field(const CommonConfig& cc, const std::filesystem::path& run_dir) {
    const json& ex = cc.experiment;
    SpectrumProfile prof;
    prof.alpha = ex.value("spectrum", json::object()).value("alpha", 0.5);
    prof.amplitude = ex.value("spectrum", json::object()).value("amplitude", 1.0);
    std::string zm = ex.value("spectrum", json::object()).value("zero_mode", "nearest");
    if (zm == "nearest") prof.zero_mode = SpectrumProfile::ZeroMode::nearest;
    else if (zm == "zero") prof.zero_mode = SpectrumProfile::ZeroMode::zero;
    else if (zm == "value") {
        prof.zero_mode = SpectrumProfile::ZeroMode::value;
        prof.zero_value = ex["spectrum"].value("zero_value", 0.0);
    } else {
        throw ConfigError("random-field: unknown zero_mode '" + zm + "'");
    }
    if (ex.value("spectrum", json::object()).contains("cutoff_low"))
        prof.cutoff_low = ex["spectrum"]["cutoff_low"].get<double>();
    if (ex.value("spectrum", json::object()).contains("cutoff_high"))
        prof.cutoff_high = ex["spectrum"]["cutoff_high"].get<double>();

    JumpSymbolProfile symbol;
    symbol.b = ex.value("symbol", json::object()).value("b", 0.5);
    symbol.beta_spec = ex.value("symbol", json::object()).value("beta_spec", 2.0);

    int n_samples = ex.value("n_samples", 10000);
    double sigma_tol = ex.value("mc_tolerance_sigma", 3.0);

    SpectrumWeights weights = make_weights(prof, cc.grid);

    std::vector<double> ts, spec_vals, mc_vals, mc_cis;
    double worst_z = 0.0;
    for (const auto& tj : ex.value("times", json::array({1.0, 2.0, 4.0}))) {
        double t = tj.get<double>();
        double sv = second_moment_spectral(weights, cc.j_theta, cc.params, t);
        McMoment mc = mc_second_moment(weights, cc.j_theta, cc.params, t, n_samples,
                                       SeedSpec{cc.master_seed, 0});
        ts.push_back(t);
        spec_vals.push_back(sv);
        mc_vals.push_back(mc.estimate);
        mc_cis.push_back(1.96 * mc.stderr_mean);
        worst_z = std::max(worst_z, std::abs(mc.estimate - sv) / std::max(mc.stderr_mean, 1e-300));
    }
    write_csv(run_dir / "second_moment.csv", "t,spectral_value,mc_estimate,mc_ci",
              {ts, spec_vals, mc_vals, mc_cis});
    bool mc_ok = worst_z <= sigma_tol;

    SubResult out;
    out.results = {{"mc_worst_z", worst_z},
                   {"sigma_tolerance", sigma_tol},
                   {"n_samples", n_samples},
                   {"variance", weights.total()},
                   {"zero_mode_weight", weights.zero_mode()},
                   {"zero_mode_policy", zm}};
    out.pass = mc_ok;

    if (ex.contains("fit")) {
        const json& fj = ex["fit"];
        Grid fit_grid = cc.grid;
        if (fj.contains("grid")) {
            fit_grid = Grid(int(fj["grid"].value("d", 1)), fj["grid"].value("L", 4000.0),
                            int(fj["grid"].value("N", 32768)));
        }
        Kernel fap = build_kernel(cc.a_plus_profile, fit_grid);
        Kernel fam = build_kernel(cc.a_minus_profile, fit_grid);
        SignedKernel fjt = combined_kernel(cc.params, fap, fam, cc.params.theta());
        SpectrumProfile fprof = prof;
        if (fj.contains("zero_mode")) {
            std::string fzm = fj["zero_mode"].get<std::string>();
            fprof.zero_mode = fzm == "zero" ? SpectrumProfile::ZeroMode::zero
                                            : SpectrumProfile::ZeroMode::nearest;
        }
        SpectrumWeights fw = make_weights(fprof, fit_grid);

        double t_lo = fj.value("t_lo", 20.0);
        double t_hi = fj.value("t_hi", 200.0);
        int n_times = fj.value("n_times", 25);
        double tol = fj.value("tolerance", 0.05);
        std::vector<double> fts, fvals;
        for (int i = 0; i < n_times; ++i) {
            double t = t_lo * std::pow(t_hi / t_lo, double(i) / double(n_times - 1));
            fts.push_back(t);
            fvals.push_back(second_moment_spectral(fw, fjt, cc.params, t));
        }
        ExponentFitReport fit = decay_exponent_fit(fts, fvals, cc.params, fw, fjt, fprof, symbol,
                                                   t_lo, t_hi, tol);
        write_csv(run_dir / "fit_curve.csv", "t,second_moment", {fts, fvals});

        std::string status = fit.status == ExponentFitReport::Status::ok ? "ok"
                             : fit.status == ExponentFitReport::Status::exponential_branch
                                 ? "exponential_branch"
                                 : "inconclusive";
        out.results["fit"] = {{"status", status},
                              {"fitted_exponent", fit.fitted_exponent},
                              {"target_exponent", fit.target_exponent},
                              {"tolerance", fit.tolerance},
                              {"exponent_ok", fit.exponent_ok},
                              {"raw_bound_ok", fit.raw_bound_ok},
                              {"d1", fit.d1},
                              {"d2", fit.d2},
                              {"delta", fit.delta},
                              {"split_radius", fit.split_radius},
                              {"zero_mode_floor", fit.zero_mode_floor},
                              {"note", fit.note}};
        // An inconclusive window is reported, not failed; a completed fit must hit
        // the target.
        if (fit.status == ExponentFitReport::Status::ok)
            out.pass = out.pass && fit.exponent_ok && fit.raw_bound_ok;
    }
    return out;
}

SubResult run_assumptions(const CommonConfig& cc, const std::filesystem::path& run_dir) {
    int n_scan = cc.experiment.value("n_scan", 51);
    if (n_scan < 2) throw ConfigError("assumptions: n_scan must be >= 2");
    double theta = cc.params.theta();
    std::vector<double> kappas, flags, minima;
    std::vector<double> violations;
    for (int i = 0; i < n_scan; ++i) {
        double kappa = theta * double(i) / double(n_scan - 1);
        SignedKernel jk = combined_kernel(cc.params, cc.a_plus, cc.a_minus, kappa);
        double mn = *std::min_element(jk.values.begin(), jk.values.end());
        kappas.push_back(kappa);
        flags.push_back(jk.nonneg ? 1.0 : 0.0);
        minima.push_back(mn);
        if (!jk.nonneg) violations.push_back(kappa);
    }
    write_csv(run_dir / "scan.csv", "kappa,nonneg,min_value", {kappas, flags, minima});
    SubResult out;
    out.pass = violations.empty();
    out.results = {{"n_scan", n_scan},
                   {"all_nonneg", violations.empty()},
                   {"violations", violations},
                   {"theta", theta}};
    if (!violations.empty())
        out.results["violated_assumption"] =
            "kernel domination kappa+ a+ >= kappa kappa- a- fails at the listed kappa values";
    return out;
}

}  // namespace

RunOutcome run_experiment(const std::string& subcommand, const json& config,
                          const std::filesystem::path& out_dir, const Overrides& ov) {
    RunOutcome outcome;
    try {
        CommonConfig cc = parse_common(config, ov);
        outcome.run_dir = fresh_run_dir(out_dir, subcommand);

        json report;
        report["subcommand"] = subcommand;
        report["timestamp"] = utc_timestamp();
        report["config"] = config;
        report["config_hash"] = [&] {
            std::ostringstream hex;
            hex << std::hex << fnv1a(config.dump());
            return hex.str();
        }();
        report["derived"] = derived_block(cc);
        report["overrides"] = {{"n_paths", cc.n_paths}, {"master_seed", cc.master_seed}};

        SubResult sub;
        try {
            if (subcommand == "solve") sub = run_solve(cc, outcome.run_dir);
            else if (subcommand == "fk-verify") sub = run_fk_verify(cc, outcome.run_dir);
            else if (subcommand == "stability") sub = run_stability(cc, outcome.run_dir);
            else if (subcommand == "taylor") sub = run_taylor(cc, outcome.run_dir);
            else if (subcommand == "random-field") sub = run_random_field(cc, outcome.run_dir);
            else if (subcommand == "assumptions") sub = run_assumptions(cc, outcome.run_dir);
            else throw ConfigError("unknown subcommand '" + subcommand + "'");
        } catch (const AssumptionViolation& e) {
            report["results"] = {{"assumption_violation", e.what()}};
            report["pass"] = false;
            report["exit_code"] = 1;
            write_report(outcome.run_dir, report);
            outcome.exit_code = 1;
            outcome.report = report;
            if (!ov.quiet) std::cerr << "assumption violated: " << e.what() << '\n';
            return outcome;
        }

        report["results"] = sub.results;
        report["pass"] = sub.pass;
        report["exit_code"] = sub.pass ? 0 : 1;
        write_report(outcome.run_dir, report);
        outcome.report = report;
        outcome.exit_code = sub.pass ? 0 : 1;
        if (!ov.quiet)
            std::cout << subcommand << ": " << (sub.pass ? "pass" : "violation") << " ("
                      << outcome.run_dir.string() << ")\n";
        return outcome;
    } catch (const ConfigError& e) {
        if (!ov.quiet) std::cerr << "configuration error: " << e.what() << '\n';
        outcome.report = json{{"error", e.what()}};
        outcome.exit_code = 2;
        return outcome;
    } catch (const NumericalError& e) {
        if (!ov.quiet) std::cerr << "numerical failure: " << e.what() << '\n';
        outcome.report = json{{"error", e.what()}};
        outcome.exit_code = 3;
        return outcome;
    } catch (const DomainError& e) {
        if (!ov.quiet) std::cerr << "configuration error: " << e.what() << '\n';
        outcome.report = json{{"error", e.what()}};
        outcome.exit_code = 2;
        return outcome;
    }
}

RunOutcome run_experiment_file(const std::string& subcommand,
                               const std::filesystem::path& config_path,
                               const std::filesystem::path& out_dir, const Overrides& ov) {
    std::ifstream is(config_path);
    if (!is) {
        if (!ov.quiet) std::cerr << "configuration error: cannot open " << config_path << '\n';
        return {2, {}, {}};
    }
    json config;
    try {
        is >> config;
    } catch (const std::exception& e) {
        if (!ov.quiet) std::cerr << "configuration error: " << e.what() << '\n';
        return {2, {}, {}};
    }
    return run_experiment(subcommand, config, out_dir, ov);
}

int emit_plotdata(const std::filesystem::path& run_dir, bool quiet) {
    namespace fs = std::filesystem;
    if (!fs::exists(run_dir / "report.json")) {
        if (!quiet) std::cerr << "plotdata: no report.json in " << run_dir << ", nothing to do\n";
        return 0;
    }
    json report;
    std::ifstream(run_dir / "report.json") >> report;
    fs::create_directories(run_dir / "plots");
    std::vector<std::string> skipped;

    auto copy_csv = [&](const char* src, const char* dst) {
        if (fs::exists(run_dir / src)) {
            fs::copy_file(run_dir / src, run_dir / "plots" / dst,
                          fs::copy_options::overwrite_existing);
            return true;
        }
        skipped.push_back(src);
        return false;
    };

    std::string subcommand = report.value("subcommand", "");
    if (subcommand == "stability") {
        // (t, ln||u - theta||, envelope_low, envelope_high)
        if (fs::exists(run_dir / "norms.csv") && fs::exists(run_dir / "envelope.csv")) {
            std::ifstream nf(run_dir / "norms.csv");
            std::ifstream ef(run_dir / "envelope.csv");
            std::string line;
            std::getline(ef, line);
            std::vector<double> cs, ds, rs;
            while (std::getline(ef, line)) {
                double b, c, d, r;
                std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &b, &c, &d, &r);
                cs.push_back(c);
                ds.push_back(d);
                rs.push_back(r);
            }
            double block = report["config"]["experiment"].value("block_length", 1.0);
            std::ofstream os(run_dir / "plots" / "stability.csv", std::ios::trunc);
            os.precision(17);
            os << "t,log_norm,envelope_low,envelope_high\n";
            std::getline(nf, line);
            while (cs.size() >= 2 && std::getline(nf, line)) {
                double t, sup, mean;
                std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &sup, &mean);
                std::size_t n = std::min(std::size_t(t / block), cs.size() - 2);
                double decay = std::exp(-(t - double(n) * block) * rs[n]);
                os << t << ',' << (sup > 0 ? std::log(sup) : -745.0) << ',' << cs[n] * decay << ','
                   << ds[n] * decay << '\n';
            }
        } else {
            skipped.push_back("norms.csv/envelope.csv");
        }
    } else if (subcommand == "taylor") {
        copy_csv("taylor_bound.csv", "taylor.csv");
        copy_csv("cn.csv", "cn.csv");
    } else if (subcommand == "random-field") {
        copy_csv("second_moment.csv", "second_moment.csv");
        copy_csv("fit_curve.csv", "fit_curve.csv");
    } else if (subcommand == "fk-verify") {
        copy_csv("triangle.csv", "triangle.csv");
        copy_csv("identity.csv", "identity.csv");
    } else if (subcommand == "solve") {
        copy_csv("norms.csv", "norms.csv");
    }

    if (!quiet) {
        std::cout << "plotdata: wrote " << (run_dir / "plots").string() << '\n';
        for (const auto& s : skipped) std::cout << "plotdata: skipped missing " << s << '\n';
    }
    return 0;
}

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal jump-generator lab: deterministic solvers, Feynman-Kac Monte Carlo "
                 "cross-checks, and stability certificates"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "runs", run_dir;
    Overrides ov;
    std::uint64_t seed_val = 0;
    int paths_val = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "parent directory for run outputs");
        sub->add_option("--seed", seed_val, "override monte_carlo.master_seed");
        sub->add_option("--paths", paths_val, "override monte_carlo.n_paths");
        sub->add_flag("--quiet", ov.quiet, "suppress progress output");
    };

    std::vector<std::string> subs = {"solve", "fk-verify", "stability",
                                     "taylor", "random-field", "assumptions"};
    for (const auto& name : subs) add_common(app.add_subcommand(name));
    CLI::App* plot = app.add_subcommand("plotdata", "flatten a run directory into plot CSVs");
    plot->add_option("--run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
    plot->add_flag("--quiet", ov.quiet, "suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->get_name() == "plotdata") return emit_plotdata(run_dir, ov.quiet);

    if (chosen->count("--seed")) ov.seed = seed_val;
    if (chosen->count("--paths")) ov.paths = paths_val;
    return run_experiment_file(chosen->get_name(), config_path, out_dir, ov).exit_code;
}

}  // namespace nfk::cli
