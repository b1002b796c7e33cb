#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "nfk/cli.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_config() {
    return json{
        {"grid", {{"d", 1}, {"L", 16.0}, {"N", 32}}},
        {"model", {{"kappa_plus", 2.0}, {"kappa_minus", 1.0}, {"m", 1.0}}},
        {"kernels",
         {{"a_plus", {{"type", "gaussian"}, {"sigma", 1.0}}},
          {"a_minus", {{"type", "gaussian"}, {"sigma", 1.0}}}}},
        {"solver", {{"T", 1.0}, {"dt", 0.01}, {"store_every", 10}}},
        {"monte_carlo", {{"n_paths", 200}, {"master_seed", 4242}}},
        {"experiment", json::object()},
    };
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nfk_cli_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

json load_report(const fs::path& run_dir) {
    json report;
    std::ifstream is(run_dir / "report.json");
    REQUIRE(is.good());
    is >> report;
    return report;
}

}  // namespace

TEST_CASE("invalid configurations are rejected with exit code 2 and full error lists") {
    TempDir tmp;
    json cfg = base_config();
    cfg["grid"]["N"] = 2;
    cfg["model"].erase("m");
    cfg["solver"]["T"] = 1.05;  // not a multiple of dt... (it is: 105 steps) use dt mismatch
    cfg["solver"]["dt"] = 0.4;
    auto out = nfk::cli::run_experiment("solve", cfg, tmp.path, {std::nullopt, std::nullopt, true});
    CHECK(out.exit_code == 2);
    std::string msg = out.report.value("error", "");
    CHECK(msg.find("grid.N") != std::string::npos);
    CHECK(msg.find("model.m") != std::string::npos);
    CHECK(msg.find("solver.T") != std::string::npos);

    auto bad_sub = nfk::cli::run_experiment("frobnicate", base_config(), tmp.path,
                                            {std::nullopt, std::nullopt, true});
    CHECK(bad_sub.exit_code == 2);
}

TEST_CASE("solve run: artifacts, stationary flag, fresh run directories") {
    TempDir tmp;
    json cfg = base_config();
    cfg["experiment"] = {{"u0", {{"type", "theta"}}}};
    auto out = nfk::cli::run_experiment("solve", cfg, tmp.path, {std::nullopt, std::nullopt, true});
    REQUIRE(out.exit_code == 0);
    CHECK(fs::exists(out.run_dir / "report.json"));
    CHECK(fs::exists(out.run_dir / "norms.csv"));
    CHECK(fs::exists(out.run_dir / "fields" / "manifest.json"));
    CHECK(fs::exists(out.run_dir / "fields" / "frame_000000.bin"));
    json report = load_report(out.run_dir);
    CHECK(report["results"]["stationary"].get<bool>());
    CHECK(report["derived"]["theta"].get<double>() == doctest::Approx(1.0));
    CHECK(report["derived"]["j_theta_nonneg"].get<bool>());

    auto again = nfk::cli::run_experiment("solve", cfg, tmp.path,
                                          {std::nullopt, std::nullopt, true});
    CHECK(again.exit_code == 0);
    CHECK(again.run_dir != out.run_dir);  // runs never overwrite
}

TEST_CASE("assumptions scan: clean pair passes, dominating narrow kernel fails") {
    TempDir tmp;
    json cfg = base_config();
    cfg["experiment"] = {{"n_scan", 21}};
    auto ok = nfk::cli::run_experiment("assumptions", cfg, tmp.path,
                                       {std::nullopt, std::nullopt, true});
    CHECK(ok.exit_code == 0);
    CHECK(ok.report["results"]["all_nonneg"].get<bool>());
    CHECK(fs::exists(ok.run_dir / "scan.csv"));

    json bad = cfg;
    bad["grid"]["N"] = 128;
    bad["kernels"]["a_minus"] = {{"type", "gaussian"}, {"sigma", 0.3}};
    auto viol = nfk::cli::run_experiment("assumptions", bad, tmp.path,
                                         {std::nullopt, std::nullopt, true});
    CHECK(viol.exit_code == 1);
    CHECK_FALSE(viol.report["results"]["all_nonneg"].get<bool>());
    CHECK(!viol.report["results"]["violations"].empty());
}

TEST_CASE("fk-verify runs the triangle and reports residuals") {
    TempDir tmp;
    json cfg = base_config();
    cfg["solver"] = {{"T", 0.5}, {"dt", 1.0 / 128.0}, {"store_every", 64}};
    cfg["monte_carlo"] = {{"n_paths", 400}, {"master_seed", 31415}};
    cfg["experiment"] = {{"t", 0.5},
                         {"w_amplitude", 0.4},
                         {"duhamel_terms", 5},
                         {"duhamel_dt", 0.5 / 64.0},
                         {"eval_stride", 8},
                         {"dump_paths", true}};
    auto out = nfk::cli::run_experiment("fk-verify", cfg, tmp.path,
                                        {std::nullopt, std::nullopt, true});
    CHECK(out.exit_code == 0);
    CHECK(fs::exists(out.run_dir / "triangle.csv"));
    CHECK(fs::exists(out.run_dir / "paths.csv"));
    CHECK(out.report["results"]["det_gap"].get<double>() <= 1e-4);
    CHECK(out.report["results"]["mc_worst_z_vs_pde"].get<double>() <= 3.0);
}

TEST_CASE("reports are byte-identical across reruns modulo the timestamp") {
    TempDir tmp;
    json cfg = base_config();
    cfg["solver"] = {{"T", 0.5}, {"dt", 1.0 / 128.0}, {"store_every", 64}};
    cfg["monte_carlo"] = {{"n_paths", 300}, {"master_seed", 2718}};
    cfg["experiment"] = {{"t", 0.5},
                         {"w_amplitude", 0.4},
                         {"duhamel_terms", 4},
                         {"duhamel_dt", 0.5 / 32.0},
                         {"eval_stride", 8}};
    auto a = nfk::cli::run_experiment("fk-verify", cfg, tmp.path / "a",
                                      {std::nullopt, std::nullopt, true});
    auto b = nfk::cli::run_experiment("fk-verify", cfg, tmp.path / "b",
                                      {std::nullopt, std::nullopt, true});
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    json ra = load_report(a.run_dir);
    json rb = load_report(b.run_dir);
    ra.erase("timestamp");
    rb.erase("timestamp");
    CHECK(ra.dump() == rb.dump());

    // the seed override must change the sampled results
    auto c = nfk::cli::run_experiment("fk-verify", cfg, tmp.path / "c",
                                      {std::uint64_t(999), std::nullopt, true});
    REQUIRE(c.exit_code == 0);
    json rc = load_report(c.run_dir);
    CHECK(rc["results"]["mc_worst_z_vs_pde"].get<double>() !=
          ra["results"]["mc_worst_z_vs_pde"].get<double>());
}

TEST_CASE("stability run produces envelopes, fit, and plot data") {
    TempDir tmp;
    json cfg = base_config();
    cfg["solver"] = {{"T", 6.0}, {"dt", 0.01}, {"store_every", 100}};
    cfg["experiment"] = {{"u0", {{"type", "constant"}, {"value", 0.5}}},
                         {"block_length", 1.0},
                         {"n_blocks", 5},
                         {"window_lo", 3.0},
                         {"window_hi", 6.0}};
    auto out = nfk::cli::run_experiment("stability", cfg, tmp.path,
                                        {std::nullopt, std::nullopt, true});
    REQUIRE(out.exit_code == 0);
    CHECK(out.report["results"]["sandwich"]["ok"].get<bool>());
    CHECK(out.report["results"]["monotone_norm"].get<bool>());
    CHECK(out.report["results"]["fit"]["slope"].get<double>() <= -0.95);
    CHECK(out.report["results"]["envelope"]["cross_bounds_ok"].get<bool>());
    CHECK(out.report["results"]["envelope"]["rate_at_zero"].get<double>() ==
          doctest::Approx(1.0));

    CHECK(nfk::cli::emit_plotdata(out.run_dir, true) == 0);
    CHECK(fs::exists(out.run_dir / "plots" / "stability.csv"));
    std::ifstream ps(out.run_dir / "plots" / "stability.csv");
    std::string header;
    std::getline(ps, header);
    CHECK(header == "t,log_norm,envelope_low,envelope_high");

    // plotdata on a directory without reports is a no-op
    fs::path empty = tmp.path / "empty";
    fs::create_directories(empty);
    CHECK(nfk::cli::emit_plotdata(empty, true) == 0);
}

TEST_CASE("dependent experiments abort with exit 1 when the kernel hypothesis fails") {
    TempDir tmp;
    json cfg = base_config();
    cfg["grid"]["N"] = 128;
    cfg["kernels"]["a_minus"] = {{"type", "gaussian"}, {"sigma", 0.3}};
    cfg["solver"] = {{"T", 6.0}, {"dt", 0.01}, {"store_every", 100}};
    cfg["experiment"] = {{"u0", {{"type", "constant"}, {"value", 0.5}}},
                         {"block_length", 1.0},
                         {"n_blocks", 5}};
    auto out = nfk::cli::run_experiment("stability", cfg, tmp.path,
                                        {std::nullopt, std::nullopt, true});
    CHECK(out.exit_code == 1);
    std::string what = out.report["results"]["assumption_violation"].get<std::string>();
    CHECK(what.find("J_theta") != std::string::npos);
}

TEST_CASE("taylor run wires the coefficient machinery together") {
    TempDir tmp;
    json cfg = base_config();
    cfg["solver"] = {{"T", 1.0}, {"dt", 0.002}, {"store_every", 100}};
    cfg["experiment"] = {{"xi", {{"type", "cos"}, {"amplitude", 1.0}, {"mode", 1.0}}},
                        {"n_max", 4}};
    auto out = nfk::cli::run_experiment("taylor", cfg, tmp.path,
                                        {std::nullopt, std::nullopt, true});
    REQUIRE(out.exit_code == 0);
    CHECK(out.report["results"]["coef_ok"].get<bool>());
    CHECK(out.report["results"]["identity_ok"].get<bool>());
    CHECK(out.report["results"]["series_ok"].get<bool>());
    CHECK(out.report["results"]["decay_bound"]["pass"].get<bool>());
    CHECK(out.report["results"]["k1_bound"]["pass"].get<bool>());
    CHECK(fs::exists(out.run_dir / "taylor_bound.csv"));
    CHECK(fs::exists(out.run_dir / "cn.csv"));
}

TEST_CASE("random-field run compares spectral and monte carlo moments") {
    TempDir tmp;
    json cfg = base_config();
    cfg["grid"] = {{"d", 1}, {"L", 20.0}, {"N", 64}};
    cfg["experiment"] = {{"spectrum", {{"alpha", 0.5}, {"amplitude", 1.0}}},
                         {"times", {0.5, 1.0}},
                         {"n_samples", 800}};
    auto out = nfk::cli::run_experiment("random-field", cfg, tmp.path,
                                        {std::nullopt, std::nullopt, true});
    REQUIRE(out.exit_code == 0);
    CHECK(out.report["results"]["mc_worst_z"].get<double>() <= 3.0);
    CHECK(fs::exists(out.run_dir / "second_moment.csv"));
}
