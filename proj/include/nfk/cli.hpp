#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace nfk::cli {

// Exit codes: 0 pass, 1 bound/assumption violation, 2 configuration error,
// 3 numerical failure.
struct RunOutcome {
    int exit_code = 0;
    std::filesystem::path run_dir;
    nlohmann::json report;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    bool quiet = false;
};

// Runs one experiment subcommand (solve, fk-verify, stability, taylor,
// random-field, assumptions) into a fresh timestamped directory under out_dir.
RunOutcome run_experiment(const std::string& subcommand, const nlohmann::json& config,
                          const std::filesystem::path& out_dir, const Overrides& overrides = {});

RunOutcome run_experiment_file(const std::string& subcommand,
                               const std::filesystem::path& config_path,
                               const std::filesystem::path& out_dir,
                               const Overrides& overrides = {});

// Flattens the reports of a finished run into plot-ready CSV bundles under
// <run_dir>/plots. Missing inputs are listed and skipped.
int emit_plotdata(const std::filesystem::path& run_dir, bool quiet = false);

int main(int argc, char** argv);

}  // namespace nfk::cli
