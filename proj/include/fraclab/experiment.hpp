#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fraclab/drift.hpp"
#include "fraclab/stable_params.hpp"

namespace fraclab {
namespace harness {

using json = nlohmann::json;

std::string sha256_hex(const std::string& bytes);
std::string format_double(double v); // fixed shortest-roundtrip formatting

// Parses and validates the common blocks; throws ConfigError naming the
// offending field.
struct ExperimentConfig {
    StableParams params;
    double grid_Lt = 4.0, grid_Lx = 16.0;
    std::size_t grid_Nt = 32, grid_Nx = 64;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir;
    json raw;

    static ExperimentConfig parse(const json& j, const std::filesystem::path& default_out);
};

drift::DriftDescriptor parse_drift_descriptor(const json& j);

// Runs every experiment block in the config, writes artifacts plus a
// manifest (name -> sha256) and the resolved config next to them.
// Returns the manifest path.
std::filesystem::path run_experiment(const ExperimentConfig& cfg);

// Aggregates the per-experiment JSON reports referenced by a manifest into
// one summary CSV; throws MissingArtifact when a listed file is absent.
std::filesystem::path report(const std::filesystem::path& manifest_path);

// -- writers used by both the harness and the CLI subcommands -------------

void write_text(const std::filesystem::path& path, const std::string& body);

struct CsvWriter {
    std::string body;
    void header(const std::vector<std::string>& cols);
    void row(const std::vector<double>& vals);
    void row_mixed(const std::vector<std::string>& vals);
};

// individual experiment runners; each returns the JSON report it wrote
json run_kernel_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_morrey_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_akcheck_block(const ExperimentConfig& cfg, const json& block,
                       const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_solve_block(const ExperimentConfig& cfg, const json& block,
                     const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_evolve_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_sde_block(const ExperimentConfig& cfg, const json& block,
                   const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_krylov_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts);
json run_mv_block(const ExperimentConfig& cfg, const json& block,
                  const std::filesystem::path& out, std::vector<std::string>& artifacts);

} // namespace harness
} // namespace fraclab
