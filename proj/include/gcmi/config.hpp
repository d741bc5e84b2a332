#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcmi/chained.hpp"
#include "gcmi/eval.hpp"
#include "gcmi/io.hpp"
#include "gcmi/missingness.hpp"

namespace gcmi {

struct SimulateConfig {
    SyntheticSpec spec;
    bool include_outcome = true;
    std::string output = "simulated.csv";
};

struct AmputeConfig {
    std::string input; // empty: the simulate output inside output_dir
    AmputationSpec spec;
    std::vector<std::string> protected_columns{"Y"};
    std::string output = "amputed.csv";
    std::string mask_output = "mask.csv";
};

struct ImputeConfig {
    std::string input; // empty: the ampute output inside output_dir
    std::string prefix = "imputed";
    std::string manifest = "manifest.json";
    SchemaHints hints;
};

struct BenchmarkConfig {
    std::optional<SyntheticSpec> synthetic = SyntheticSpec{};
    std::string csv;
    std::vector<AmputationSpec> mechanisms{
        AmputationSpec::of(McarSpec{0.1}), AmputationSpec::of(McarSpec{0.3}), AmputationSpec::of(McarSpec{0.5})};
    std::vector<MethodSpec> methods{MethodSpec::gcmi(), MethodSpec::mean()};
    int mc_repeats = 100;
    RmseScale scale = RmseScale::normalized;
    std::string output = "benchmark"; // <output>.csv, <output>.json, <output>_raw.csv
    bool raw_dump = true;
    std::string dump_dir;
};

// Everything the command line can run, with defaults matching the reference
// hyperparameters. JSON keys mirror the field names; unknown keys are errors.
struct RunConfig {
    std::uint64_t seed = 0;
    unsigned threads = 0; // 0: available parallelism
    std::string output_dir = ".";
    std::string log_level = "info";
    GcmiConfig gcmi;
    SimulateConfig simulate;
    AmputeConfig ampute;
    ImputeConfig impute;
    BenchmarkConfig benchmark;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

Mechanism parse_mechanism(const nlohmann::json& doc);
AmputationSpec parse_amputation(const nlohmann::json& doc);

} // namespace gcmi
