#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcmi/chained.hpp"
#include "gcmi/data.hpp"
#include "gcmi/missingness.hpp"

namespace gcmi {

// Mean/mode baseline; identical to the chained imputer's initial fill.
Matrix mean_impute(const DataMatrix& dm);

enum class RmseScale {
    normalized, // per-column min-max of the complete truth
    raw,
};

// Root mean squared error over masked cells. Discrete cells contribute a 0/1
// disagreement.
double rmse(const Matrix& truth, const Matrix& imputed, const Mask& mask, const Schema& schema,
            RmseScale scale = RmseScale::normalized);

enum class MethodKind { gcmi, mean, external };

struct MethodSpec {
    MethodKind kind = MethodKind::mean;
    std::string name;
    // External methods: path of the completed CSV for one repeat; the
    // placeholders {mechanism}, {level}, {index} and {repeat} are substituted.
    std::string path_pattern;

    static MethodSpec gcmi() { return {MethodKind::gcmi, "gcmi", {}}; }
    static MethodSpec mean() { return {MethodKind::mean, "mean", {}}; }
    static MethodSpec external(std::string name, std::string pattern) {
        return {MethodKind::external, std::move(name), std::move(pattern)};
    }
    bool operator==(const MethodSpec&) const = default;
};

struct BenchmarkSpec {
    // Exactly one data source: a synthetic generator (fresh data per repeat,
    // covariates only) or a complete CSV (fixed data, fresh masks).
    std::optional<SyntheticSpec> synthetic;
    std::filesystem::path csv_path;

    std::vector<AmputationSpec> mechanisms;
    std::vector<MethodSpec> methods;
    int mc_repeats = 100;
    GcmiConfig gcmi;
    RmseScale scale = RmseScale::normalized;
    unsigned threads = 1;
    // When set, every repeat's truth, amputed input and mask are written here
    // so external tools can impute the same datasets.
    std::filesystem::path dump_dir;
    std::uint64_t seed = 0;

    void validate() const;
};

struct BenchmarkRow {
    std::string method;
    std::string mechanism;
    double level = 0.0;
    double mean_rmse = 0.0;
    double sd = 0.0;
    double se = 0.0;
    int repeats = 0;
    double missing_rate = 0.0; // realised, averaged over repeats
};

struct RepeatRecord {
    std::string method;
    std::string mechanism;
    double level = 0.0;
    int repeat = 0;
    double rmse = 0.0;
};

struct BenchmarkTable {
    std::vector<BenchmarkRow> rows;
    std::vector<RepeatRecord> raw;

    const BenchmarkRow* find(const std::string& method, const std::string& mechanism, double level) const;
};

BenchmarkTable run_benchmark(const BenchmarkSpec& spec);

// Substitutes {mechanism}, {level}, {index}, {repeat} in an external path pattern.
std::string expand_pattern(const std::string& pattern, const std::string& mechanism, double level,
                           std::size_t index, int repeat);

void write_table_csv(const BenchmarkTable& table, std::ostream& out);
void write_raw_csv(const BenchmarkTable& table, std::ostream& out);
nlohmann::json table_to_json(const BenchmarkTable& table);

} // namespace gcmi
