#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "gcmi/data.hpp"
#include "gcmi/gcin.hpp"

namespace gcmi {

enum class ColumnParallelism {
    sequential,        // write each column back before training the next
    snapshot_parallel, // all columns train against the sweep-start matrix
};

enum class InitialFill { mean_mode };

std::string_view to_string(ColumnParallelism mode);
ColumnParallelism column_parallelism_from_string(std::string_view name);

struct GcmiConfig {
    int max_chain_iters = 20;
    int m_imputations = 5;
    ColumnParallelism column_parallelism = ColumnParallelism::sequential;
    InitialFill initial_fill = InitialFill::mean_mode;
    // Columns with fewer observed rows keep their initial fill.
    int min_observed_rows = 10;
    unsigned threads = 1;
    TrainConfig train;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const GcmiConfig&) const = default;
};

struct Gamma {
    double num = 0.0; // relative squared change of continuous imputations
    double cat = 0.0; // fraction of discrete imputations that changed

    bool operator==(const Gamma&) const = default;
};

enum class ChainStop { both_stabilized, max_iters, nothing_to_impute };

std::string_view to_string(ChainStop stop);

struct ConvergenceTrace {
    std::vector<Gamma> sweeps;
    ChainStop stop = ChainStop::nothing_to_impute;
    int retained_sweep = -1; // index into sweeps of the kept matrix, -1 for none

    bool operator==(const ConvergenceTrace&) const = default;
};

struct ImputationResult {
    std::vector<DataMatrix> completed;
    std::vector<ConvergenceTrace> traces;
    std::vector<std::uint64_t> chain_seeds;
    std::vector<double> chain_seconds;
    GcmiConfig config;
    double wall_seconds = 0.0;
};

struct PooledEstimate {
    double point = 0.0;
    double within_var = 0.0;
    double between_var = 0.0;
    double total_var = 0.0;
};

struct SweepStats {
    int trained_columns = 0;
    std::vector<int> fallback_columns; // too few observed rows
};

// Mean for continuous columns, mode (lowest level index on ties) for discrete
// ones. Returns the completed values; observed cells are copied verbatim.
Matrix initial_fill(const DataMatrix& dm);

// Column indices sorted by ascending missing fraction, ties in index order.
std::vector<int> order_columns(const Mask& mask);

// Sums run over cells missing in `mask` only; a kind with no such cells
// reports 0, as does 0/0.
Gamma convergence_gamma(const Matrix& x_new, const Matrix& x_old, const Mask& mask, const Schema& schema);

// One chained pass over `order`. `seed` fixes every GCIN and imputation draw.
Matrix sweep(const Matrix& current, const Mask& mask, const Schema& schema, std::span<const int> order,
             const GcmiConfig& cfg, std::uint64_t seed, SweepStats* stats = nullptr);

ImputationResult gcmi_impute(const DataMatrix& dm, const GcmiConfig& cfg);

// Element-wise pooled imputation: mean of continuous cells, most frequent
// level (lowest index on ties) for discrete ones.
Matrix pool_completed(std::span<const DataMatrix> completed);

// Rubin's rules over (estimate, variance) pairs from M >= 2 imputations.
PooledEstimate rubin_pool(std::span<const std::pair<double, double>> estimates);

} // namespace gcmi
