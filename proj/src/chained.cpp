#include "gcmi/chained.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "gcmi/error.hpp"
#include "gcmi/parallel.hpp"
#include "gcmi/random.hpp"

namespace gcmi {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Most frequent level, lowest index on ties.
double mode_of(const std::vector<int>& counts) {
    const auto it = std::max_element(counts.begin(), counts.end());
    return static_cast<double>(std::distance(counts.begin(), it));
}

Matrix gather(const Matrix& source, std::span<const Eigen::Index> rows, Eigen::Index skip_col) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols() - 1);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        Eigen::Index k = 0;
        for (Eigen::Index c = 0; c < source.cols(); ++c) {
            if (c != skip_col) out(i, k++) = source(r, c);
        }
    }
    return out;
}

struct ColumnImputation {
    std::vector<Eigen::Index> rows;
    std::vector<double> values;
    bool trained = false;
};

ColumnImputation impute_one_column(const Matrix& source, const Mask& mask, const Schema& schema, int j,
                                   const GcmiConfig& cfg, std::uint64_t seed) {
    ColumnImputation out;
    out.rows = mask.missing_rows(j);
    const auto observed = mask.observed_rows(j);
    const auto& col = schema[static_cast<std::size_t>(j)];
    if (static_cast<int>(observed.size()) < cfg.min_observed_rows) {
        spdlog::warn("column '{}' has only {} observed rows; keeping its initial fill", col.name, observed.size());
        return out;
    }

    std::vector<double> target(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) target[i] = source(observed[i], j);

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, static_cast<std::uint64_t>(j), 0);
    if (tc.hidden_dims.empty()) tc.hidden_dims = scale_architecture(source.rows(), source.cols());

    try {
        const auto fit = train_gcin(gather(source, observed, j), target, col.kind, tc, col.level_count(), j);
        out.values = impute_column(fit.pair, gather(source, out.rows, j), derive_seed(seed, static_cast<std::uint64_t>(j), 1));
    } catch (const Error& e) {
        throw Error(e.kind(), "column '" + col.name + "': " + e.what());
    }
    out.trained = true;
    return out;
}

} // namespace

std::string_view to_string(ColumnParallelism mode) {
    return mode == ColumnParallelism::sequential ? "sequential" : "snapshot_parallel";
}

ColumnParallelism column_parallelism_from_string(std::string_view name) {
    if (name == "sequential") return ColumnParallelism::sequential;
    if (name == "snapshot_parallel") return ColumnParallelism::snapshot_parallel;
    fail(ErrorKind::invalid_argument, "unknown column_parallelism '" + std::string(name) + "'");
}

std::string_view to_string(ChainStop stop) {
    switch (stop) {
    case ChainStop::both_stabilized: return "both_stabilized";
    case ChainStop::max_iters: return "max_iters";
    case ChainStop::nothing_to_impute: return "nothing_to_impute";
    }
    return "unknown";
}

void GcmiConfig::validate() const {
    require(max_chain_iters >= 1, ErrorKind::invalid_argument, "max_chain_iters must be at least 1");
    require(m_imputations >= 1, ErrorKind::invalid_argument, "m_imputations must be at least 1");
    require(min_observed_rows >= 2, ErrorKind::invalid_argument, "min_observed_rows must be at least 2");
    train.validate();
}

Matrix initial_fill(const DataMatrix& dm) {
    Matrix out = dm.values();
    for (Eigen::Index c = 0; c < dm.cols(); ++c) {
        const auto& col = dm.column(c);
        const auto observed = dm.mask().observed_rows(c);
        require(!observed.empty(), ErrorKind::unimputable_column,
                "column '" + col.name + "' has no observed values");
        if (observed.size() == static_cast<std::size_t>(dm.rows())) continue;

        double fill = 0.0;
        if (col.kind == ColumnKind::continuous) {
            for (auto r : observed) fill += dm.value(r, c);
            fill /= static_cast<double>(observed.size());
        } else {
            std::vector<int> counts(static_cast<std::size_t>(col.level_count()), 0);
            for (auto r : observed) ++counts[static_cast<std::size_t>(dm.value(r, c))];
            fill = mode_of(counts);
        }
        for (Eigen::Index r = 0; r < dm.rows(); ++r) {
            if (dm.is_missing(r, c)) out(r, c) = fill;
        }
    }
    return out;
}

std::vector<int> order_columns(const Mask& mask) {
    std::vector<int> order(static_cast<std::size_t>(mask.cols()));
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::int64_t> missing(order.size());
    for (std::size_t c = 0; c < order.size(); ++c) missing[c] = mask.column_count(static_cast<Eigen::Index>(c));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return missing[static_cast<std::size_t>(a)] < missing[static_cast<std::size_t>(b)];
    });
    return order;
}

Gamma convergence_gamma(const Matrix& x_new, const Matrix& x_old, const Mask& mask, const Schema& schema) {
    require(x_new.rows() == x_old.rows() && x_new.cols() == x_old.cols() && mask.rows() == x_new.rows() &&
                mask.cols() == x_new.cols() && static_cast<Eigen::Index>(schema.size()) == x_new.cols(),
            ErrorKind::shape, "convergence_gamma operands are not congruent");
    double diff2 = 0.0;
    double norm2 = 0.0;
    std::int64_t changed = 0;
    std::int64_t discrete_missing = 0;
    for (Eigen::Index r = 0; r < x_new.rows(); ++r) {
        for (Eigen::Index c = 0; c < x_new.cols(); ++c) {
            if (!mask(r, c)) continue;
            if (schema[static_cast<std::size_t>(c)].is_discrete()) {
                ++discrete_missing;
                changed += x_new(r, c) != x_old(r, c) ? 1 : 0;
            } else {
                const double d = x_new(r, c) - x_old(r, c);
                diff2 += d * d;
                norm2 += x_new(r, c) * x_new(r, c);
            }
        }
    }
    Gamma g;
    if (diff2 > 0.0) {
        g.num = norm2 > 0.0 ? diff2 / norm2 : std::numeric_limits<double>::infinity();
    }
    if (discrete_missing > 0) g.cat = static_cast<double>(changed) / static_cast<double>(discrete_missing);
    return g;
}

Matrix sweep(const Matrix& current, const Mask& mask, const Schema& schema, std::span<const int> order,
             const GcmiConfig& cfg, std::uint64_t seed, SweepStats* stats) {
    require(mask.rows() == current.rows() && mask.cols() == current.cols() &&
                static_cast<Eigen::Index>(schema.size()) == current.cols(),
            ErrorKind::shape, "sweep operands are not congruent");
    require(current.allFinite(), ErrorKind::invalid_argument, "sweep needs a completed matrix");

    std::vector<int> scheduled;
    for (int j : order) {
        if (mask.column_count(j) > 0) scheduled.push_back(j);
    }

    Matrix out = current;
    std::vector<ColumnImputation> results(scheduled.size());
    if (cfg.column_parallelism == ColumnParallelism::sequential) {
        for (std::size_t k = 0; k < scheduled.size(); ++k) {
            const int j = scheduled[k];
            results[k] = impute_one_column(out, mask, schema, j, cfg, seed);
            for (std::size_t i = 0; i < results[k].values.size(); ++i) out(results[k].rows[i], j) = results[k].values[i];
        }
    } else {
        parallel_for(scheduled.size(), cfg.threads, [&](std::size_t k) {
            results[k] = impute_one_column(current, mask, schema, scheduled[k], cfg, seed);
        });
        for (std::size_t k = 0; k < scheduled.size(); ++k) {
            for (std::size_t i = 0; i < results[k].values.size(); ++i) {
                out(results[k].rows[i], scheduled[k]) = results[k].values[i];
            }
        }
    }

    if (stats != nullptr) {
        *stats = {};
        for (std::size_t k = 0; k < scheduled.size(); ++k) {
            if (results[k].trained) {
                ++stats->trained_columns;
            } else {
                stats->fallback_columns.push_back(scheduled[k]);
            }
        }
    }
    return out;
}

ImputationResult gcmi_impute(const DataMatrix& dm, const GcmiConfig& cfg) {
    cfg.validate();
    require(dm.cols() >= 2, ErrorKind::invalid_argument, "imputation needs at least 2 columns");
    const auto start = std::chrono::steady_clock::now();

    const auto m = static_cast<std::size_t>(cfg.m_imputations);
    ImputationResult result;
    result.config = cfg;
    result.completed.resize(m);
    result.traces.resize(m);
    result.chain_seconds.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) result.chain_seeds.push_back(derive_seed(cfg.seed, 0x6368u, i));

    const Matrix filled = initial_fill(dm);
    if (!dm.has_missing()) {
        for (std::size_t i = 0; i < m; ++i) result.completed[i] = dm;
        result.wall_seconds = seconds_since(start);
        return result;
    }

    const auto order = order_columns(dm.mask());
    const unsigned chain_workers = std::min<unsigned>(std::max(1u, cfg.threads), static_cast<unsigned>(m));
    GcmiConfig inner = cfg;
    inner.threads = std::max(1u, cfg.threads / chain_workers);

    parallel_for(m, chain_workers, [&](std::size_t chain) {
        const auto chain_start = std::chrono::steady_clock::now();
        auto& trace = result.traces[chain];
        Matrix x = filled;
        Matrix best = filled;
        double best_score = std::numeric_limits<double>::infinity();
        Gamma prev;
        trace.stop = ChainStop::max_iters;
        for (int k = 0; k < cfg.max_chain_iters; ++k) {
            Matrix next;
            try {
                next = sweep(x, dm.mask(), dm.schema(), order, inner,
                             derive_seed(result.chain_seeds[chain], static_cast<std::uint64_t>(k)));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::numeric) throw;
                throw Error(ErrorKind::numeric, "sweep " + std::to_string(k) + ": " + e.what());
            }
            const Gamma g = convergence_gamma(next, x, dm.mask(), dm.schema());
            trace.sweeps.push_back(g);
            if (g.num + g.cat < best_score) {
                best_score = g.num + g.cat;
                best = next;
                trace.retained_sweep = k;
            }
            x = std::move(next);
            if (k > 0 && !(g.num < prev.num || g.cat < prev.cat)) {
                trace.stop = ChainStop::both_stabilized;
                break;
            }
            prev = g;
        }
        result.completed[chain] = dm.with_filled(best);
        result.chain_seconds[chain] = seconds_since(chain_start);
    });

    result.wall_seconds = seconds_since(start);
    return result;
}

Matrix pool_completed(std::span<const DataMatrix> completed) {
    require(!completed.empty(), ErrorKind::insufficient_imputations, "nothing to pool");
    const auto& first = completed.front();
    Matrix out = Matrix::Zero(first.rows(), first.cols());
    for (Eigen::Index c = 0; c < first.cols(); ++c) {
        const auto& col = first.column(c);
        for (Eigen::Index r = 0; r < first.rows(); ++r) {
            if (!col.is_discrete()) {
                double s = 0.0;
                for (const auto& dm : completed) s += dm.value(r, c);
                out(r, c) = s / static_cast<double>(completed.size());
            } else {
                std::vector<int> counts(static_cast<std::size_t>(col.level_count()), 0);
                for (const auto& dm : completed) ++counts[static_cast<std::size_t>(dm.value(r, c))];
                out(r, c) = mode_of(counts);
            }
        }
    }
    return out;
}

PooledEstimate rubin_pool(std::span<const std::pair<double, double>> estimates) {
    const auto m = estimates.size();
    require(m >= 2, ErrorKind::insufficient_imputations, "Rubin pooling needs at least 2 imputations");
    PooledEstimate out;
    for (const auto& [theta, var] : estimates) {
        require(var >= 0.0, ErrorKind::invalid_argument, "per-imputation variance must be non-negative");
        out.point += theta;
        out.within_var += var;
    }
    const double md = static_cast<double>(m);
    out.point /= md;
    out.within_var /= md;
    for (const auto& [theta, var] : estimates) out.between_var += (theta - out.point) * (theta - out.point);
    out.between_var /= md - 1.0;
    // W + (1 + 1/M) B with a single final division, so exact inputs such as
    // W = B = 1, M = 3 give the correctly rounded 7/3
    out.total_var = (md * out.within_var + (md + 1.0) * out.between_var) / md;
    return out;
}

} // namespace gcmi
