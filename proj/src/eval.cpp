#include "gcmi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <spdlog/spdlog.h>

#include "gcmi/error.hpp"
#include "gcmi/io.hpp"
#include "gcmi/parallel.hpp"
#include "gcmi/random.hpp"

namespace gcmi {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

DataMatrix load_truth(const BenchmarkSpec& spec, int repeat) {
    if (spec.synthetic) {
        SyntheticSpec s = *spec.synthetic;
        s.seed = derive_seed(spec.seed, 0x7379u, static_cast<std::uint64_t>(repeat));
        auto data = gen_synthetic(s);
        return DataMatrix::complete(continuous_schema(s.p), std::move(data.x));
    }
    return read_csv(spec.csv_path);
}

Matrix run_external(const MethodSpec& method, const DataMatrix& amputed, const std::string& mechanism, double level,
                    std::size_t index, int repeat) {
    const std::string path = expand_pattern(method.path_pattern, mechanism, level, index, repeat);
    SchemaHints hints;
    for (const auto& col : amputed.schema()) hints[col.name] = {col.kind, col.levels};
    DataMatrix imputed;
    try {
        imputed = read_csv(std::filesystem::path(path), hints);
    } catch (const Error& e) {
        fail(ErrorKind::ingestion, "method '" + method.name + "' repeat " + std::to_string(repeat) + ": " + e.what());
    }
    require(imputed.rows() == amputed.rows() && imputed.cols() == amputed.cols(), ErrorKind::ingestion,
            "method '" + method.name + "' repeat " + std::to_string(repeat) + ": " + path + " has the wrong shape");
    for (Eigen::Index r = 0; r < amputed.rows(); ++r) {
        for (Eigen::Index c = 0; c < amputed.cols(); ++c) {
            if (amputed.is_missing(r, c) && imputed.is_missing(r, c)) {
                fail(ErrorKind::ingestion, "method '" + method.name + "' repeat " + std::to_string(repeat) + ": " +
                                               path + " leaves cell (" + std::to_string(r + 1) + ", " +
                                               amputed.column(c).name + ") missing");
            }
        }
    }
    return imputed.values();
}

} // namespace

Matrix mean_impute(const DataMatrix& dm) { return initial_fill(dm); }

double rmse(const Matrix& truth, const Matrix& imputed, const Mask& mask, const Schema& schema, RmseScale scale) {
    require(truth.rows() == imputed.rows() && truth.cols() == imputed.cols() && mask.rows() == truth.rows() &&
                mask.cols() == truth.cols() && static_cast<Eigen::Index>(schema.size()) == truth.cols(),
            ErrorKind::shape, "rmse operands are not congruent");
    const auto cells = mask.count();
    require(cells > 0, ErrorKind::undefined_metric, "rmse is undefined for an empty mask");

    double sum = 0.0;
    for (Eigen::Index c = 0; c < truth.cols(); ++c) {
        const bool discrete = schema[static_cast<std::size_t>(c)].is_discrete();
        double range = 1.0;
        if (!discrete && scale == RmseScale::normalized) {
            const double span = truth.col(c).maxCoeff() - truth.col(c).minCoeff();
            if (span > 0.0) range = span;
        }
        for (Eigen::Index r = 0; r < truth.rows(); ++r) {
            if (!mask(r, c)) continue;
            if (discrete) {
                sum += truth(r, c) != imputed(r, c) ? 1.0 : 0.0;
            } else {
                const double e = (truth(r, c) - imputed(r, c)) / range;
                sum += e * e;
            }
        }
    }
    return std::sqrt(sum / static_cast<double>(cells));
}

void BenchmarkSpec::validate() const {
    require(mc_repeats >= 1, ErrorKind::invalid_argument, "mc_repeats must be at least 1");
    require(!methods.empty(), ErrorKind::invalid_argument, "benchmark needs at least one method");
    require(!mechanisms.empty(), ErrorKind::invalid_argument, "benchmark needs at least one mechanism");
    require(synthetic.has_value() != !csv_path.empty(), ErrorKind::invalid_argument,
            "benchmark needs exactly one data source (synthetic or csv)");
    if (synthetic) synthetic->validate();
    for (const auto& m : methods) {
        if (m.kind == MethodKind::external) {
            require(!m.path_pattern.empty(), ErrorKind::invalid_argument,
                    "external method '" + m.name + "' needs a path pattern");
        }
    }
    if (std::any_of(methods.begin(), methods.end(), [](const auto& m) { return m.kind == MethodKind::gcmi; })) {
        gcmi.validate();
    }
}

std::string expand_pattern(const std::string& pattern, const std::string& mechanism, double level,
                           std::size_t index, int repeat) {
    std::string out = pattern;
    replace_all(out, "{mechanism}", mechanism);
    replace_all(out, "{level}", format_number(level));
    replace_all(out, "{index}", std::to_string(index));
    replace_all(out, "{repeat}", std::to_string(repeat));
    return out;
}

const BenchmarkRow* BenchmarkTable::find(const std::string& method, const std::string& mechanism, double level) const {
    for (const auto& r : rows) {
        if (r.method == method && r.mechanism == mechanism && r.level == level) return &r;
    }
    return nullptr;
}

BenchmarkTable run_benchmark(const BenchmarkSpec& spec) {
    spec.validate();
    const auto n_mech = spec.mechanisms.size();
    const auto n_methods = spec.methods.size();
    const auto repeats = static_cast<std::size_t>(spec.mc_repeats);

    // scores[(repeat * n_mech + mech) * n_methods + method]
    std::vector<double> scores(repeats * n_mech * n_methods, 0.0);
    std::vector<double> rates(repeats * n_mech, 0.0);

    std::optional<DataMatrix> fixed;
    if (!spec.synthetic) {
        fixed = load_truth(spec, 0);
        require(!fixed->has_missing(), ErrorKind::invalid_argument,
                "benchmark CSV must be complete: " + spec.csv_path.string());
    }
    if (!spec.dump_dir.empty()) std::filesystem::create_directories(spec.dump_dir);

    GcmiConfig gcmi_cfg = spec.gcmi;
    gcmi_cfg.threads = 1;

    parallel_for(repeats * n_mech, spec.threads, [&](std::size_t item) {
        const int repeat = static_cast<int>(item / n_mech);
        const std::size_t k = item % n_mech;
        const DataMatrix truth = fixed ? *fixed : load_truth(spec, repeat);

        AmputationSpec amp = spec.mechanisms[k];
        amp.seed = derive_seed(spec.seed, 0x616du, static_cast<std::uint64_t>(repeat), k);
        const Mask mask = ampute(truth.values(), amp);
        const DataMatrix amputed(truth.schema(), truth.values(), mask);
        rates[item] = mask.fraction();
        const std::string mech = mechanism_name(amp.mechanism);
        const double level = mechanism_level(amp.mechanism);

        if (!spec.dump_dir.empty()) {
            const std::string stem = "repeat" + std::to_string(repeat) + "_mech" + std::to_string(k);
            write_csv(truth, spec.dump_dir / (stem + "_truth.csv"));
            write_csv(amputed, spec.dump_dir / (stem + "_amputed.csv"));
            write_mask_csv(mask, truth.schema(), spec.dump_dir / (stem + "_mask.csv"));
        }
        if (mask.count() == 0) {
            spdlog::warn("repeat {} {}({}) produced no missing cells; scoring 0", repeat, mech, level);
            return;
        }

        for (std::size_t m = 0; m < n_methods; ++m) {
            const auto& method = spec.methods[m];
            Matrix imputed;
            switch (method.kind) {
            case MethodKind::mean:
                imputed = mean_impute(amputed);
                break;
            case MethodKind::gcmi: {
                GcmiConfig cfg = gcmi_cfg;
                cfg.seed = derive_seed(spec.seed, 0x6763u, static_cast<std::uint64_t>(repeat), k);
                const auto result = gcmi_impute(amputed, cfg);
                imputed = pool_completed(result.completed);
                break;
            }
            case MethodKind::external:
                imputed = run_external(method, amputed, mech, level, k, repeat);
                break;
            }
            scores[item * n_methods + m] = rmse(truth.values(), imputed, mask, truth.schema(), spec.scale);
        }
    });

    BenchmarkTable table;
    for (std::size_t m = 0; m < n_methods; ++m) {
        for (std::size_t k = 0; k < n_mech; ++k) {
            const auto& mech = spec.mechanisms[k].mechanism;
            BenchmarkRow row;
            row.method = spec.methods[m].name;
            row.mechanism = mechanism_name(mech);
            row.level = mechanism_level(mech);
            row.repeats = spec.mc_repeats;
            for (std::size_t r = 0; r < repeats; ++r) {
                const double s = scores[(r * n_mech + k) * n_methods + m];
                row.mean_rmse += s;
                row.missing_rate += rates[r * n_mech + k];
                table.raw.push_back({row.method, row.mechanism, row.level, static_cast<int>(r), s});
            }
            row.mean_rmse /= static_cast<double>(repeats);
            row.missing_rate /= static_cast<double>(repeats);
            if (repeats > 1) {
                double ss = 0.0;
                for (std::size_t r = 0; r < repeats; ++r) {
                    const double d = scores[(r * n_mech + k) * n_methods + m] - row.mean_rmse;
                    ss += d * d;
                }
                row.sd = std::sqrt(ss / static_cast<double>(repeats - 1));
                row.se = row.sd / std::sqrt(static_cast<double>(repeats));
            }
            table.rows.push_back(row);
        }
    }
    return table;
}

void write_table_csv(const BenchmarkTable& table, std::ostream& out) {
    out << "method,mechanism,level,mean_rmse,sd,se,repeats,missing_rate\n";
    for (const auto& r : table.rows) {
        out << r.method << ',' << r.mechanism << ',' << format_number(r.level) << ',' << format_number(r.mean_rmse)
            << ',' << format_number(r.sd) << ',' << format_number(r.se) << ',' << r.repeats << ','
            << format_number(r.missing_rate) << '\n';
    }
}

void write_raw_csv(const BenchmarkTable& table, std::ostream& out) {
    out << "method,mechanism,level,repeat,rmse\n";
    for (const auto& r : table.raw) {
        out << r.method << ',' << r.mechanism << ',' << format_number(r.level) << ',' << r.repeat << ','
            << format_number(r.rmse) << '\n';
    }
}

nlohmann::json table_to_json(const BenchmarkTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"method", r.method},
                        {"mechanism", r.mechanism},
                        {"level", r.level},
                        {"mean_rmse", r.mean_rmse},
                        {"sd", r.sd},
                        {"se", r.se},
                        {"repeats", r.repeats},
                        {"missing_rate", r.missing_rate}});
    }
    return {{"format", "gcmi-benchmark"}, {"version", 1}, {"rows", rows}};
}

} // namespace gcmi
