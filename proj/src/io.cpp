#include "gcmi/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gcmi/error.hpp"

namespace gcmi {

namespace {

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Numeric labels sort by value, anything else lexicographically.
void sort_levels(std::vector<std::string>& levels) {
    const bool numeric = std::all_of(levels.begin(), levels.end(), [](const auto& l) { return parse_number(l).has_value(); });
    if (numeric) {
        std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) { return *parse_number(a) < *parse_number(b); });
    } else {
        std::sort(levels.begin(), levels.end());
    }
}

std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_header(const Schema& schema, std::ostream& out) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c > 0) out << ',';
        out << quote_field(schema[c].name);
    }
    out << '\n';
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    return out;
}

} // namespace

std::vector<CsvRecord> parse_csv(std::istream& in) {
    std::vector<CsvRecord> records;
    CsvRecord current;
    std::string field;
    bool in_quotes = false;
    bool field_started = false; // distinguishes an empty trailing line from a record
    int line = 1;
    current.line = 1;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
    };
    // A blank line is a record with one empty field; only the final
    // unterminated line is dropped when empty.
    auto end_record = [&](bool at_eof) {
        if (!at_eof || field_started || !current.fields.empty()) {
            end_field();
            records.push_back(std::move(current));
        }
        current = CsvRecord{};
        field_started = false;
    };

    char c = 0;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            field_started = true;
            end_field();
            break;
        case '\r':
            if (in.peek() == '\n') break;
            [[fallthrough]];
        case '\n':
            end_record(false);
            ++line;
            current.line = line;
            break;
        default:
            field_started = true;
            field += c;
        }
    }
    require(!in_quotes, ErrorKind::parse, "unterminated quoted field starting on line " + std::to_string(current.line));
    end_record(true);
    return records;
}

DataMatrix read_csv(std::istream& in, const SchemaHints& hints, const CsvOptions& options) {
    auto records = parse_csv(in);
    require(!records.empty(), ErrorKind::empty_input, "CSV has no header row");
    const std::size_t p = records.front().fields.size();
    // Blank lines are rows of one missing cell in single-column files and
    // ignorable padding otherwise.
    if (p > 1) {
        std::erase_if(records, [](const CsvRecord& r) { return r.fields.size() == 1 && r.fields[0].empty(); });
        require(!records.empty(), ErrorKind::empty_input, "CSV has no header row");
    }
    const auto& header = records.front().fields;
    require(records.size() > 1, ErrorKind::empty_input, "CSV has a header but no data rows");
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].fields.size() != p) {
            fail(ErrorKind::parse, "line " + std::to_string(records[i].line) + ": expected " + std::to_string(p) +
                                       " fields, found " + std::to_string(records[i].fields.size()));
        }
    }
    for (const auto& [name, hint] : hints) {
        require(std::find(header.begin(), header.end(), name) != header.end(), ErrorKind::invalid_argument,
                "schema hint names unknown column '" + name + "'");
    }

    const auto n = static_cast<Eigen::Index>(records.size() - 1);
    auto is_missing = [&](const std::string& s) {
        return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), s) != options.missing_tokens.end();
    };

    Schema schema(p);
    Matrix values(n, static_cast<Eigen::Index>(p));
    Mask mask(n, static_cast<Eigen::Index>(p));
    for (std::size_t c = 0; c < p; ++c) {
        auto& col = schema[c];
        col.name = header[c];
        std::vector<std::string> observed;
        bool all_numeric = true;
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& cell = records[static_cast<std::size_t>(r) + 1].fields[c];
            if (is_missing(cell)) continue;
            observed.push_back(cell);
            all_numeric = all_numeric && parse_number(cell).has_value();
        }
        std::set<std::string> distinct(observed.begin(), observed.end());

        const auto hint = hints.find(col.name);
        if (hint != hints.end()) {
            col.kind = hint->second.kind;
            col.levels = hint->second.levels;
        } else if (all_numeric) {
            col.kind = ColumnKind::continuous;
        } else {
            col.kind = distinct.size() == 2 ? ColumnKind::binary : ColumnKind::categorical;
        }
        if (col.is_discrete() && col.levels.empty()) {
            col.levels.assign(distinct.begin(), distinct.end());
            sort_levels(col.levels);
        }
        if (col.kind == ColumnKind::binary) {
            require(col.levels.size() == 2, ErrorKind::invalid_argument,
                    "binary column '" + col.name + "' has " + std::to_string(col.levels.size()) + " levels");
        }
        if (col.kind == ColumnKind::categorical && col.levels.empty()) {
            fail(ErrorKind::unimputable_column, "categorical column '" + col.name + "' has no observed values");
        }

        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& rec = records[static_cast<std::size_t>(r) + 1];
            const auto& cell = rec.fields[c];
            if (is_missing(cell)) {
                mask.set(r, static_cast<Eigen::Index>(c), true);
                values(r, static_cast<Eigen::Index>(c)) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            if (col.kind == ColumnKind::continuous) {
                const auto v = parse_number(cell);
                require(v.has_value(), ErrorKind::parse,
                        "line " + std::to_string(rec.line) + ": '" + cell + "' in column '" + col.name + "' is not numeric");
                values(r, static_cast<Eigen::Index>(c)) = *v;
            } else {
                const auto it = std::find(col.levels.begin(), col.levels.end(), cell);
                require(it != col.levels.end(), ErrorKind::parse,
                        "line " + std::to_string(rec.line) + ": '" + cell + "' is not a level of column '" + col.name + "'");
                values(r, static_cast<Eigen::Index>(c)) = static_cast<double>(std::distance(col.levels.begin(), it));
            }
        }
    }

    DataMatrix dm(std::move(schema), std::move(values), std::move(mask));
    spdlog::info("read {} rows x {} columns", dm.rows(), dm.cols());
    for (Eigen::Index c = 0; c < dm.cols(); ++c) {
        spdlog::debug("  {} ({}): {:.1f}% missing", dm.column(c).name, to_string(dm.column(c).kind),
                      100.0 * dm.mask().column_fraction(c));
    }
    return dm;
}

DataMatrix read_csv(const std::filesystem::path& path, const SchemaHints& hints, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read " + path.string());
    try {
        return read_csv(in, hints, options);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_csv(const DataMatrix& dm, std::ostream& out) {
    write_header(dm.schema(), out);
    for (Eigen::Index r = 0; r < dm.rows(); ++r) {
        for (Eigen::Index c = 0; c < dm.cols(); ++c) {
            if (c > 0) out << ',';
            if (dm.is_missing(r, c)) continue;
            const auto& col = dm.column(c);
            if (col.is_discrete()) {
                out << quote_field(col.levels[static_cast<std::size_t>(dm.value(r, c))]);
            } else {
                out << format_number(dm.value(r, c));
            }
        }
        out << '\n';
    }
}

void write_csv(const DataMatrix& dm, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_csv(dm, out);
}

void write_mask_csv(const Mask& mask, const Schema& schema, std::ostream& out) {
    write_header(schema, out);
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
            if (c > 0) out << ',';
            out << (mask(r, c) ? '1' : '0');
        }
        out << '\n';
    }
}

void write_mask_csv(const Mask& mask, const Schema& schema, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_mask_csv(mask, schema, out);
}

Normalization normalize(const DataMatrix& dm) {
    Matrix values = dm.values();
    std::vector<Affine> params(static_cast<std::size_t>(dm.cols()));
    std::vector<std::string> warnings;
    for (Eigen::Index c = 0; c < dm.cols(); ++c) {
        const auto& col = dm.column(c);
        if (col.is_discrete()) continue;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (Eigen::Index r = 0; r < dm.rows(); ++r) {
            if (dm.is_missing(r, c)) continue;
            lo = std::min(lo, dm.value(r, c));
            hi = std::max(hi, dm.value(r, c));
        }
        if (!(hi > lo)) {
            warnings.push_back("column '" + col.name + "' has fewer than 2 distinct observed values; left unscaled");
            spdlog::warn("{}", warnings.back());
            continue;
        }
        auto& a = params[static_cast<std::size_t>(c)];
        a = {lo, hi - lo};
        for (Eigen::Index r = 0; r < dm.rows(); ++r) {
            if (!dm.is_missing(r, c)) values(r, c) = a.apply(values(r, c));
        }
    }
    return {DataMatrix(dm.schema(), std::move(values), dm.mask()), std::move(params), std::move(warnings)};
}

DataMatrix denormalize(const DataMatrix& dm, const std::vector<Affine>& params) {
    require(static_cast<Eigen::Index>(params.size()) == dm.cols(), ErrorKind::shape,
            "one affine transform per column is required");
    Matrix values = dm.values();
    for (Eigen::Index c = 0; c < dm.cols(); ++c) {
        if (dm.column(c).is_discrete()) continue;
        const auto& a = params[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < dm.rows(); ++r) {
            if (!dm.is_missing(r, c)) values(r, c) = a.invert(values(r, c));
        }
    }
    return DataMatrix(dm.schema(), std::move(values), dm.mask());
}

nlohmann::json write_imputation_result(const ImputationResult& result, const std::filesystem::path& dir,
                                       const std::string& prefix, const std::string& manifest_name,
                                       const std::string& input_name) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "gcmi-imputation";
    manifest["version"] = 1;
    manifest["input"] = input_name;

    const auto& cfg = result.config;
    manifest["config"] = {
        {"max_chain_iters", cfg.max_chain_iters},
        {"m_imputations", cfg.m_imputations},
        {"column_parallelism", std::string(to_string(cfg.column_parallelism))},
        {"initial_fill", "mean_mode"},
        {"min_observed_rows", cfg.min_observed_rows},
        {"seed", cfg.seed},
        {"train",
         {
             {"lr_generator", cfg.train.lr_generator},
             {"lr_discriminator", cfg.train.lr_discriminator},
             {"l2", cfg.train.l2},
             {"adam_beta1", cfg.train.adam_beta1},
             {"adam_beta2", cfg.train.adam_beta2},
             {"adam_epsilon", cfg.train.adam_epsilon},
             {"gen_iters_per_cycle", cfg.train.gen_iters_per_cycle},
             {"disc_iters_per_cycle", cfg.train.disc_iters_per_cycle},
             {"batch_size", cfg.train.batch_size},
             {"max_epochs", cfg.train.max_epochs},
             {"acc_penalty_weight", cfg.train.acc_penalty_weight},
             {"early_stop_patience", cfg.train.early_stop_patience},
             {"early_stop_tolerance", cfg.train.early_stop_tolerance},
             {"noise_dim", cfg.train.noise_dim},
             {"hidden_dims", cfg.train.hidden_dims},
         }},
    };
    manifest["chain_seeds"] = result.chain_seeds;

    auto& files = manifest["files"] = nlohmann::json::array();
    auto& traces = manifest["traces"] = nlohmann::json::array();
    for (std::size_t m = 0; m < result.completed.size(); ++m) {
        const std::string name = prefix + "_" + std::to_string(m + 1) + ".csv";
        write_csv(result.completed[m], dir / name);
        files.push_back(name);

        const auto& t = result.traces[m];
        nlohmann::json sweeps = nlohmann::json::array();
        for (const auto& g : t.sweeps) sweeps.push_back({{"gamma_num", g.num}, {"gamma_cat", g.cat}});
        traces.push_back({{"sweeps", sweeps},
                          {"stop_reason", std::string(to_string(t.stop))},
                          {"retained_sweep", t.retained_sweep}});
    }
    manifest["timings"] = {{"wall_seconds", result.wall_seconds}, {"chain_seconds", result.chain_seconds}};

    auto out = open_output(dir / manifest_name);
    out << manifest.dump(2) << '\n';
    return manifest;
}

} // namespace gcmi
