#include "gcmi/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "gcmi/config.hpp"
#include "gcmi/eval.hpp"
#include "gcmi/io.hpp"
#include "gcmi/missingness.hpp"
#include "gcmi/parallel.hpp"
#include "gcmi/random.hpp"

namespace gcmi {

namespace fs = std::filesystem;

namespace {

// Stage streams, so each subcommand draws independently from the one seed.
constexpr std::uint64_t kSimulateStream = 0x73696d;
constexpr std::uint64_t kAmputeStream = 0x616d70;
constexpr std::uint64_t kImputeStream = 0x696d70;
constexpr std::uint64_t kBenchmarkStream = 0x62656e;

template <class T>
void apply(const CLI::Option* opt, T& dst, const T& src) {
    if (opt->count() > 0) dst = src;
}

struct GlobalFlags {
    std::uint64_t seed = 0;
    std::string config;
    unsigned threads = 0;
    std::string output_dir;
    std::string log_level;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* output_opt = nullptr;
    CLI::Option* log_opt = nullptr;
};

// Chained-imputer and training knobs shared by `impute` and `benchmark`.
struct GcmiFlags {
    int m = 0;
    int max_chain_iters = 0;
    int max_epochs = 0;
    int min_observed_rows = 0;
    std::vector<int> hidden;
    std::string column_parallelism;
    CLI::Option* m_opt = nullptr;
    CLI::Option* chain_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* min_obs_opt = nullptr;
    CLI::Option* hidden_opt = nullptr;
    CLI::Option* par_opt = nullptr;

    void add(CLI::App* app) {
        m_opt = app->add_option("--m", m, "Number of imputations")->check(CLI::PositiveNumber);
        chain_opt = app->add_option("--max-chain-iters", max_chain_iters, "Sweep cap per chain")->check(CLI::PositiveNumber);
        epochs_opt = app->add_option("--max-epochs", max_epochs, "GCIN training budget in epochs")->check(CLI::PositiveNumber);
        min_obs_opt = app->add_option("--min-observed-rows", min_observed_rows, "Fewer observed rows keep the initial fill");
        hidden_opt = app->add_option("--hidden", hidden, "Hidden layer widths, e.g. 100 or 200,100")->delimiter(',');
        par_opt = app->add_option("--column-parallelism", column_parallelism, "sequential or snapshot_parallel");
    }

    void apply_to(GcmiConfig& cfg) const {
        apply(m_opt, cfg.m_imputations, m);
        apply(chain_opt, cfg.max_chain_iters, max_chain_iters);
        apply(epochs_opt, cfg.train.max_epochs, max_epochs);
        apply(min_obs_opt, cfg.min_observed_rows, min_observed_rows);
        apply(hidden_opt, cfg.train.hidden_dims, hidden);
        if (par_opt->count() > 0) {
            try {
                cfg.column_parallelism = column_parallelism_from_string(column_parallelism);
            } catch (const Error& e) {
                fail(ErrorKind::config, e.what());
            }
        }
    }
};

struct SimulateFlags {
    SyntheticSpec spec;
    bool no_outcome = false;
    std::string output;
    CLI::Option *n, *p, *rho, *sigma2, *noise_sd, *no_y, *out;
};

struct AmputeFlags {
    std::string input;
    std::string mechanism;
    double p = 0.0;
    double intercept = 0.0;
    double b0 = 0.0;
    double b1 = 0.0;
    std::vector<int> cond_cols;
    std::vector<int> target_cols;
    std::vector<int> columns;
    std::string layout;
    int block_size = 1;
    std::vector<std::string> protect;
    std::string output;
    std::string mask_output;
    CLI::Option *input_opt, *mech_opt, *p_opt, *intercept_opt, *b0_opt, *b1_opt, *cond_opt, *target_opt, *cols_opt,
        *layout_opt, *block_opt, *protect_opt, *out_opt, *mask_opt;
};

struct ImputeFlags {
    std::string input;
    std::string prefix;
    std::string manifest;
    std::vector<std::string> hints;
    GcmiFlags gcmi;
    CLI::Option *input_opt, *prefix_opt, *manifest_opt, *hint_opt;
};

struct BenchmarkFlags {
    std::string csv;
    int n = 0;
    int p = 0;
    double rho = 0.0;
    std::vector<double> rates;
    int repeats = 0;
    std::vector<std::string> methods;
    std::vector<std::string> external;
    std::string scale;
    std::string output;
    bool no_raw = false;
    std::string dump_dir;
    GcmiFlags gcmi;
    CLI::Option *csv_opt, *n_opt, *p_opt, *rho_opt, *rates_opt, *repeats_opt, *methods_opt, *external_opt, *scale_opt,
        *output_opt, *no_raw_opt, *dump_opt;
};

fs::path in_output_dir(const RunConfig& cfg, const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(cfg.output_dir) / p;
}

unsigned resolve_threads(const RunConfig& cfg) { return cfg.threads == 0 ? default_thread_count() : cfg.threads; }

void apply_mechanism_flags(const AmputeFlags& f, AmputationSpec& spec) {
    if (f.mech_opt->count() > 0) {
        const std::string current = mechanism_name(spec.mechanism);
        std::string wanted = f.mechanism;
        std::transform(wanted.begin(), wanted.end(), wanted.begin(), [](unsigned char c) { return std::toupper(c); });
        if (wanted != current) {
            if (wanted == "MCAR") spec.mechanism = McarSpec{};
            else if (wanted == "MAR") spec.mechanism = MarSpec{};
            else if (wanted == "MNAR") spec.mechanism = MnarSpec{};
            else fail(ErrorKind::config, "unknown mechanism '" + f.mechanism + "' (expected mcar, mar or mnar)");
        }
    }
    const auto misplaced = [&](const CLI::Option* opt, const char* needs) {
        if (opt->count() > 0) {
            fail(ErrorKind::config, opt->get_name() + " applies to " + needs + " amputation only");
        }
    };
    if (auto* s = std::get_if<McarSpec>(&spec.mechanism)) {
        apply(f.p_opt, s->p, f.p);
        for (auto* o : {f.intercept_opt, f.cond_opt, f.target_opt}) misplaced(o, "MAR");
        for (auto* o : {f.b0_opt, f.b1_opt, f.cols_opt}) misplaced(o, "MNAR");
    } else if (auto* s = std::get_if<MarSpec>(&spec.mechanism)) {
        apply(f.intercept_opt, s->intercept, f.intercept);
        apply(f.cond_opt, s->cond_cols, f.cond_cols);
        apply(f.target_opt, s->target_cols, f.target_cols);
        misplaced(f.p_opt, "MCAR");
        for (auto* o : {f.b0_opt, f.b1_opt, f.cols_opt}) misplaced(o, "MNAR");
    } else if (auto* s = std::get_if<MnarSpec>(&spec.mechanism)) {
        apply(f.b0_opt, s->b0, f.b0);
        apply(f.b1_opt, s->b1, f.b1);
        apply(f.cols_opt, s->columns, f.columns);
        misplaced(f.p_opt, "MCAR");
        for (auto* o : {f.intercept_opt, f.cond_opt, f.target_opt}) misplaced(o, "MAR");
    }
    if (f.layout_opt->count() > 0) {
        if (f.layout == "cellwise") spec.layout = MaskLayout::cellwise;
        else if (f.layout == "blockwise") spec.layout = MaskLayout::blockwise;
        else fail(ErrorKind::config, "unknown layout '" + f.layout + "' (expected cellwise or blockwise)");
    }
    apply(f.block_opt, spec.block_size, f.block_size);
}

int run_simulate(const RunConfig& cfg) {
    SyntheticSpec spec = cfg.simulate.spec;
    spec.seed = derive_seed(cfg.seed, kSimulateStream);
    const auto data = gen_synthetic(spec);

    Schema schema = continuous_schema(spec.p);
    Matrix values = data.x;
    if (cfg.simulate.include_outcome) {
        schema.push_back({"Y", ColumnKind::continuous, {}});
        values.conservativeResize(Eigen::NoChange, values.cols() + 1);
        values.col(values.cols() - 1) = data.y;
    }
    const auto out = in_output_dir(cfg, cfg.simulate.output);
    write_csv(DataMatrix::complete(std::move(schema), std::move(values)), out);
    spdlog::info("wrote {} rows x {} columns to {}", spec.n, spec.p + (cfg.simulate.include_outcome ? 1 : 0),
                 out.string());
    return exit_ok;
}

int run_ampute(const RunConfig& cfg, bool protect_explicit) {
    const fs::path input = cfg.ampute.input.empty() ? in_output_dir(cfg, cfg.simulate.output) : fs::path(cfg.ampute.input);
    const DataMatrix data = read_csv(input);
    require(!data.has_missing(), ErrorKind::invalid_argument, "ampute expects a complete input; " + input.string() +
                                                                  " already has missing cells");
    AmputationSpec spec = cfg.ampute.spec;
    spec.seed = derive_seed(cfg.seed, kAmputeStream);
    spec.protected_cols.clear();
    for (const auto& name : cfg.ampute.protected_columns) {
        const auto& schema = data.schema();
        const auto it = std::find_if(schema.begin(), schema.end(), [&](const ColumnSpec& c) { return c.name == name; });
        if (it == schema.end()) {
            // The default protects an outcome column named Y when one exists.
            require(!protect_explicit, ErrorKind::invalid_argument, "protected column '" + name + "' not in " +
                                                                        input.string());
            continue;
        }
        spec.protected_cols.push_back(static_cast<int>(it - schema.begin()));
    }
    const Mask mask = ampute(data.values(), spec);
    const DataMatrix amputed(data.schema(), data.values(), mask);
    const auto out = in_output_dir(cfg, cfg.ampute.output);
    write_csv(amputed, out);
    write_mask_csv(mask, data.schema(), in_output_dir(cfg, cfg.ampute.mask_output));
    spdlog::info("{} amputation: {} of {} cells missing ({:.4f}); wrote {}", mechanism_name(spec.mechanism),
                 mask.count(), mask.rows() * mask.cols(), mask.fraction(), out.string());
    return exit_ok;
}

int run_impute(const RunConfig& cfg) {
    const fs::path input = cfg.impute.input.empty() ? in_output_dir(cfg, cfg.ampute.output) : fs::path(cfg.impute.input);
    const DataMatrix data = read_csv(input, cfg.impute.hints);
    GcmiConfig gcmi = cfg.gcmi;
    gcmi.seed = derive_seed(cfg.seed, kImputeStream);
    gcmi.threads = resolve_threads(cfg);
    const auto result = gcmi_impute(data, gcmi);
    write_imputation_result(result, cfg.output_dir, cfg.impute.prefix, cfg.impute.manifest, input.string());
    spdlog::info("wrote {} completed datasets to {} in {:.2f}s", result.completed.size(), cfg.output_dir,
                 result.wall_seconds);
    return exit_ok;
}

int run_benchmark_cmd(const RunConfig& cfg) {
    const auto& b = cfg.benchmark;
    BenchmarkSpec spec;
    spec.synthetic = b.synthetic;
    if (!b.csv.empty()) spec.csv_path = b.csv;
    spec.mechanisms = b.mechanisms;
    spec.methods = b.methods;
    spec.mc_repeats = b.mc_repeats;
    spec.gcmi = cfg.gcmi;
    spec.scale = b.scale;
    spec.threads = resolve_threads(cfg);
    if (!b.dump_dir.empty()) spec.dump_dir = in_output_dir(cfg, b.dump_dir);
    spec.seed = derive_seed(cfg.seed, kBenchmarkStream);

    const auto table = run_benchmark(spec);
    const auto stem = in_output_dir(cfg, b.output);
    {
        std::ofstream out(stem.string() + ".csv");
        require(static_cast<bool>(out), ErrorKind::io, "cannot write " + stem.string() + ".csv");
        write_table_csv(table, out);
    }
    {
        std::ofstream out(stem.string() + ".json");
        require(static_cast<bool>(out), ErrorKind::io, "cannot write " + stem.string() + ".json");
        out << table_to_json(table).dump(2) << '\n';
    }
    if (b.raw_dump) {
        std::ofstream out(stem.string() + "_raw.csv");
        require(static_cast<bool>(out), ErrorKind::io, "cannot write " + stem.string() + "_raw.csv");
        write_raw_csv(table, out);
    }
    write_table_csv(table, std::cout);
    return exit_ok;
}

} // namespace

ExitCode exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::config:
        return exit_usage;
    case ErrorKind::numeric:
        return exit_numeric;
    default:
        return exit_data;
    }
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Chained GAN multiple imputation for tabular data", "gcmi"};
    app.require_subcommand(1);

    GlobalFlags g;
    g.seed_opt = app.add_option("--seed", g.seed, "Base seed; every random draw derives from it");
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    g.threads_opt = app.add_option("--threads", g.threads, "Worker threads (default: available parallelism)");
    g.output_opt = app.add_option("--output-dir", g.output_dir, "Directory for every output file");
    g.log_opt = app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

    SimulateFlags sf;
    auto* sim = app.add_subcommand("simulate", "Generate equicorrelated Gaussian covariates and a linear outcome");
    sf.n = sim->add_option("--n", sf.spec.n, "Rows");
    sf.p = sim->add_option("--p", sf.spec.p, "Covariates");
    sf.rho = sim->add_option("--rho", sf.spec.rho, "Pairwise correlation");
    sf.sigma2 = sim->add_option("--sigma2", sf.spec.sigma2, "Covariate variance");
    sf.noise_sd = sim->add_option("--noise-sd", sf.spec.noise_sd, "Outcome noise standard deviation");
    sf.no_y = sim->add_flag("--no-outcome", sf.no_outcome, "Omit the Y column");
    sf.out = sim->add_option("-o,--output", sf.output, "Output CSV name");

    AmputeFlags af;
    auto* amp = app.add_subcommand("ampute", "Mask a complete CSV under MCAR, MAR or MNAR");
    af.input_opt = amp->add_option("input", af.input, "Complete CSV");
    af.mech_opt = amp->add_option("--mechanism", af.mechanism, "mcar, mar or mnar");
    af.p_opt = amp->add_option("--p", af.p, "MCAR missing probability");
    af.intercept_opt = amp->add_option("--intercept", af.intercept, "MAR logistic intercept");
    af.b0_opt = amp->add_option("--b0", af.b0, "MNAR intercept");
    af.b1_opt = amp->add_option("--b1", af.b1, "MNAR slope");
    af.cond_opt = amp->add_option("--cond-cols", af.cond_cols, "MAR conditioning columns (0-based)")->delimiter(',');
    af.target_opt = amp->add_option("--target-cols", af.target_cols, "MAR target columns (0-based)")->delimiter(',');
    af.cols_opt = amp->add_option("--columns", af.columns, "MNAR columns (0-based)")->delimiter(',');
    af.layout_opt = amp->add_option("--layout", af.layout, "cellwise or blockwise");
    af.block_opt = amp->add_option("--block-size", af.block_size, "Rows per block for blockwise layout");
    af.protect_opt = amp->add_option("--protect", af.protect, "Column names never amputed (default: Y)")->delimiter(',');
    af.out_opt = amp->add_option("-o,--output", af.output, "Amputed CSV name");
    af.mask_opt = amp->add_option("--mask-output", af.mask_output, "Mask CSV name");

    ImputeFlags inf;
    auto* imp = app.add_subcommand("impute", "Multiply impute a CSV with missing cells");
    inf.input_opt = imp->add_option("input", inf.input, "CSV with missing cells");
    inf.prefix_opt = imp->add_option("--prefix", inf.prefix, "Completed files are <prefix>_<m>.csv");
    inf.manifest_opt = imp->add_option("--manifest", inf.manifest, "Manifest JSON name");
    inf.hint_opt = imp->add_option("--hint", inf.hints, "Column kind override, name=continuous|binary|categorical");
    inf.gcmi.add(imp);

    BenchmarkFlags bf;
    auto* bench = app.add_subcommand("benchmark", "Monte Carlo RMSE comparison of imputation methods");
    bf.csv_opt = bench->add_option("--csv", bf.csv, "Complete CSV to amputate repeatedly instead of synthetic data");
    bf.n_opt = bench->add_option("--n", bf.n, "Synthetic rows");
    bf.p_opt = bench->add_option("--p", bf.p, "Synthetic covariates");
    bf.rho_opt = bench->add_option("--rho", bf.rho, "Synthetic correlation");
    bf.rates_opt = bench->add_option("--rates", bf.rates, "MCAR rates, replacing configured mechanisms")->delimiter(',');
    bf.repeats_opt = bench->add_option("--repeats", bf.repeats, "Monte Carlo repeats")->check(CLI::PositiveNumber);
    bf.methods_opt = bench->add_option("--methods", bf.methods, "Built-in methods: gcmi, mean")->delimiter(',');
    bf.external_opt = bench->add_option("--external", bf.external, "External method, name=path_pattern");
    bf.scale_opt = bench->add_option("--scale", bf.scale, "normalized or raw");
    bf.output_opt = bench->add_option("-o,--output", bf.output, "Output stem");
    bf.no_raw_opt = bench->add_flag("--no-raw", bf.no_raw, "Skip the per-repeat RMSE dump");
    bf.dump_opt = bench->add_option("--dump-dir", bf.dump_dir, "Write every repeat's truth, input and mask here");
    bf.gcmi.add(bench);

    app.fallthrough();
    for (auto* sub : {sim, amp, imp, bench}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code == 0) return exit_ok;
        std::cerr << app.help();
        return exit_usage;
    }

    try {
        RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
        apply(g.seed_opt, cfg.seed, g.seed);
        apply(g.threads_opt, cfg.threads, g.threads);
        apply(g.output_opt, cfg.output_dir, g.output_dir);
        apply(g.log_opt, cfg.log_level, g.log_level);

        const auto level = spdlog::level::from_str(cfg.log_level);
        require(level != spdlog::level::off || cfg.log_level == "off", ErrorKind::config,
                "unknown log level '" + cfg.log_level + "'");
        spdlog::set_level(level);
        fs::create_directories(cfg.output_dir);

        if (sim->parsed()) {
            apply(sf.n, cfg.simulate.spec.n, sf.spec.n);
            apply(sf.p, cfg.simulate.spec.p, sf.spec.p);
            apply(sf.rho, cfg.simulate.spec.rho, sf.spec.rho);
            apply(sf.sigma2, cfg.simulate.spec.sigma2, sf.spec.sigma2);
            apply(sf.noise_sd, cfg.simulate.spec.noise_sd, sf.spec.noise_sd);
            if (sf.no_y->count() > 0) cfg.simulate.include_outcome = false;
            apply(sf.out, cfg.simulate.output, sf.output);
            return run_simulate(cfg);
        }
        if (amp->parsed()) {
            apply(af.input_opt, cfg.ampute.input, af.input);
            apply_mechanism_flags(af, cfg.ampute.spec);
            apply(af.protect_opt, cfg.ampute.protected_columns, af.protect);
            apply(af.out_opt, cfg.ampute.output, af.output);
            apply(af.mask_opt, cfg.ampute.mask_output, af.mask_output);
            return run_ampute(cfg, af.protect_opt->count() > 0);
        }
        if (imp->parsed()) {
            apply(inf.input_opt, cfg.impute.input, inf.input);
            apply(inf.prefix_opt, cfg.impute.prefix, inf.prefix);
            apply(inf.manifest_opt, cfg.impute.manifest, inf.manifest);
            for (const auto& h : inf.hints) {
                const auto eq = h.find('=');
                require(eq != std::string::npos && eq > 0, ErrorKind::config, "--hint expects name=kind, got '" + h + "'");
                try {
                    cfg.impute.hints[h.substr(0, eq)] = {column_kind_from_string(h.substr(eq + 1)), {}};
                } catch (const Error& e) {
                    fail(ErrorKind::config, "--hint " + h + ": " + e.what());
                }
            }
            inf.gcmi.apply_to(cfg.gcmi);
            return run_impute(cfg);
        }
        if (bench->parsed()) {
            auto& b = cfg.benchmark;
            if (bf.csv_opt->count() > 0) {
                b.csv = bf.csv;
                b.synthetic.reset();
            }
            if (bf.n_opt->count() + bf.p_opt->count() + bf.rho_opt->count() > 0) {
                require(bf.csv_opt->count() == 0, ErrorKind::config, "--n/--p/--rho do not combine with --csv");
                if (!b.synthetic) b.synthetic = SyntheticSpec{};
                b.csv.clear();
                apply(bf.n_opt, b.synthetic->n, bf.n);
                apply(bf.p_opt, b.synthetic->p, bf.p);
                apply(bf.rho_opt, b.synthetic->rho, bf.rho);
            }
            if (bf.rates_opt->count() > 0) {
                b.mechanisms.clear();
                for (double r : bf.rates) b.mechanisms.push_back(AmputationSpec::of(McarSpec{r}));
            }
            apply(bf.repeats_opt, b.mc_repeats, bf.repeats);
            if (bf.methods_opt->count() + bf.external_opt->count() > 0) {
                b.methods.clear();
                for (const auto& m : bf.methods) {
                    if (m == "gcmi") b.methods.push_back(MethodSpec::gcmi());
                    else if (m == "mean") b.methods.push_back(MethodSpec::mean());
                    else fail(ErrorKind::config, "unknown method '" + m + "' (expected gcmi or mean)");
                }
                for (const auto& e : bf.external) {
                    const auto eq = e.find('=');
                    require(eq != std::string::npos && eq > 0 && eq + 1 < e.size(), ErrorKind::config,
                            "--external expects name=path_pattern, got '" + e + "'");
                    b.methods.push_back(MethodSpec::external(e.substr(0, eq), e.substr(eq + 1)));
                }
            }
            if (bf.scale_opt->count() > 0) {
                if (bf.scale == "normalized") b.scale = RmseScale::normalized;
                else if (bf.scale == "raw") b.scale = RmseScale::raw;
                else fail(ErrorKind::config, "unknown scale '" + bf.scale + "' (expected normalized or raw)");
            }
            apply(bf.output_opt, b.output, bf.output);
            if (bf.no_raw_opt->count() > 0) b.raw_dump = false;
            apply(bf.dump_opt, b.dump_dir, bf.dump_dir);
            bf.gcmi.apply_to(cfg.gcmi);
            return run_benchmark_cmd(cfg);
        }
    } catch (const Error& e) {
        std::cerr << "gcmi: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "gcmi: " << e.what() << '\n';
        return exit_data;
    }
    return exit_usage;
}

} // namespace gcmi
