#include "gcmi/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "gcmi/error.hpp"

namespace gcmi {

namespace {

using nlohmann::json;

void check_object(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
    require(obj.is_object(), ErrorKind::config, where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        const bool known = std::find(allowed.begin(), allowed.end(), key) != allowed.end();
        require(known, ErrorKind::config, "unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::config, where + "." + key + ": " + e.what());
    }
}

std::string read_string(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
    std::string s = fallback;
    read(obj, key, s, where);
    return s;
}

MaskLayout layout_from_string(const std::string& s) {
    if (s == "cellwise") return MaskLayout::cellwise;
    if (s == "blockwise") return MaskLayout::blockwise;
    fail(ErrorKind::config, "unknown mask layout '" + s + "'");
}

RmseScale scale_from_string(const std::string& s) {
    if (s == "normalized") return RmseScale::normalized;
    if (s == "raw") return RmseScale::raw;
    fail(ErrorKind::config, "unknown rmse scale '" + s + "'");
}

void parse_train(const json& obj, TrainConfig& t) {
    const std::string w = "train";
    check_object(obj, w,
                 {"lr_generator", "lr_discriminator", "l2", "adam_beta1", "adam_beta2", "adam_epsilon",
                  "gen_iters_per_cycle", "disc_iters_per_cycle", "batch_size", "max_epochs", "acc_penalty_weight",
                  "early_stop_patience", "early_stop_tolerance", "noise_dim", "hidden_dims"});
    read(obj, "lr_generator", t.lr_generator, w);
    read(obj, "lr_discriminator", t.lr_discriminator, w);
    read(obj, "l2", t.l2, w);
    read(obj, "adam_beta1", t.adam_beta1, w);
    read(obj, "adam_beta2", t.adam_beta2, w);
    read(obj, "adam_epsilon", t.adam_epsilon, w);
    read(obj, "gen_iters_per_cycle", t.gen_iters_per_cycle, w);
    read(obj, "disc_iters_per_cycle", t.disc_iters_per_cycle, w);
    read(obj, "batch_size", t.batch_size, w);
    read(obj, "max_epochs", t.max_epochs, w);
    read(obj, "acc_penalty_weight", t.acc_penalty_weight, w);
    read(obj, "early_stop_patience", t.early_stop_patience, w);
    read(obj, "early_stop_tolerance", t.early_stop_tolerance, w);
    read(obj, "noise_dim", t.noise_dim, w);
    read(obj, "hidden_dims", t.hidden_dims, w);
}

void parse_gcmi(const json& obj, GcmiConfig& g) {
    const std::string w = "gcmi";
    check_object(obj, w, {"max_chain_iters", "m_imputations", "column_parallelism", "initial_fill", "min_observed_rows"});
    read(obj, "max_chain_iters", g.max_chain_iters, w);
    read(obj, "m_imputations", g.m_imputations, w);
    read(obj, "min_observed_rows", g.min_observed_rows, w);
    if (obj.contains("column_parallelism")) {
        try {
            g.column_parallelism = column_parallelism_from_string(read_string(obj, "column_parallelism", "", w));
        } catch (const Error& e) {
            fail(ErrorKind::config, e.what());
        }
    }
    require(read_string(obj, "initial_fill", "mean_mode", w) == "mean_mode", ErrorKind::config,
            "gcmi.initial_fill supports only 'mean_mode'");
}

SyntheticSpec parse_synthetic(const json& obj, SyntheticSpec s, const std::string& w) {
    check_object(obj, w, {"n", "p", "rho", "sigma2", "alpha", "noise_sd"});
    read(obj, "n", s.n, w);
    read(obj, "p", s.p, w);
    read(obj, "rho", s.rho, w);
    read(obj, "sigma2", s.sigma2, w);
    read(obj, "alpha", s.alpha, w);
    read(obj, "noise_sd", s.noise_sd, w);
    return s;
}

void parse_simulate(const json& obj, SimulateConfig& s) {
    const std::string w = "simulate";
    check_object(obj, w, {"n", "p", "rho", "sigma2", "alpha", "noise_sd", "include_outcome", "output"});
    json spec = json::object();
    for (const char* k : {"n", "p", "rho", "sigma2", "alpha", "noise_sd"}) {
        if (obj.contains(k)) spec[k] = obj[k];
    }
    s.spec = parse_synthetic(spec, s.spec, w);
    read(obj, "include_outcome", s.include_outcome, w);
    read(obj, "output", s.output, w);
}

void parse_ampute(const json& obj, AmputeConfig& a) {
    const std::string w = "ampute";
    check_object(obj, w,
                 {"input", "mechanism", "p", "cond_cols", "target_cols", "betas", "intercept", "b0", "b1", "columns",
                  "layout", "block_size", "protected", "output", "mask_output"});
    read(obj, "input", a.input, w);
    read(obj, "protected", a.protected_columns, w);
    read(obj, "output", a.output, w);
    read(obj, "mask_output", a.mask_output, w);
    json spec = json::object();
    for (const char* k : {"mechanism", "p", "cond_cols", "target_cols", "betas", "intercept", "b0", "b1", "columns",
                          "layout", "block_size"}) {
        if (obj.contains(k)) spec[k] = obj[k];
    }
    if (!spec.empty()) a.spec = parse_amputation(spec);
}

void parse_impute(const json& obj, ImputeConfig& c) {
    const std::string w = "impute";
    check_object(obj, w, {"input", "prefix", "manifest", "hints"});
    read(obj, "input", c.input, w);
    read(obj, "prefix", c.prefix, w);
    read(obj, "manifest", c.manifest, w);
    if (const auto it = obj.find("hints"); it != obj.end()) {
        require(it->is_object(), ErrorKind::config, "impute.hints must map column names to hints");
        for (const auto& [name, h] : it->items()) {
            const std::string hw = "impute.hints." + name;
            check_object(h, hw, {"kind", "levels"});
            ColumnHint hint;
            try {
                hint.kind = column_kind_from_string(read_string(h, "kind", "continuous", hw));
            } catch (const Error& e) {
                fail(ErrorKind::config, hw + ": " + e.what());
            }
            read(h, "levels", hint.levels, hw);
            c.hints[name] = hint;
        }
    }
}

MethodSpec parse_method(const json& doc) {
    if (doc.is_string()) {
        const auto name = doc.get<std::string>();
        if (name == "gcmi") return MethodSpec::gcmi();
        if (name == "mean") return MethodSpec::mean();
        fail(ErrorKind::config, "unknown benchmark method '" + name + "'");
    }
    check_object(doc, "benchmark.methods[]", {"name", "external"});
    const auto name = read_string(doc, "name", "", "benchmark.methods[]");
    const auto path = read_string(doc, "external", "", "benchmark.methods[]");
    require(!name.empty() && !path.empty(), ErrorKind::config, "external methods need 'name' and 'external' (path pattern)");
    return MethodSpec::external(name, path);
}

void parse_benchmark(const json& obj, BenchmarkConfig& b) {
    const std::string w = "benchmark";
    check_object(obj, w, {"synthetic", "csv", "mechanisms", "methods", "mc_repeats", "scale", "output", "raw_dump", "dump_dir"});
    if (obj.contains("csv")) {
        read(obj, "csv", b.csv, w);
        b.synthetic.reset();
    }
    if (obj.contains("synthetic")) {
        require(!obj.contains("csv"), ErrorKind::config, "benchmark takes either 'synthetic' or 'csv', not both");
        b.synthetic = parse_synthetic(obj["synthetic"], SyntheticSpec{}, "benchmark.synthetic");
    }
    if (const auto it = obj.find("mechanisms"); it != obj.end()) {
        require(it->is_array(), ErrorKind::config, "benchmark.mechanisms must be an array");
        b.mechanisms.clear();
        for (const auto& m : *it) b.mechanisms.push_back(parse_amputation(m));
    }
    if (const auto it = obj.find("methods"); it != obj.end()) {
        require(it->is_array(), ErrorKind::config, "benchmark.methods must be an array");
        b.methods.clear();
        for (const auto& m : *it) b.methods.push_back(parse_method(m));
    }
    read(obj, "mc_repeats", b.mc_repeats, w);
    if (obj.contains("scale")) b.scale = scale_from_string(read_string(obj, "scale", "", w));
    read(obj, "output", b.output, w);
    read(obj, "raw_dump", b.raw_dump, w);
    read(obj, "dump_dir", b.dump_dir, w);
}

} // namespace

Mechanism parse_mechanism(const json& doc) {
    const std::string w = "mechanism";
    const auto kind = read_string(doc, "mechanism", "mcar", w);
    if (kind == "mcar") {
        McarSpec s;
        read(doc, "p", s.p, w);
        return s;
    }
    if (kind == "mar") {
        MarSpec s;
        read(doc, "cond_cols", s.cond_cols, w);
        read(doc, "target_cols", s.target_cols, w);
        read(doc, "betas", s.betas, w);
        read(doc, "intercept", s.intercept, w);
        return s;
    }
    if (kind == "mnar") {
        MnarSpec s;
        read(doc, "b0", s.b0, w);
        read(doc, "b1", s.b1, w);
        read(doc, "columns", s.columns, w);
        return s;
    }
    fail(ErrorKind::config, "unknown mechanism '" + kind + "' (expected mcar, mar or mnar)");
}

AmputationSpec parse_amputation(const json& doc) {
    const std::string w = "mechanism";
    check_object(doc, w,
                 {"mechanism", "p", "cond_cols", "target_cols", "betas", "intercept", "b0", "b1", "columns", "layout",
                  "block_size"});
    AmputationSpec spec;
    spec.mechanism = parse_mechanism(doc);
    spec.layout = layout_from_string(read_string(doc, "layout", "cellwise", w));
    read(doc, "block_size", spec.block_size, w);
    return spec;
}

RunConfig parse_run_config(const json& doc) {
    check_object(doc, "config",
                 {"seed", "threads", "output_dir", "log_level", "gcmi", "train", "simulate", "ampute", "impute", "benchmark"});
    RunConfig cfg;
    read(doc, "seed", cfg.seed, "config");
    read(doc, "threads", cfg.threads, "config");
    read(doc, "output_dir", cfg.output_dir, "config");
    read(doc, "log_level", cfg.log_level, "config");
    if (doc.contains("gcmi")) parse_gcmi(doc["gcmi"], cfg.gcmi);
    if (doc.contains("train")) parse_train(doc["train"], cfg.gcmi.train);
    if (doc.contains("simulate")) parse_simulate(doc["simulate"], cfg.simulate);
    if (doc.contains("ampute")) parse_ampute(doc["ampute"], cfg.ampute);
    if (doc.contains("impute")) parse_impute(doc["impute"], cfg.impute);
    if (doc.contains("benchmark")) parse_benchmark(doc["benchmark"], cfg.benchmark);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::config, "cannot read config file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        fail(ErrorKind::config, path.string() + " is not valid JSON: " + e.what());
    }
    try {
        return parse_run_config(doc);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

} // namespace gcmi
