#pragma once

#include <charconv>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/error.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/train/trainer.hpp"

namespace mvgc {

/// Everything a command needs: the training recipe plus where the data lives
/// and where outputs go.
struct run_config {
    train_config train;
    std::string dataset = "MUTAG";
    std::string data_root = "data";
    std::string out = "runs";
    std::size_t fold = 0;        // split used by train/eval
    std::size_t max_graphs = 0;  // stratified subsample size; 0 keeps every graph
};

/// Dataset-specific recipe defaults, applied before file and flag overrides.
/// COLLAB is run on a stratified 500-graph subsample with fewer views and
/// 30 epochs to stay within desktop budgets.
inline void apply_recipe_defaults(run_config& cfg) {
    if (cfg.dataset == "COLLAB") {
        cfg.train.epochs = 30;
        cfg.train.views = {4, 3, 3};
        cfg.max_graphs = 500;
    }
}

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string format_real(real v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_list(const std::vector<std::size_t>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(xs[i]);
    }
    return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    text = trim(text);
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw config_error("invalid value '" + std::string(text) + "' for " + std::string(key));
    }
    return v;
}

inline std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
    std::vector<std::size_t> out;
    for (auto field : split_fields(text)) out.push_back(parse_number<std::size_t>(key, field));
    if (out.empty()) throw config_error("empty list for " + std::string(key));
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw config_error("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

struct config_field {
    const char* key;
    std::function<std::string(const run_config&)> get;
    std::function<void(run_config&, std::string_view)> set;
    bool affects_results;  // false for output location and parallelism
};

inline const std::vector<config_field>& config_fields() {
    using rc = run_config;
    static const std::vector<config_field> fields = {
        {"dataset", [](const rc& c) { return c.dataset; }, [](rc& c, std::string_view v) { c.dataset = std::string(trim(v)); }, true},
        {"data-root", [](const rc& c) { return c.data_root; }, [](rc& c, std::string_view v) { c.data_root = std::string(trim(v)); }, true},
        {"out", [](const rc& c) { return c.out; }, [](rc& c, std::string_view v) { c.out = std::string(trim(v)); }, false},
        {"seed", [](const rc& c) { return std::to_string(c.train.seed); },
         [](rc& c, std::string_view v) { c.train.seed = parse_number<std::uint64_t>("seed", v); }, true},
        {"lr", [](const rc& c) { return format_real(c.train.learning_rate); },
         [](rc& c, std::string_view v) { c.train.learning_rate = parse_number<real>("lr", v); }, true},
        {"epochs", [](const rc& c) { return std::to_string(c.train.epochs); },
         [](rc& c, std::string_view v) { c.train.epochs = parse_number<std::size_t>("epochs", v); }, true},
        {"k-order", [](const rc& c) { return std::to_string(c.train.order); },
         [](rc& c, std::string_view v) { c.train.order = parse_number<std::size_t>("k-order", v); }, true},
        {"views", [](const rc& c) { return format_list(c.train.views); },
         [](rc& c, std::string_view v) { c.train.views = parse_list("views", v); }, true},
        {"m-schedule", [](const rc& c) { return format_list(c.train.widths); },
         [](rc& c, std::string_view v) { c.train.widths = parse_list("m-schedule", v); }, true},
        {"hidden", [](const rc& c) { return std::to_string(c.train.hidden); },
         [](rc& c, std::string_view v) { c.train.hidden = parse_number<std::size_t>("hidden", v); }, true},
        {"dropout", [](const rc& c) { return format_real(c.train.dropout); },
         [](rc& c, std::string_view v) { c.train.dropout = parse_number<real>("dropout", v); }, true},
        {"alpha", [](const rc& c) { return format_real(c.train.alpha); },
         [](rc& c, std::string_view v) { c.train.alpha = parse_number<real>("alpha", v); }, true},
        {"sigma", [](const rc& c) { return format_real(c.train.sigma); },
         [](rc& c, std::string_view v) { c.train.sigma = parse_number<real>("sigma", v); }, true},
        {"median-sigma", [](const rc& c) { return std::string(c.train.median_sigma ? "true" : "false"); },
         [](rc& c, std::string_view v) { c.train.median_sigma = parse_bool("median-sigma", v); }, true},
        {"squared-kernel", [](const rc& c) { return std::string(c.train.squared_kernel ? "true" : "false"); },
         [](rc& c, std::string_view v) { c.train.squared_kernel = parse_bool("squared-kernel", v); }, true},
        {"laplacian-pool", [](const rc& c) { return to_string(c.train.laplacian_pool); },
         [](rc& c, std::string_view v) { c.train.laplacian_pool = parse_laplacian_pooling(trim(v)); }, true},
        {"lambda-mode", [](const rc& c) { return to_string(c.train.lambda_mode); },
         [](rc& c, std::string_view v) { c.train.lambda_mode = parse_lambda_estimate(trim(v)); }, true},
        {"degree-cap", [](const rc& c) { return std::to_string(c.train.degree_cap); },
         [](rc& c, std::string_view v) { c.train.degree_cap = parse_number<std::size_t>("degree-cap", v); }, true},
        {"encoding", [](const rc& c) { return to_string(c.train.encoding); },
         [](rc& c, std::string_view v) { c.train.encoding = parse_encoding(trim(v)); }, true},
        {"fold-local-stats", [](const rc& c) { return std::string(c.train.fold_local_stats ? "true" : "false"); },
         [](rc& c, std::string_view v) { c.train.fold_local_stats = parse_bool("fold-local-stats", v); }, true},
        {"folds", [](const rc& c) { return std::to_string(c.train.folds); },
         [](rc& c, std::string_view v) { c.train.folds = parse_number<std::size_t>("folds", v); }, true},
        {"fold", [](const rc& c) { return std::to_string(c.fold); },
         [](rc& c, std::string_view v) { c.fold = parse_number<std::size_t>("fold", v); }, true},
        {"max-graphs", [](const rc& c) { return std::to_string(c.max_graphs); },
         [](rc& c, std::string_view v) { c.max_graphs = parse_number<std::size_t>("max-graphs", v); }, true},
        {"parallel-folds", [](const rc& c) { return std::to_string(c.train.parallel_folds); },
         [](rc& c, std::string_view v) { c.train.parallel_folds = parse_number<std::size_t>("parallel-folds", v); }, false},
    };
    return fields;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : detail::config_fields()) keys.emplace_back(f.key);
    return keys;
}

/// Sets one field by its key; unknown keys are rejected.
inline void set_config_value(run_config& cfg, std::string_view key, std::string_view value) {
    for (const auto& f : detail::config_fields()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw config_error("unknown config key '" + std::string(key) + "'");
}

inline std::string get_config_value(const run_config& cfg, std::string_view key) {
    for (const auto& f : detail::config_fields())
        if (key == f.key) return f.get(cfg);
    throw config_error("unknown config key '" + std::string(key) + "'");
}

/// Applies `key = value` lines. `#` starts a comment; blank lines are ignored.
inline void apply_config_text(run_config& cfg, std::string_view text, const std::string& source = "config") {
    for (const auto& line : detail::split_lines(text)) {
        auto body = line.text.substr(0, line.text.find('#'));
        if (detail::trim(body).empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw config_error(source + ":" + std::to_string(line.number) + ": expected key = value");
        }
        try {
            set_config_value(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
        } catch (const config_error& e) {
            throw config_error(source + ":" + std::to_string(line.number) + ": " + e.what());
        }
    }
}

inline void apply_config_file(run_config& cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str(), path.string());
}

/// Canonical `key = value` echo. With `results_only`, fields that cannot
/// change any output (output location, fold parallelism) are left out.
inline std::string config_echo(const run_config& cfg, bool results_only = false) {
    std::string out;
    for (const auto& f : detail::config_fields()) {
        if (results_only && !f.affects_results) continue;
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

/// 64-bit FNV-1a; used to derive stable run identifiers.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string run_id(const run_config& cfg, std::string_view command) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(std::string(command) + "\n" + config_echo(cfg, true))));
    return buf;
}

}  // namespace mvgc
