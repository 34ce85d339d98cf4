// Command-line front end: inspect, gradcheck, train, eval, cv.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/model/checkpoint.hpp"
#include "mvgc/train/config.hpp"
#include "mvgc/train/gradcheck.hpp"
#include "mvgc/train/report.hpp"
#include "mvgc/train/trainer.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

/// Thrown for problems the operator must fix in the invocation (exit 2).
struct usage_error : mvgc::error {
    using mvgc::error::error;
};

const std::vector<std::string> bool_keys = {"median-sigma", "squared-kernel", "fold-local-stats"};

bool is_bool_key(const std::string& k) {
    return std::find(bool_keys.begin(), bool_keys.end(), k) != bool_keys.end();
}

struct invocation {
    std::optional<std::string> config_file;
    std::map<std::string, std::string> flags;  // config key -> raw value from the command line
};

/// Defaults, then recipe defaults for the chosen dataset, then the config
/// file, then command-line flags.
mvgc::run_config resolve(const invocation& inv) {
    mvgc::run_config probe;
    if (inv.config_file) mvgc::apply_config_file(probe, *inv.config_file);
    if (auto it = inv.flags.find("dataset"); it != inv.flags.end()) probe.dataset = it->second;

    mvgc::run_config cfg;
    cfg.dataset = probe.dataset;
    mvgc::apply_recipe_defaults(cfg);
    if (inv.config_file) mvgc::apply_config_file(cfg, *inv.config_file);
    for (const auto& [k, v] : inv.flags) mvgc::set_config_value(cfg, k, v);
    cfg.train.validate();
    return cfg;
}

mvgc::raw_dataset load_raw(const mvgc::run_config& cfg) {
    mvgc::raw_dataset raw;
    try {
        raw = mvgc::load_tu_dataset(cfg.data_root, cfg.dataset);
    } catch (const mvgc::io_error& e) {
        throw usage_error(std::string(e.what()) + " (check --dataset and --data-root)");
    }
    return mvgc::subsample_stratified(raw, cfg.max_graphs, cfg.train.seed);
}

std::filesystem::path run_dir(const mvgc::run_config& cfg, const std::string& command) {
    return std::filesystem::path(cfg.out) / cfg.dataset / command;
}

int cmd_inspect(const invocation& inv) {
    const auto cfg = resolve(inv);
    const auto raw = load_raw(cfg);
    const auto s = mvgc::statistics(raw);
    std::printf("%s: %zu graphs, %zu classes, mean vertices %.2f, mean edges %.2f, vertex labels %s, attribute dim %zu\n",
                raw.name.c_str(), s.graphs, s.classes, s.mean_vertices, s.mean_edges, s.vertex_labels ? "yes" : "no",
                s.attribute_dim);
    return exit_ok;
}

struct gradcheck_args {
    double tolerance = 1e-4;
    double step = 1e-5;
    bool toy_linear = false;
    std::size_t graph_index = 0;
    std::size_t random_vertices = 7;
};

bool print_report(const std::string& title, const mvgc::gradcheck_report& rep, double tolerance) {
    std::printf("%s\n", title.c_str());
    for (const auto& g : rep.groups) {
        std::printf("  %-18s %-4s rel %.3e  worst coord %.3e  checked %zu  skipped %zu\n", g.name.c_str(),
                    g.passed ? "ok" : "FAIL", g.relative_error, g.max_coordinate_error, g.checked, g.skipped);
    }
    std::printf("  %s at tolerance %.1e (worst %.3e)\n", rep.passed ? "PASS" : "FAIL", tolerance, rep.worst());
    return rep.passed;
}

int cmd_gradcheck(const invocation& inv, const gradcheck_args& args) {
    auto cfg = resolve(inv);
    const auto raw = load_raw(cfg);
    const auto data = mvgc::encode(raw, cfg.train.encoding, cfg.train.degree_cap);
    if (args.graph_index >= data.graphs.size()) {
        throw usage_error("--graph-index " + std::to_string(args.graph_index) + " outside 0.." +
                          std::to_string(data.graphs.size() - 1));
    }
    auto tc = cfg.train;
    tc.dropout = 0.0;
    auto mc = mvgc::make_model_config(tc, data.feature_dim, data.num_classes);
    if (args.toy_linear) {
        mc.views = {1};
        mc.widths = {8};
        mc.hidden = 8;
        mc.order = 1;
        mc.alpha = 0.0;
    }
    mvgc::rng gen(cfg.train.seed);
    auto init_stream = gen.split(1);
    const auto m = mvgc::init_model(mc, init_stream);
    auto graph_stream = gen.split(2);
    const auto random = mvgc::random_graph(args.random_vertices, data.feature_dim, 0.4, graph_stream,
                                           graph_stream.next() % data.num_classes);
    mvgc::gradcheck_options opt;
    opt.step = args.step;
    opt.tolerance = args.tolerance;
    opt.seed = cfg.train.seed;
    bool ok = print_report("random graph, " + std::to_string(args.random_vertices) + " vertices",
                           mvgc::finite_difference_check(m, random, opt), args.tolerance);
    ok = print_report(cfg.dataset + " graph #" + std::to_string(args.graph_index),
                      mvgc::finite_difference_check(m, data.graphs[args.graph_index], opt), args.tolerance) && ok;
    return ok ? exit_ok : exit_failure;
}

/// Dataset as seen by `fold` of the run's split (fold-local statistics when asked).
mvgc::dataset fold_dataset(const mvgc::raw_dataset& raw, const mvgc::run_config& cfg, const mvgc::fold_plan& plan,
                           std::size_t fold) {
    if (cfg.train.fold_local_stats && cfg.train.encoding == mvgc::feature_encoding::continuous) {
        const auto tr = plan.train_indices(fold);
        return mvgc::encode(raw, cfg.train.encoding, cfg.train.degree_cap, tr);
    }
    return mvgc::encode(raw, cfg.train.encoding, cfg.train.degree_cap);
}

mvgc::fold_plan split_for(const mvgc::raw_dataset& raw, const mvgc::run_config& cfg) {
    std::vector<std::size_t> labels;
    for (const auto& g : raw.graphs) labels.push_back(g.label);
    auto plan = mvgc::stratified_kfold(labels, cfg.train.folds, cfg.train.seed);
    if (cfg.fold >= plan.k) {
        throw usage_error("--fold " + std::to_string(cfg.fold) + " outside 0.." + std::to_string(plan.k - 1));
    }
    return plan;
}

int cmd_train(const invocation& inv) {
    const auto cfg = resolve(inv);
    const auto raw = load_raw(cfg);
    const auto plan = split_for(raw, cfg);
    const auto data = fold_dataset(raw, cfg, plan, cfg.fold);
    const auto start = std::chrono::steady_clock::now();
    auto result = mvgc::train(data, plan, cfg.fold, cfg.train, [&](std::size_t epoch, double loss, std::optional<double> acc) {
        std::fprintf(stderr, "epoch %zu/%zu loss %.4f test acc %.4f\n", epoch, cfg.train.epochs, loss, acc.value_or(0.0));
    });
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto dir = run_dir(cfg, "train");
    mvgc::checkpoint ck;
    ck.net = std::move(result.trained);
    for (const auto& key : mvgc::config_keys()) ck.metadata.emplace_back("run." + key, mvgc::get_config_value(cfg, key));
    ck.metadata.emplace_back("final_accuracy", mvgc::detail::format_real(result.report.test_accuracy));
    mvgc::save_checkpoint(ck, dir / "checkpoint.mvgc");
    const std::vector<mvgc::fold_report> folds{result.report};
    mvgc::write_json(dir / "report.json",
                     mvgc::make_report("train", cfg, folds, result.report.test_accuracy, 0.0));
    mvgc::write_json(dir / "timing.json", mvgc::make_timing("train", cfg, folds, total));
    std::printf("%s fold %zu: test accuracy %.4f\n", cfg.dataset.c_str(), cfg.fold, result.report.test_accuracy);
    std::printf("checkpoint %s\n", (dir / "checkpoint.mvgc").string().c_str());
    return exit_ok;
}

int cmd_eval(const invocation& inv, const std::string& checkpoint_path) {
    const auto ck = mvgc::load_checkpoint(checkpoint_path);
    // The checkpoint's run settings are the base; explicit flags still win.
    invocation merged;
    merged.config_file = inv.config_file;
    for (const auto& [k, v] : ck.metadata)
        if (k.starts_with("run.")) merged.flags[k.substr(4)] = v;
    for (const auto& [k, v] : inv.flags) merged.flags[k] = v;
    const auto cfg = resolve(merged);
    const auto raw = load_raw(cfg);
    const auto& mc = ck.net.config;
    const auto shape = mvgc::encode(raw, cfg.train.encoding, cfg.train.degree_cap);
    if (shape.feature_dim != mc.input_dim || shape.num_classes != mc.num_classes) {
        std::fprintf(stderr,
                     "error: checkpoint expects %zu features and %zu classes; %s provides %zu features and %zu classes\n",
                     mc.input_dim, mc.num_classes, cfg.dataset.c_str(), shape.feature_dim, shape.num_classes);
        return exit_failure;
    }
    const auto plan = split_for(raw, cfg);
    const auto data = fold_dataset(raw, cfg, plan, cfg.fold);
    const auto test = plan.test_indices(cfg.fold);
    const double acc = mvgc::evaluate(ck.net, data, test);
    std::printf("%s fold %zu: accuracy %.4f (%zu graphs)\n", cfg.dataset.c_str(), cfg.fold, acc, test.size());
    if (const auto* recorded = ck.find("final_accuracy")) std::printf("recorded final accuracy %s\n", recorded->c_str());
    return exit_ok;
}

int cmd_cv(const invocation& inv) {
    const auto cfg = resolve(inv);
    const auto raw = load_raw(cfg);
    std::vector<std::size_t> labels;
    for (const auto& g : raw.graphs) labels.push_back(g.label);
    const auto plan = mvgc::stratified_kfold(labels, cfg.train.folds, cfg.train.seed);
    const auto start = std::chrono::steady_clock::now();
    const auto cv = mvgc::cross_validate(
        [&](const mvgc::fold_plan& p, std::size_t f) { return fold_dataset(raw, cfg, p, f); }, plan, cfg.train,
        [](const mvgc::fold_report& r) {
            std::fprintf(stderr, "fold %zu: final acc %.4f (best %.4f at epoch %zu) %.1fs\n", r.fold_index,
                         r.test_accuracy, r.best_test_accuracy, r.best_epoch, r.wall_time);
        });
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto dir = run_dir(cfg, "cv");
    mvgc::write_json(dir / "report.json", mvgc::make_report("cv", cfg, cv));
    mvgc::write_json(dir / "timing.json", mvgc::make_timing("cv", cfg, cv.folds, total));
    const auto table = mvgc::summary_table(cfg.dataset, cv.folds, cv.mean_accuracy, cv.std_accuracy);
    mvgc::detail::write_text(dir / "summary.txt", table);
    std::printf("%s: %.4f \xC2\xB1 %.4f\n", cfg.dataset.c_str(), cv.mean_accuracy, cv.std_accuracy);
    std::printf("report %s\n", (dir / "report.json").string().c_str());
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-view graph convolution for graph classification"};
    app.require_subcommand(1);
    app.fallthrough();

    invocation inv;
    std::string config_file;
    app.add_option("--config", config_file, "key = value config file (flags override it)");
    std::map<std::string, std::string> raw_flags;
    const mvgc::run_config defaults;
    for (const auto& key : mvgc::config_keys()) {
        const auto name = "--" + key;
        const auto help = "default: " + mvgc::get_config_value(defaults, key);
        if (is_bool_key(key)) {
            app.add_flag(name + "{true}", raw_flags[key], help)->expected(0, 1);
        } else {
            app.add_option(name, raw_flags[key], help);
        }
    }

    auto* inspect = app.add_subcommand("inspect", "print dataset statistics");
    auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    gradcheck_args ga;
    gradcheck->add_option("--tolerance", ga.tolerance, "relative error tolerance")->capture_default_str();
    gradcheck->add_option("--step", ga.step, "central-difference step")->capture_default_str();
    gradcheck->add_flag("--toy-linear", ga.toy_linear, "single view, K = 1, alpha = 0");
    gradcheck->add_option("--graph-index", ga.graph_index, "dataset graph to check")->capture_default_str();
    gradcheck->add_option("--random-vertices", ga.random_vertices, "vertices of the random graph")->capture_default_str();
    auto* train = app.add_subcommand("train", "train on one fold's training split and save a checkpoint");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on its fold's test split");
    std::string checkpoint_path;
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    if (!config_file.empty()) inv.config_file = config_file;
    for (const auto& key : mvgc::config_keys()) {
        if (app.count("--" + key) > 0) inv.flags[key] = raw_flags[key];
    }

    try {
        if (inspect->parsed()) return cmd_inspect(inv);
        if (gradcheck->parsed()) return cmd_gradcheck(inv, ga);
        if (train->parsed()) return cmd_train(inv);
        if (eval->parsed()) return cmd_eval(inv, checkpoint_path);
        if (cv->parsed()) return cmd_cv(inv);
    } catch (const usage_error& e) {
        std::fprintf(stderr, "error: %s\n%s", e.what(), app.help().c_str());
        return exit_usage;
    } catch (const mvgc::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_usage;
    } catch (const mvgc::fold_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_failure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_failure;
    }
    return exit_usage;
}
