#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mvgc/error.hpp"
#include "mvgc/train/config.hpp"
#include "mvgc/train/trainer.hpp"

namespace mvgc {

inline constexpr int report_schema_version = 1;

namespace detail {

inline nlohmann::ordered_json config_json(const run_config& cfg) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& f : config_fields())
        if (f.affects_results) j[f.key] = f.get(cfg);
    return j;
}

inline nlohmann::ordered_json fold_json(const fold_report& r) {
    nlohmann::ordered_json j;
    j["fold_index"] = r.fold_index;
    j["test_accuracy"] = r.test_accuracy;
    j["best_epoch"] = r.best_epoch;
    j["best_test_accuracy"] = r.best_test_accuracy;
    j["train_loss_curve"] = r.train_loss_curve;
    j["test_accuracy_curve"] = r.test_accuracy_curve;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
    if (!out) throw io_error("error while writing " + path.string());
}

}  // namespace detail

/// Result document of a run. Contains nothing that varies between identical
/// runs: no timestamps, no wall times, no output paths.
inline nlohmann::ordered_json make_report(std::string_view command, const run_config& cfg,
                                          const std::vector<fold_report>& folds, real mean, real std) {
    nlohmann::ordered_json j;
    j["schema"] = "mvgc.report";
    j["schema_version"] = report_schema_version;
    j["run_id"] = run_id(cfg, command);
    j["command"] = command;
    j["config"] = detail::config_json(cfg);
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : folds) j["folds"].push_back(detail::fold_json(f));
    j["aggregate"] = {{"mean_accuracy", mean}, {"std_accuracy", std}, {"folds", folds.size()}};
    return j;
}

inline nlohmann::ordered_json make_report(std::string_view command, const run_config& cfg, const cv_result& cv) {
    return make_report(command, cfg, cv.folds, cv.mean_accuracy, cv.std_accuracy);
}

/// Wall-clock companion of a report.
inline nlohmann::ordered_json make_timing(std::string_view command, const run_config& cfg,
                                          const std::vector<fold_report>& folds, double total_seconds) {
    nlohmann::ordered_json j;
    j["schema"] = "mvgc.timing";
    j["schema_version"] = report_schema_version;
    j["run_id"] = run_id(cfg, command);
    j["parallel_folds"] = cfg.train.parallel_folds;
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : folds) j["folds"].push_back({{"fold_index", f.fold_index}, {"wall_time", f.wall_time}});
    j["total_wall_time"] = total_seconds;
    return j;
}

/// Plain-text table: one row per fold, then the aggregate.
inline std::string summary_table(const std::string& dataset, const std::vector<fold_report>& folds, real mean,
                                 real std) {
    std::ostringstream os;
    char line[128];
    os << "fold  final_acc  best_acc  best_epoch  final_loss\n";
    for (const auto& f : folds) {
        std::snprintf(line, sizeof line, "%4zu  %9.4f  %8.4f  %10zu  %10.4f\n", f.fold_index, f.test_accuracy,
                      f.best_test_accuracy, f.best_epoch, f.train_loss_curve.empty() ? 0.0 : f.train_loss_curve.back());
        os << line;
    }
    std::snprintf(line, sizeof line, "%s: %.4f \xC2\xB1 %.4f\n", dataset.c_str(), mean, std);
    os << line;
    return os.str();
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    detail::write_text(path, j.dump(2) + "\n");
}

}  // namespace mvgc
