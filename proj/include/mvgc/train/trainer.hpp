#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/error.hpp"
#include "mvgc/model/model.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/numeric/rng.hpp"
#include "mvgc/train/backprop.hpp"

namespace mvgc {

/// Training recipe and architecture knobs.
struct train_config {
    real learning_rate = 2e-3;
    std::size_t epochs = 80;
    std::uint64_t seed = 0;
    std::size_t order = 6;
    std::vector<std::size_t> views{8, 6, 6};
    std::vector<std::size_t> widths{80, 128, 256};
    std::size_t hidden = 128;
    real dropout = 0.0;
    real alpha = 1.0;
    real sigma = 1.0;
    bool squared_kernel = false;
    bool median_sigma = false;
    laplacian_pooling laplacian_pool = laplacian_pooling::dominant;
    lambda_estimate lambda_mode = lambda_estimate::exact;
    std::size_t degree_cap = 50;
    feature_encoding encoding = feature_encoding::label_onehot;
    bool fold_local_stats = false;
    std::size_t folds = 10;
    std::size_t parallel_folds = 1;
    bool track_test_accuracy = true;

    void validate() const {
        if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
        if (epochs < 1) throw config_error("epochs must be at least 1");
        if (folds < 1) throw config_error("fold count must be at least 1");
        if (parallel_folds < 1) throw config_error("parallel folds must be at least 1");
    }
};

inline model_config make_model_config(const train_config& tc, std::size_t input_dim, std::size_t num_classes) {
    model_config mc;
    mc.input_dim = input_dim;
    mc.num_classes = num_classes;
    mc.order = tc.order;
    mc.views = tc.views;
    mc.widths = tc.widths;
    mc.hidden = tc.hidden;
    mc.dropout = tc.dropout;
    mc.alpha = tc.alpha;
    mc.sigma = tc.sigma;
    mc.squared_kernel = tc.squared_kernel;
    mc.median_sigma = tc.median_sigma;
    mc.laplacian_pool = tc.laplacian_pool;
    mc.lambda_mode = tc.lambda_mode;
    return mc;
}

/// p <- p - lr * g for every parameter. The metric normalization happens at
/// use time inside the forward pass, so Q is updated as is.
inline void sgd_step(model& m, const gradient_set& grads, real lr) {
    if (!(lr > 0.0)) throw domain_error("sgd_step: learning rate must be positive");
    auto params = parameters(m);
    const auto gs = parameters(grads);
    if (params.size() != gs.size()) throw shape_error("sgd_step: gradient set does not match model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].rows != gs[i].rows || params[i].cols != gs[i].cols) {
            throw shape_error("sgd_step: gradient shape mismatch for " + params[i].key);
        }
        for (Eigen::Index k = 0; k < gs[i].size(); ++k) {
            if (!std::isfinite(gs[i].data[k])) throw numeric_error("sgd_step: non-finite gradient in " + params[i].key);
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (Eigen::Index k = 0; k < gs[i].size(); ++k) params[i].data[k] -= lr * gs[i].data[k];
    }
}

/// Argmax-class accuracy in inference mode.
inline real evaluate(const model& m, const dataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw domain_error("evaluate: empty index set");
    std::size_t correct = 0;
    for (auto i : indices) {
        const auto& g = data.graphs.at(i);
        if (predict(m, g) == g.label) ++correct;
    }
    return static_cast<real>(correct) / static_cast<real>(indices.size());
}

struct fold_report {
    std::size_t fold_index = 0;
    real test_accuracy = 0.0;  // after the final epoch
    std::vector<real> train_loss_curve;
    std::vector<real> test_accuracy_curve;  // empty unless tracked
    std::size_t best_epoch = 0;             // 1-based; 0 when not tracked
    real best_test_accuracy = 0.0;
    double wall_time = 0.0;  // seconds
};

struct train_result {
    model trained;
    fold_report report;
};

/// Seeded streams for one fold: initialization, shuffling, dropout.
struct fold_streams {
    rng init;
    rng shuffle;
    rng dropout;

    fold_streams(std::uint64_t seed, std::size_t fold)
        : init(rng(seed).split(fold + 1).split(1)),
          shuffle(rng(seed).split(fold + 1).split(2)),
          dropout(rng(seed).split(fold + 1).split(3)) {}
};

using epoch_callback = std::function<void(std::size_t epoch, real mean_loss, std::optional<real> test_accuracy)>;

/// Single-graph SGD on every graph outside `test_indices`, in a fresh
/// shuffled order each epoch.
inline train_result train(const dataset& data, std::span<const std::size_t> train_indices,
                          std::span<const std::size_t> test_indices, std::size_t fold, const train_config& cfg,
                          const epoch_callback& on_epoch = {}) {
    cfg.validate();
    if (train_indices.empty()) throw domain_error("train: empty training set");
    const auto start = std::chrono::steady_clock::now();
    fold_streams streams(cfg.seed, fold);
    train_result r;
    r.trained = init_model(make_model_config(cfg, data.feature_dim, data.num_classes), streams.init);
    r.report.fold_index = fold;
    std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        streams.shuffle.shuffle(order);
        real total = 0.0;
        for (auto i : order) {
            auto step = compute_gradients(r.trained, data.graphs[i], streams.dropout);
            total += step.loss;
            sgd_step(r.trained, step.grads, cfg.learning_rate);
        }
        const real mean_loss = total / static_cast<real>(order.size());
        r.report.train_loss_curve.push_back(mean_loss);
        std::optional<real> acc;
        if (cfg.track_test_accuracy && !test_indices.empty()) {
            acc = evaluate(r.trained, data, test_indices);
            r.report.test_accuracy_curve.push_back(*acc);
            if (*acc > r.report.best_test_accuracy || r.report.best_epoch == 0) {
                r.report.best_test_accuracy = *acc;
                r.report.best_epoch = epoch;
            }
        }
        if (on_epoch) on_epoch(epoch, mean_loss, acc);
    }
    if (!test_indices.empty()) {
        r.report.test_accuracy = r.report.test_accuracy_curve.empty() ? evaluate(r.trained, data, test_indices)
                                                                      : r.report.test_accuracy_curve.back();
    }
    r.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Trains on every fold except `fold` of `plan` and tests on `fold`.
inline train_result train(const dataset& data, const fold_plan& plan, std::size_t fold, const train_config& cfg,
                          const epoch_callback& on_epoch = {}) {
    if (fold >= plan.k) throw domain_error("train: fold " + std::to_string(fold) + " outside 0.." + std::to_string(plan.k - 1));
    const auto tr = plan.train_indices(fold);
    const auto te = plan.test_indices(fold);
    return train(data, tr, te, fold, cfg, on_epoch);
}

struct cv_result {
    real mean_accuracy = 0.0;
    real std_accuracy = 0.0;  // population std over folds
    std::vector<fold_report> folds;
};

/// Mean and population standard deviation of fold accuracies.
inline std::pair<real, real> aggregate_accuracies(std::span<const real> acc) {
    if (acc.empty()) return {0.0, 0.0};
    real mean = 0.0;
    for (auto a : acc) mean += a;
    mean /= static_cast<real>(acc.size());
    real var = 0.0;
    for (auto a : acc) var += (a - mean) * (a - mean);
    var /= static_cast<real>(acc.size());
    return {mean, std::sqrt(var)};
}

/// Error from one fold of a cross-validation run.
class fold_error : public error {
public:
    fold_error(std::size_t fold, const std::string& what)
        : error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
    std::size_t fold() const noexcept { return fold_; }

private:
    std::size_t fold_;
};

using fold_callback = std::function<void(const fold_report&)>;

/// k-fold cross-validation. `encode_fold` supplies the dataset seen by a
/// fold (fold-local feature statistics); folds run on up to
/// `cfg.parallel_folds` threads and are collected by index.
inline cv_result cross_validate(const std::function<dataset(const fold_plan&, std::size_t)>& encode_fold,
                                const fold_plan& plan, const train_config& cfg, const fold_callback& on_fold = {}) {
    cfg.validate();
    if (plan.k < 2) throw split_error("cross-validation needs at least 2 folds");
    cv_result out;
    out.folds.resize(plan.k);
    std::vector<std::exception_ptr> errors(plan.k);
    std::mutex callback_mutex;
    auto run_fold = [&](std::size_t f) {
        try {
            const auto data = encode_fold(plan, f);
            auto r = train(data, plan, f, cfg);
            out.folds[f] = std::move(r.report);
            if (on_fold) {
                std::lock_guard lock(callback_mutex);
                on_fold(out.folds[f]);
            }
        } catch (...) {
            errors[f] = std::current_exception();
        }
    };
    const auto workers = std::min(cfg.parallel_folds, plan.k);
    if (workers <= 1) {
        for (std::size_t f = 0; f < plan.k; ++f) {
            run_fold(f);
            if (errors[f]) break;
        }
    } else {
        std::size_t next = 0;
        std::mutex next_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    std::size_t f;
                    {
                        std::lock_guard lock(next_mutex);
                        if (next >= plan.k) return;
                        f = next++;
                    }
                    run_fold(f);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (std::size_t f = 0; f < plan.k; ++f) {
        if (!errors[f]) continue;
        try {
            std::rethrow_exception(errors[f]);
        } catch (const std::exception& e) {
            throw fold_error(f, e.what());
        }
    }
    std::vector<real> acc;
    for (const auto& r : out.folds) acc.push_back(r.test_accuracy);
    std::tie(out.mean_accuracy, out.std_accuracy) = aggregate_accuracies(acc);
    return out;
}

inline cv_result cross_validate(const dataset& data, const train_config& cfg, const fold_callback& on_fold = {}) {
    const auto plan = stratified_kfold(data, cfg.folds, cfg.seed);
    return cross_validate([&](const fold_plan&, std::size_t) -> const dataset& { return data; }, plan, cfg, on_fold);
}

/// Encodes `raw` per `cfg` (with fold-local statistics when requested) and
/// cross-validates.
inline cv_result cross_validate(const raw_dataset& raw, const train_config& cfg, const fold_callback& on_fold = {}) {
    const auto global = encode(raw, cfg.encoding, cfg.degree_cap);
    const auto plan = stratified_kfold(global, cfg.folds, cfg.seed);
    const bool local = cfg.fold_local_stats && cfg.encoding == feature_encoding::continuous;
    return cross_validate(
        [&](const fold_plan& p, std::size_t f) {
            if (!local) return global;
            const auto tr = p.train_indices(f);
            return encode(raw, cfg.encoding, cfg.degree_cap, tr);
        },
        plan, cfg, on_fold);
}

}  // namespace mvgc
