// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alloc_counter.hpp"
#include "jacobi.hpp"
#include "mvgc/conv/spectral_conv.hpp"
#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/model/model.hpp"
#include "mvgc/train/config.hpp"
#include "mvgc/train/gradcheck.hpp"
#include "mvgc/train/report.hpp"
#include "mvgc/train/trainer.hpp"
#include "mvgc/view/view_metric.hpp"

namespace fs = std::filesystem;
using namespace mvgc;

namespace {

struct outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Data roots searched in order: --data-root, $TU_DATA_ROOT, the bundled data/.
std::vector<fs::path> data_roots(const std::string& explicit_root) {
    std::vector<fs::path> roots;
    if (!explicit_root.empty()) roots.emplace_back(explicit_root);
    if (const char* env = std::getenv("TU_DATA_ROOT")) roots.emplace_back(env);
    roots.emplace_back(fs::path(MVGC_SOURCE_DIR) / "data");
    return roots;
}

std::optional<fs::path> locate(const std::vector<fs::path>& roots, const std::string& name) {
    for (const auto& r : roots)
        if (fs::exists(r / name / (name + "_A.txt")) || fs::exists(r / (name + "_A.txt"))) return r;
    return std::nullopt;
}

struct context {
    std::vector<fs::path> roots;

    const raw_dataset& mutag_raw() const {
        static const raw_dataset raw = [&] {
            const auto root = locate(roots, "MUTAG");
            if (!root) throw io_error("MUTAG not found under any data root");
            return load_tu_dataset(*root, "MUTAG");
        }();
        return raw;
    }
    const dataset& mutag() const {
        static const dataset data = encode_label_onehot(mutag_raw());
        return data;
    }
};

// 1 ------------------------------------------------------------------------

struct table_row {
    const char* name;  // directory name in the TU collection
    std::size_t graphs;
    std::size_t classes;
    double vertices;
    double edges;
};

outcome parser_fidelity(const context& ctx) {
    const std::vector<table_row> rows = {
        {"MUTAG", 188, 2, 17.93, 19.79},       {"PTC_MR", 344, 2, 14.29, 14.69},
        {"ENZYMES", 600, 6, 32.63, 62.14},     {"PROTEINS", 1113, 2, 39.06, 72.82},
        {"IMDB-BINARY", 1000, 2, 19.77, 96.53}, {"IMDB-MULTI", 1500, 3, 13.00, 65.94},
    };
    bool ok = true;
    std::string detail;
    for (const auto& row : rows) {
        const auto root = locate(ctx.roots, row.name);
        if (!root) {
            ok = false;
            detail += fmt("\n    %-12s missing (set TU_DATA_ROOT or run tools/fetch_tu.sh)", row.name);
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto s = statistics(load_tu_dataset(*root, row.name));
        const double secs = seconds_since(t0);
        const bool row_ok = s.graphs == row.graphs && s.classes == row.classes &&
                            std::abs(s.mean_vertices - row.vertices) <= 0.01 + 1e-9 &&
                            std::abs(s.mean_edges - row.edges) <= 0.01 + 1e-9 && secs < 10.0;
        ok = ok && row_ok;
        detail += fmt("\n    %-12s %s graphs %zu/%zu classes %zu/%zu vertices %.3f/%.2f edges %.3f/%.2f %.2fs", row.name,
                      row_ok ? "ok  " : "FAIL", s.graphs, row.graphs, s.classes, row.classes, s.mean_vertices,
                      row.vertices, s.mean_edges, row.edges, secs);
    }
    return {ok, detail};
}

// 2 ------------------------------------------------------------------------

outcome gradient_correctness(const context& ctx) {
    const auto& data = ctx.mutag();
    train_config tc;
    tc.dropout = 0.0;
    rng gen(2024);
    auto init_stream = gen.split(1);
    const auto m = init_model(make_model_config(tc, data.feature_dim, data.num_classes), init_stream);
    std::vector<std::pair<std::string, graph>> cases;
    auto graph_stream = gen.split(2);
    for (std::size_t n : {4, 7, 10}) {
        cases.emplace_back(fmt("random n=%zu", n), random_graph(n, data.feature_dim, 0.4, graph_stream, n % 2));
    }
    cases.emplace_back("MUTAG #0", data.graphs[0]);
    cases.emplace_back("MUTAG #1", data.graphs[1]);

    gradcheck_options opt;
    opt.tolerance = 1e-4;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (const auto& [name, g] : cases) {
        const auto rep = finite_difference_check(m, g, opt);
        std::size_t checked = 0, skipped = 0;
        std::string bad;
        for (const auto& grp : rep.groups) {
            checked += grp.checked;
            skipped += grp.skipped;
            if (!(grp.relative_error < 1e-4)) bad += " " + grp.name;
        }
        const bool case_ok = rep.passed && bad.empty() && checked > 0;
        ok = ok && case_ok;
        detail += fmt("\n    %-12s %s worst rel %.2e over %zu groups, %zu probes (%zu skipped)%s", name.c_str(),
                      case_ok ? "ok  " : "FAIL", rep.worst(), rep.groups.size(), checked, skipped, bad.c_str());
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 300.0;
    detail += fmt("\n    runtime %.1fs (budget 300s)", secs);
    return {ok, detail};
}

// 3 ------------------------------------------------------------------------

outcome spectral_oracle(const context&) {
    rng gen(3);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + gen.next() % 9;
        const std::size_t d = 1 + gen.next() % 4;
        const std::size_t k = 1 + gen.next() % 8;
        const auto g = random_graph(n, d, 0.5, gen, 0);
        view_params view;
        view.q_factor = dense_matrix(d, d);
        for (Eigen::Index i = 0; i < view.q_factor.size(); ++i) view.q_factor.data()[i] = gen.uniform();
        const auto vg = build_view_graph(g.features, normalized_laplacian(g.adjacency), view);
        const auto& l = vg.l_hybrid;
        const auto eig = test::jacobi_eigen(l);
        const double lmax = std::max(eig.values.back(), 1e-3);
        std::vector<real> theta(k);
        for (auto& t : theta) t = gen.uniform(-1.0, 1.0);

        const auto basis = chebyshev_terms(g.features, l, k, lmax);
        const auto got = project_signal(basis, theta);
        dense_matrix expected(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k * d));
        for (std::size_t p = 0; p < k; ++p) {
            vector gp(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const double t = std::clamp(2.0 * eig.values[i] / lmax - 1.0, -1.0, 1.0);
                gp[static_cast<Eigen::Index>(i)] = theta[p] * std::cos(static_cast<double>(p) * std::acos(t));
            }
            expected.middleCols(static_cast<Eigen::Index>(p * d), static_cast<Eigen::Index>(d)) =
                eig.vectors * gp.asDiagonal() * eig.vectors.transpose() * g.features;
        }
        const double rel = (got - expected).norm() / std::max(expected.norm(), 1e-300);
        worst = std::max(worst, rel);
    }
    return {worst < 1e-7, fmt("max relative error %.3e over 20 graphs (tolerance 1e-7)", worst)};
}

// 4 ------------------------------------------------------------------------

outcome factorization_oracle(const context&) {
    rng gen(4);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + gen.next() % 15);
        const auto d = static_cast<Eigen::Index>(1 + gen.next() % 6);
        dense_matrix x(n, d), q(d, d);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gen.uniform(-2.0, 2.0);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = gen.uniform();
        const dense_matrix m = q * q.transpose() / (q * q.transpose()).maxCoeff();
        const auto fd = feature_differences(x);
        const auto dist = pairwise_mahalanobis(fd.diffs, m);
        Eigen::Index pair = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j, ++pair) {
                const vector diff = (x.row(i) - x.row(j)).transpose();
                const double naive = std::sqrt(diff.dot(m * diff));
                worst = std::max(worst, std::abs(dist[pair] - naive));
            }
        }
    }
    const Eigen::Index n = 80, d = 4;
    dense_matrix x(n, d), q(d, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gen.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = gen.uniform();
    const dense_matrix m = q * q.transpose() / (q * q.transpose()).maxCoeff();
    const auto fd = feature_differences(x);
    const long long c = n * (n - 1) / 2;
    test::alloc::start();
    const auto dist = pairwise_mahalanobis(fd.diffs, m);
    test::alloc::stop();
    const long long peak = test::alloc::peak.load();
    const long long cd_bound = 3 * c * d * static_cast<long long>(sizeof(double)) + 4096;
    const long long cc_bytes = c * c * static_cast<long long>(sizeof(double));
    const bool ok = worst < 1e-8 && dist.size() == c && peak <= cd_bound && peak < cc_bytes / 100;
    return {ok, fmt("max abs error %.3e over 100 instances (tolerance 1e-8); peak auxiliary %lld bytes for c=%lld, d=%lld "
                    "(bound 3cd*8+4096 = %lld; c^2*8 = %lld)",
                    worst, peak, c, static_cast<long long>(d), cd_bound, cc_bytes)};
}

// 5 ------------------------------------------------------------------------

outcome laplacian_spectra(const context& ctx) {
    std::vector<graph> fixtures;
    for (const auto& g : ctx.mutag().graphs)
        if (g.vertex_count() <= 12) fixtures.push_back(g);
    const std::size_t from_mutag = fixtures.size();
    const auto toy_root = fs::path(MVGC_SOURCE_DIR) / "data";
    for (const auto* name : {"TOY_LABELS", "TOY_ATTRS"}) {
        const auto raw = load_tu_dataset(toy_root, name);
        const auto data = raw.attribute_dim > 0 ? encode(raw, feature_encoding::continuous, 50) : encode_label_onehot(raw);
        for (const auto& g : data.graphs)
            if (g.vertex_count() <= 12) fixtures.push_back(g);
    }
    rng gen(5);
    for (int i = 0; i < 20; ++i) fixtures.push_back(random_graph(2 + gen.next() % 11, 3, 0.3, gen, 0));

    double lo_norm = 1e300, hi_norm = -1e300, lo_h = 1e300, hi_h = -1e300;
    for (const auto& g : fixtures) {
        const auto l = normalized_laplacian(g.adjacency);
        const auto ev = test::jacobi_eigenvalues(l);
        lo_norm = std::min(lo_norm, ev.front());
        hi_norm = std::max(hi_norm, ev.back());
        if (g.vertex_count() < 2) continue;
        const auto d = static_cast<Eigen::Index>(g.feature_dim());
        view_params view;
        view.q_factor = dense_matrix(d, d);
        for (Eigen::Index i = 0; i < view.q_factor.size(); ++i) view.q_factor.data()[i] = gen.uniform();
        const auto vg = build_view_graph(g.features, l, view, {1.0, 1.0, false});
        const auto eh = test::jacobi_eigenvalues(vg.l_hybrid);
        lo_h = std::min(lo_h, eh.front());
        hi_h = std::max(hi_h, eh.back());
    }
    const bool ok = lo_norm >= -1e-8 && hi_norm <= 2.0 + 1e-8 && lo_h >= -1e-8 && hi_h <= 4.0 + 1e-8;
    return {ok, fmt("%zu graphs (%zu from MUTAG); L_norm spectrum [%.3e, %.6f], L_h spectrum [%.3e, %.6f]",
                    fixtures.size(), from_mutag, lo_norm, hi_norm, lo_h, hi_h)};
}

// 6 ------------------------------------------------------------------------

outcome permutation_invariance(const context& ctx) {
    const auto& data = ctx.mutag();
    train_config tc;
    rng gen(6);
    const auto m = init_model(make_model_config(tc, data.feature_dim, data.num_classes), gen);
    double worst = 0.0;
    std::size_t checks = 0;
    for (std::size_t gi = 0; gi < 10; ++gi) {
        const auto& g = data.graphs[gi * 17];
        const auto base = classify(m, g);
        const auto n = g.vertex_count();
        for (int p = 0; p < 10; ++p) {
            std::vector<std::size_t> perm(n);
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            gen.shuffle(perm);
            graph h = g;
            for (std::size_t i = 0; i < n; ++i) {
                h.features.row(static_cast<Eigen::Index>(perm[i])) = g.features.row(static_cast<Eigen::Index>(i));
                for (std::size_t j = 0; j < n; ++j) {
                    h.adjacency(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) =
                        g.adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
            worst = std::max(worst, (classify(m, h) - base).cwiseAbs().maxCoeff());
            ++checks;
        }
    }
    return {worst < 1e-8, fmt("max probability deviation %.3e over %zu permutations (tolerance 1e-8)", worst, checks)};
}

// 7, 8 ---------------------------------------------------------------------

cv_result run_cv(const context& ctx, const train_config& tc) {
    return cross_validate(ctx.mutag_raw(), tc, [](const fold_report& r) {
        std::fprintf(stderr, "    fold %zu: %.4f (%.0fs)\n", r.fold_index, r.test_accuracy, r.wall_time);
    });
}

outcome mutag_end_to_end(const context& ctx) {
    train_config tc;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cv = run_cv(ctx, tc);
    const double secs = seconds_since(t0);
    std::string folds;
    for (const auto& f : cv.folds) folds += fmt(" %.3f", f.test_accuracy);
    const bool ok = cv.mean_accuracy >= 0.85 && secs <= 4 * 3600.0;
    return {ok, fmt("mean %.4f +- %.4f (threshold 0.85), %.0fs; folds%s", cv.mean_accuracy, cv.std_accuracy, secs,
                    folds.c_str())};
}

outcome view_count_trend(const context& ctx) {
    std::map<std::size_t, double> mean;
    std::string detail;
    for (std::size_t views : {2, 6}) {
        double total = 0.0;
        for (std::uint64_t seed : {1, 2, 3}) {
            train_config tc;
            tc.views = {views, views, views};
            tc.seed = seed;
            const auto cv = run_cv(ctx, tc);
            total += cv.mean_accuracy;
            detail += fmt("\n    views %zu seed %llu: %.4f", views, static_cast<unsigned long long>(seed), cv.mean_accuracy);
        }
        mean[views] = total / 3.0;
    }
    const double gain = mean[6] - mean[2];
    detail = fmt("views 2: %.4f, views 6: %.4f, gain %+.4f (required >= 0.01)", mean[2], mean[6], gain) + detail;
    return {gain >= 0.01, detail};
}

// 9 ------------------------------------------------------------------------

outcome determinism(const context& ctx) {
    run_config cfg;
    cfg.train.epochs = 2;
    auto once = [&] { return make_report("cv", cfg, cross_validate(ctx.mutag_raw(), cfg.train)).dump(2); };
    const auto a = once();
    const auto b = once();
    return {a == b, fmt("report sizes %zu and %zu bytes, %s", a.size(), b.size(), a == b ? "identical" : "DIFFERENT")};
}

// 10 -----------------------------------------------------------------------

outcome degenerate_inputs(const context&) {
    std::string detail;
    bool ok = true;
    auto record = [&](bool pass, const std::string& what) {
        ok = ok && pass;
        detail += fmt("\n    %-48s %s", what.c_str(), pass ? "ok" : "FAIL");
    };
    model_config mc;
    mc.input_dim = 3;
    mc.num_classes = 2;
    mc.order = 3;
    mc.views = {2, 2, 2};
    mc.widths = {6, 6, 6};
    mc.hidden = 8;
    mc.dropout = 0.0;
    rng gen(10);
    auto m = init_model(mc, gen);

    graph single;
    single.adjacency = dense_matrix::Zero(1, 1);
    single.features = dense_matrix::Ones(1, 3);
    bool rejected = false;
    std::string message;
    try {
        classify(m, single);
    } catch (const domain_error& e) {
        rejected = true;
        message = e.what();
    } catch (const std::exception& e) {
        message = e.what();
    }
    record(rejected && message.find("2 vertices") != std::string::npos, "single vertex rejected (" + message + ")");

    graph flat;
    flat.adjacency = dense_matrix::Zero(5, 5);
    for (Eigen::Index i = 0; i + 1 < 5; ++i) flat.adjacency(i, i + 1) = flat.adjacency(i + 1, i) = 1.0;
    flat.features = dense_matrix::Constant(5, 3, 0.7);
    flat.label = 1;
    bool finite = true;
    try {
        rng drop(11);
        for (int step = 0; step < 20; ++step) {
            auto r = compute_gradients(m, flat, drop);
            finite = finite && std::isfinite(r.loss);
            sgd_step(m, r.grads, 1e-2);
        }
        finite = finite && classify(m, flat).allFinite();
    } catch (const std::exception& e) {
        finite = false;
        detail += fmt("\n    identical features: %s", e.what());
    }
    record(finite, "identical features train finitely");

    graph iso;
    iso.adjacency = dense_matrix::Zero(4, 4);
    iso.adjacency(0, 1) = iso.adjacency(1, 0) = 1.0;
    iso.features = dense_matrix(4, 3);
    for (Eigen::Index i = 0; i < iso.features.size(); ++i) iso.features.data()[i] = gen.uniform(-1.0, 1.0);
    const auto parts = normalized_laplacian_parts(iso.adjacency);
    const bool convention = parts.inv_sqrt_degree[2] == 0.0 && parts.inv_sqrt_degree[3] == 0.0 &&
                            parts.laplacian.row(2) == dense_matrix::Identity(4, 4).row(2) &&
                            parts.laplacian.row(3) == dense_matrix::Identity(4, 4).row(3);
    record(convention, "isolated vertex Laplacian row is identity row");
    bool iso_ok = false;
    try {
        iso_ok = classify(m, iso).allFinite();
    } catch (const std::exception& e) {
        detail += fmt("\n    isolated vertices: %s", e.what());
    }
    record(iso_ok, "isolated vertices classify finitely");
    return {ok, "degenerate inputs:" + detail};
}

struct criterion {
    int id;
    const char* name;
    std::function<outcome(const context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> selected;
    std::string data_root;
    app.add_option("--criterion,-c", selected, "criteria to run (default: all)");
    app.add_option("--data-root", data_root, "directory holding TU datasets");
    CLI11_PARSE(app, argc, argv);

    const std::vector<criterion> all = {
        {1, "parser fidelity", parser_fidelity},
        {2, "gradient correctness", gradient_correctness},
        {3, "spectral oracle equivalence", spectral_oracle},
        {4, "pairwise distance factorization", factorization_oracle},
        {5, "Laplacian spectra", laplacian_spectra},
        {6, "permutation invariance", permutation_invariance},
        {7, "MUTAG end-to-end accuracy", mutag_end_to_end},
        {8, "view-count ablation trend", view_count_trend},
        {9, "determinism", determinism},
        {10, "degenerate inputs", degenerate_inputs},
    };
    if (selected.empty())
        for (const auto& c : all) selected.push_back(c.id);

    context ctx{data_roots(data_root)};
    int failures = 0;
    for (int id : selected) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const criterion& c) { return c.id == id; });
        if (it == all.end()) {
            std::fprintf(stderr, "unknown criterion %d\n", id);
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        outcome o;
        try {
            o = it->run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %2d %-32s %s (%.1fs)  %s\n", it->id, it->name, o.passed ? "PASS" : "FAIL",
                    seconds_since(t0), o.detail.c_str());
        std::fflush(stdout);
        if (!o.passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
