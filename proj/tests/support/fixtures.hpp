#pragma once

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/numeric/rng.hpp"

namespace mvgc::test {

inline std::filesystem::path data_dir() { return std::filesystem::path(MVGC_SOURCE_DIR) / "data"; }

inline const raw_dataset& mutag_raw() {
    static const raw_dataset raw = load_tu_dataset(data_dir(), "MUTAG");
    return raw;
}

inline const dataset& mutag() {
    static const dataset data = encode_label_onehot(mutag_raw());
    return data;
}

inline dense_matrix random_matrix(Eigen::Index r, Eigen::Index c, rng& gen, double lo = -1.0, double hi = 1.0) {
    dense_matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gen.uniform(lo, hi);
    return m;
}

inline dense_matrix random_symmetric(Eigen::Index n, rng& gen) {
    const dense_matrix a = random_matrix(n, n, gen);
    return (a + a.transpose()) / 2.0;
}

/// Random graph that has at least one edge.
inline graph connected_ish_graph(std::size_t n, std::size_t d, rng& gen, double p = 0.4) {
    for (;;) {
        auto g = random_graph(n, d, p, gen);
        if (g.adjacency.sum() > 0.0) return g;
    }
}

inline std::vector<std::size_t> random_permutation(std::size_t n, rng& gen) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    gen.shuffle(p);
    return p;
}

/// New vertex i is old vertex perm[i].
inline graph permute(const graph& g, const std::vector<std::size_t>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    graph out = g;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.features.row(i) = g.features.row(static_cast<Eigen::Index>(perm[i]));
        for (Eigen::Index j = 0; j < n; ++j)
            out.adjacency(i, j) = g.adjacency(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    }
    return out;
}

inline dense_matrix permute_matrix(const dense_matrix& m, const std::vector<std::size_t>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    dense_matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = m(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    return out;
}

/// Small architecture for fast tests.
inline model_config small_config(std::size_t input_dim, std::size_t classes = 2) {
    model_config c;
    c.input_dim = input_dim;
    c.num_classes = classes;
    c.order = 3;
    c.views = {2, 2, 2};
    c.widths = {5, 4, 3};
    c.hidden = 6;
    c.dropout = 0.0;
    return c;
}

}  // namespace mvgc::test
