#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/numeric/rng.hpp"

namespace mvgc {

/// One graph as read from disk, before any feature encoding.
struct raw_graph {
    dense_matrix adjacency;
    std::vector<long> node_labels;  // empty when the dataset has none
    dense_matrix attributes;        // n x attribute_dim; 0 columns when absent
    std::size_t label = 0;          // 0-based class index

    std::size_t vertex_count() const noexcept { return static_cast<std::size_t>(adjacency.rows()); }

    bool operator==(const raw_graph&) const = default;
};

struct raw_dataset {
    std::string name;
    std::vector<raw_graph> graphs;
    std::vector<long> class_values;  // original label of class c is class_values[c]
    bool has_node_labels = false;
    std::size_t attribute_dim = 0;

    std::size_t num_classes() const noexcept { return class_values.size(); }

    bool operator==(const raw_dataset&) const = default;
};

enum class feature_encoding { label_onehot, degree_onehot, continuous };

inline std::string to_string(feature_encoding e) {
    switch (e) {
        case feature_encoding::label_onehot: return "label-onehot";
        case feature_encoding::degree_onehot: return "degree-onehot";
        case feature_encoding::continuous: return "continuous";
    }
    return "?";
}

inline feature_encoding parse_encoding(std::string_view s) {
    if (s == "label-onehot") return feature_encoding::label_onehot;
    if (s == "degree-onehot") return feature_encoding::degree_onehot;
    if (s == "continuous") return feature_encoding::continuous;
    throw config_error("unknown encoding '" + std::string(s) + "' (label-onehot|degree-onehot|continuous)");
}

struct dataset {
    std::string name;
    std::vector<graph> graphs;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    feature_encoding encoding = feature_encoding::label_onehot;

    std::size_t size() const noexcept { return graphs.size(); }

    std::vector<std::size_t> labels() const {
        std::vector<std::size_t> out;
        out.reserve(graphs.size());
        for (const auto& g : graphs) out.push_back(g.label);
        return out;
    }
};

namespace detail {

struct text_line {
    std::size_t number;
    std::string_view text;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Non-blank lines with their 1-based line numbers.
inline std::vector<text_line> split_lines(std::string_view content) {
    std::vector<text_line> out;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto end = content.find('\n', pos);
        auto line = content.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        ++number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back({number, line});
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline long parse_long(std::string_view field, const std::string& file, std::size_t line) {
    long v = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) {
        throw parse_error(file, line, "expected an integer, got '" + std::string(field) + "'");
    }
    return v;
}

inline double parse_double(std::string_view field, const std::string& file, std::size_t line) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last || !std::isfinite(v)) {
        throw parse_error(file, line, "expected a real number, got '" + std::string(field) + "'");
    }
    return v;
}

inline std::vector<long> read_integer_column(const std::filesystem::path& path) {
    const auto content = read_file(path);
    const auto file = path.filename().string();
    std::vector<long> out;
    for (const auto& l : split_lines(content)) {
        const auto fields = split_fields(l.text);
        if (fields.size() != 1) throw parse_error(file, l.number, "expected a single integer");
        out.push_back(parse_long(fields[0], file, l.number));
    }
    return out;
}

inline std::filesystem::path required_file(const std::filesystem::path& dir, const std::string& name,
                                           const std::string& suffix) {
    auto p = dir / (name + suffix);
    if (!std::filesystem::exists(p)) throw io_error("missing dataset file " + p.string());
    return p;
}

}  // namespace detail

/// Directory holding `name`'s files: `root/name` when it exists, else `root`.
inline std::filesystem::path dataset_directory(const std::filesystem::path& root, const std::string& name) {
    const auto nested = root / name;
    if (std::filesystem::is_directory(nested)) return nested;
    return root;
}

/// Reads a dataset in the TU Dortmund benchmark text format.
///
/// Edges are read as directed pairs of 1-indexed global vertex ids, then
/// symmetrized and deduplicated. Self loops are dropped. Graph labels are
/// remapped onto 0..q-1 in ascending order of the original values.
inline raw_dataset load_tu_dataset(const std::filesystem::path& root_dir, const std::string& name) {
    const auto dir = dataset_directory(root_dir, name);
    const auto a_path = detail::required_file(dir, name, "_A.txt");
    const auto gi_path = detail::required_file(dir, name, "_graph_indicator.txt");
    const auto gl_path = detail::required_file(dir, name, "_graph_labels.txt");

    raw_dataset out;
    out.name = name;

    const auto indicator = detail::read_integer_column(gi_path);
    const auto graph_labels = detail::read_integer_column(gl_path);
    const std::size_t graph_count = graph_labels.size();
    const std::size_t vertex_total = indicator.size();

    // Global vertex id -> (graph, local index).
    std::vector<std::size_t> vertex_graph(vertex_total);
    std::vector<std::size_t> vertex_local(vertex_total);
    std::vector<std::size_t> sizes(graph_count, 0);
    {
        const auto content = detail::read_file(gi_path);
        const auto lines = detail::split_lines(content);
        for (std::size_t v = 0; v < vertex_total; ++v) {
            const long gid = indicator[v];
            if (gid < 1 || static_cast<std::size_t>(gid) > graph_count) {
                throw parse_error(gi_path.filename().string(), lines[v].number,
                                  "graph id " + std::to_string(gid) + " outside 1.." + std::to_string(graph_count));
            }
            vertex_graph[v] = static_cast<std::size_t>(gid - 1);
            vertex_local[v] = sizes[vertex_graph[v]]++;
        }
    }

    std::vector<long> sorted_labels = graph_labels;
    std::sort(sorted_labels.begin(), sorted_labels.end());
    sorted_labels.erase(std::unique(sorted_labels.begin(), sorted_labels.end()), sorted_labels.end());
    out.class_values = sorted_labels;

    out.graphs.resize(graph_count);
    for (std::size_t g = 0; g < graph_count; ++g) {
        auto& rg = out.graphs[g];
        rg.adjacency = dense_matrix::Zero(static_cast<Eigen::Index>(sizes[g]), static_cast<Eigen::Index>(sizes[g]));
        rg.attributes.resize(static_cast<Eigen::Index>(sizes[g]), 0);
        const auto it = std::lower_bound(sorted_labels.begin(), sorted_labels.end(), graph_labels[g]);
        rg.label = static_cast<std::size_t>(it - sorted_labels.begin());
    }

    {
        const auto content = detail::read_file(a_path);
        const auto file = a_path.filename().string();
        for (const auto& l : detail::split_lines(content)) {
            const auto fields = detail::split_fields(l.text);
            if (fields.size() != 2) throw parse_error(file, l.number, "expected 'i, j'");
            const long i = detail::parse_long(fields[0], file, l.number);
            const long j = detail::parse_long(fields[1], file, l.number);
            for (long v : {i, j}) {
                if (v < 1 || static_cast<std::size_t>(v) > vertex_total) {
                    throw parse_error(file, l.number,
                                      "vertex " + std::to_string(v) + " outside 1.." + std::to_string(vertex_total));
                }
            }
            const auto gi = vertex_graph[static_cast<std::size_t>(i - 1)];
            const auto gj = vertex_graph[static_cast<std::size_t>(j - 1)];
            if (gi != gj) {
                throw parse_error(file, l.number,
                                  "edge " + std::to_string(i) + "-" + std::to_string(j) + " crosses graph boundary");
            }
            if (i == j) continue;
            const auto li = static_cast<Eigen::Index>(vertex_local[static_cast<std::size_t>(i - 1)]);
            const auto lj = static_cast<Eigen::Index>(vertex_local[static_cast<std::size_t>(j - 1)]);
            out.graphs[gi].adjacency(li, lj) = 1.0;
            out.graphs[gi].adjacency(lj, li) = 1.0;
        }
    }

    const auto nl_path = dir / (name + "_node_labels.txt");
    if (std::filesystem::exists(nl_path)) {
        const auto labels = detail::read_integer_column(nl_path);
        if (labels.size() != vertex_total) {
            throw parse_error(nl_path.filename().string(), labels.size(),
                              std::to_string(labels.size()) + " node labels for " + std::to_string(vertex_total) +
                                  " vertices");
        }
        for (std::size_t g = 0; g < graph_count; ++g) out.graphs[g].node_labels.resize(sizes[g]);
        for (std::size_t v = 0; v < vertex_total; ++v) {
            out.graphs[vertex_graph[v]].node_labels[vertex_local[v]] = labels[v];
        }
        out.has_node_labels = true;
    }

    const auto na_path = dir / (name + "_node_attributes.txt");
    if (std::filesystem::exists(na_path)) {
        const auto content = detail::read_file(na_path);
        const auto file = na_path.filename().string();
        const auto lines = detail::split_lines(content);
        if (lines.size() != vertex_total) {
            throw parse_error(file, lines.empty() ? 0 : lines.back().number,
                              std::to_string(lines.size()) + " attribute rows for " + std::to_string(vertex_total) +
                                  " vertices");
        }
        std::size_t dim = 0;
        for (std::size_t v = 0; v < vertex_total; ++v) {
            const auto fields = detail::split_fields(lines[v].text);
            if (v == 0) {
                dim = fields.size();
                for (std::size_t g = 0; g < graph_count; ++g) {
                    out.graphs[g].attributes.resize(static_cast<Eigen::Index>(sizes[g]), static_cast<Eigen::Index>(dim));
                }
            } else if (fields.size() != dim) {
                throw parse_error(file, lines[v].number,
                                  "expected " + std::to_string(dim) + " attributes, got " + std::to_string(fields.size()));
            }
            auto& attrs = out.graphs[vertex_graph[v]].attributes;
            for (std::size_t k = 0; k < dim; ++k) {
                attrs(static_cast<Eigen::Index>(vertex_local[v]), static_cast<Eigen::Index>(k)) =
                    detail::parse_double(fields[k], file, lines[v].number);
            }
        }
        out.attribute_dim = dim;
    }
    return out;
}

/// Writes `data` in the TU text format under `dir` (created if needed).
inline void write_tu_dataset(const raw_dataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& suffix) {
        std::ofstream f(dir / (data.name + suffix));
        if (!f) throw io_error("cannot write " + (dir / (data.name + suffix)).string());
        return f;
    };
    auto a = open("_A.txt");
    auto gi = open("_graph_indicator.txt");
    auto gl = open("_graph_labels.txt");
    std::ofstream nl, na;
    if (data.has_node_labels) nl = open("_node_labels.txt");
    if (data.attribute_dim > 0) {
        na = open("_node_attributes.txt");
        na.precision(17);
    }
    std::size_t offset = 0;
    for (std::size_t g = 0; g < data.graphs.size(); ++g) {
        const auto& rg = data.graphs[g];
        const auto n = rg.vertex_count();
        gl << data.class_values.at(rg.label) << '\n';
        for (std::size_t v = 0; v < n; ++v) {
            gi << g + 1 << '\n';
            if (data.has_node_labels) nl << rg.node_labels[v] << '\n';
            if (data.attribute_dim > 0) {
                for (std::size_t k = 0; k < data.attribute_dim; ++k) {
                    if (k) na << ", ";
                    na << rg.attributes(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(k));
                }
                na << '\n';
            }
            for (std::size_t u = 0; u < n; ++u) {
                if (rg.adjacency(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) != 0.0) {
                    a << offset + v + 1 << ", " << offset + u + 1 << '\n';
                }
            }
        }
        offset += n;
    }
}

struct dataset_statistics {
    std::size_t graphs = 0;
    std::size_t classes = 0;
    double mean_vertices = 0.0;
    double mean_edges = 0.0;  // undirected, each pair once
    bool vertex_labels = false;
    std::size_t attribute_dim = 0;
};

inline dataset_statistics statistics(const raw_dataset& data) {
    dataset_statistics s;
    s.graphs = data.graphs.size();
    s.classes = data.num_classes();
    s.vertex_labels = data.has_node_labels;
    s.attribute_dim = data.attribute_dim;
    if (s.graphs == 0) return s;
    double vertices = 0.0, edges = 0.0;
    for (const auto& g : data.graphs) {
        vertices += static_cast<double>(g.vertex_count());
        edges += g.adjacency.sum() / 2.0;
    }
    s.mean_vertices = vertices / static_cast<double>(s.graphs);
    s.mean_edges = edges / static_cast<double>(s.graphs);
    return s;
}

namespace detail {

inline dataset encoded_shell(const raw_dataset& raw, feature_encoding enc, std::size_t dim) {
    dataset out;
    out.name = raw.name;
    out.num_classes = raw.num_classes();
    out.feature_dim = dim;
    out.encoding = enc;
    out.graphs.reserve(raw.graphs.size());
    for (const auto& rg : raw.graphs) {
        graph g;
        g.adjacency = rg.adjacency;
        g.label = rg.label;
        g.features = dense_matrix::Zero(rg.adjacency.rows(), static_cast<Eigen::Index>(dim));
        out.graphs.push_back(std::move(g));
    }
    return out;
}

}  // namespace detail

/// One-hot of each vertex's discrete label; d is the number of distinct
/// labels over the whole dataset.
inline dataset encode_label_onehot(const raw_dataset& raw) {
    if (!raw.has_node_labels) throw encoding_error(raw.name + ": dataset has no node labels");
    std::vector<long> distinct;
    for (const auto& g : raw.graphs) distinct.insert(distinct.end(), g.node_labels.begin(), g.node_labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    auto out = detail::encoded_shell(raw, feature_encoding::label_onehot, distinct.size());
    for (std::size_t gi = 0; gi < raw.graphs.size(); ++gi) {
        const auto& labels = raw.graphs[gi].node_labels;
        for (std::size_t v = 0; v < labels.size(); ++v) {
            const auto col = std::lower_bound(distinct.begin(), distinct.end(), labels[v]) - distinct.begin();
            out.graphs[gi].features(static_cast<Eigen::Index>(v), col) = 1.0;
        }
    }
    return out;
}

/// One-hot of min(degree, cap); d = cap + 1.
inline dataset encode_degree_onehot(const raw_dataset& raw, std::size_t cap) {
    if (cap < 1 || cap > 200) throw domain_error("degree cap must lie in [1, 200], got " + std::to_string(cap));
    auto out = detail::encoded_shell(raw, feature_encoding::degree_onehot, cap + 1);
    for (std::size_t gi = 0; gi < raw.graphs.size(); ++gi) {
        const auto& a = raw.graphs[gi].adjacency;
        for (Eigen::Index v = 0; v < a.rows(); ++v) {
            const auto degree = static_cast<std::size_t>(a.row(v).sum() + 0.5);
            out.graphs[gi].features(v, static_cast<Eigen::Index>(std::min(degree, cap))) = 1.0;
        }
    }
    return out;
}

/// Per-dimension z-scoring of continuous attributes. Statistics are taken
/// over every vertex of the graphs in `stats_from` (all graphs when empty);
/// dimensions with std below 1e-12 map to 0.
inline dataset normalize_continuous(const raw_dataset& raw, std::span<const std::size_t> stats_from = {}) {
    if (raw.attribute_dim == 0) throw encoding_error(raw.name + ": dataset has no node attributes");
    const auto dim = static_cast<Eigen::Index>(raw.attribute_dim);
    std::vector<std::size_t> all;
    if (stats_from.empty()) {
        all.resize(raw.graphs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        stats_from = all;
    }
    vector mean = vector::Zero(dim);
    double count = 0.0;
    for (auto gi : stats_from) {
        mean += raw.graphs.at(gi).attributes.colwise().sum().transpose();
        count += static_cast<double>(raw.graphs[gi].vertex_count());
    }
    if (count == 0.0) throw encoding_error(raw.name + ": no vertices to compute attribute statistics");
    mean /= count;
    vector var = vector::Zero(dim);
    for (auto gi : stats_from) {
        var += (raw.graphs[gi].attributes.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    var /= count;

    auto out = detail::encoded_shell(raw, feature_encoding::continuous, raw.attribute_dim);
    for (std::size_t gi = 0; gi < raw.graphs.size(); ++gi) {
        auto& f = out.graphs[gi].features;
        const auto& attrs = raw.graphs[gi].attributes;
        for (Eigen::Index k = 0; k < dim; ++k) {
            const double sd = std::sqrt(var[k]);
            if (sd < 1e-12) continue;
            f.col(k) = (attrs.col(k).array() - mean[k]) / sd;
        }
    }
    return out;
}

/// Encodes `raw` with `enc`; `stats_from` restricts continuous statistics.
inline dataset encode(const raw_dataset& raw, feature_encoding enc, std::size_t degree_cap,
                      std::span<const std::size_t> stats_from = {}) {
    switch (enc) {
        case feature_encoding::label_onehot: return encode_label_onehot(raw);
        case feature_encoding::degree_onehot: return encode_degree_onehot(raw, degree_cap);
        case feature_encoding::continuous: return normalize_continuous(raw, stats_from);
    }
    throw config_error("unknown encoding");
}

/// Per-graph fold index for stratified k-fold cross-validation.
struct fold_plan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }
};

/// Shuffles each class with a seeded stream, lays the classes end to end,
/// and deals the sequence round-robin into k folds. Fold sizes and per-class
/// fold counts then differ by at most one.
inline fold_plan stratified_kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw split_error("fold count must be at least 1");
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, members] : by_class) {
        if (members.size() < k) {
            throw split_error("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                              " members, fewer than " + std::to_string(k) + " folds");
        }
    }
    rng gen(seed);
    fold_plan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(labels.size(), 0);
    std::size_t position = 0;
    for (auto& [cls, members] : by_class) {
        gen.shuffle(members);
        for (auto idx : members) plan.assignments[idx] = position++ % k;
    }
    return plan;
}

inline fold_plan stratified_kfold(const dataset& data, std::size_t k, std::uint64_t seed) {
    const auto labels = data.labels();
    return stratified_kfold(labels, k, seed);
}

/// Keeps at most `max_graphs` graphs, chosen class by class in proportion to
/// class size (largest remainders first), in original order. 0 keeps all.
inline raw_dataset subsample_stratified(const raw_dataset& raw, std::size_t max_graphs, std::uint64_t seed) {
    if (max_graphs == 0 || raw.graphs.size() <= max_graphs) return raw;
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < raw.graphs.size(); ++i) by_class[raw.graphs[i].label].push_back(i);
    const double total = static_cast<double>(raw.graphs.size());
    std::vector<std::pair<std::size_t, double>> quota;  // (class, exact share)
    std::map<std::size_t, std::size_t> take;
    std::size_t assigned = 0;
    for (const auto& [cls, members] : by_class) {
        const double share = static_cast<double>(max_graphs) * static_cast<double>(members.size()) / total;
        take[cls] = static_cast<std::size_t>(share);
        assigned += take[cls];
        quota.emplace_back(cls, share - static_cast<double>(take[cls]));
    }
    std::stable_sort(quota.begin(), quota.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; assigned < max_graphs && i < quota.size(); ++i, ++assigned) ++take[quota[i].first];
    rng gen(seed);
    std::vector<std::size_t> keep;
    for (auto& [cls, members] : by_class) {
        gen.shuffle(members);
        keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take[cls]));
    }
    std::sort(keep.begin(), keep.end());
    raw_dataset out = raw;
    out.graphs.clear();
    for (auto i : keep) out.graphs.push_back(raw.graphs[i]);
    return out;
}

}  // namespace mvgc
