#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include <unistd.h>

#include "fixtures.hpp"
#include "mvgc/data/tu_dataset.hpp"

using namespace mvgc;
using mvgc::test::data_dir;

namespace {

/// Scratch directory holding a hand-written dataset.
struct scratch_dataset {
    std::filesystem::path dir;

    explicit scratch_dataset(const std::string& tag) {
        dir = std::filesystem::temp_directory_path() / ("mvgc_tu_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
    }
    ~scratch_dataset() { std::filesystem::remove_all(dir); }

    void write(const std::string& suffix, const std::string& text) const {
        std::ofstream(dir / ("X" + suffix)) << text;
    }
};

void write_valid(const scratch_dataset& s) {
    s.write("_A.txt", "1, 2\n2, 1\n3, 4\n");
    s.write("_graph_indicator.txt", "1\n1\n2\n2\n");
    s.write("_graph_labels.txt", "0\n1\n");
}

}  // namespace

TEST(LoadTu, MutagMatchesPublishedStatistics) {
    const auto& raw = mvgc::test::mutag_raw();
    const auto s = statistics(raw);
    EXPECT_EQ(s.graphs, 188u);
    EXPECT_EQ(s.classes, 2u);
    EXPECT_NEAR(s.mean_vertices, 17.93, 0.01);
    EXPECT_NEAR(s.mean_edges, 19.79, 0.01);
    EXPECT_TRUE(s.vertex_labels);
}

TEST(LoadTu, ProteinsWhenAvailable) {
    const char* root = std::getenv("TU_DATA_ROOT");
    if (root == nullptr || !std::filesystem::exists(std::filesystem::path(root) / "PROTEINS")) {
        GTEST_SKIP() << "PROTEINS not present under TU_DATA_ROOT";
    }
    const auto s = statistics(load_tu_dataset(root, "PROTEINS"));
    EXPECT_EQ(s.graphs, 1113u);
    EXPECT_EQ(s.classes, 2u);
    EXPECT_NEAR(s.mean_vertices, 39.06, 0.01);
}

TEST(LoadTu, TriangleAndEdgeFixture) {
    const auto raw = load_tu_dataset(data_dir(), "TOY_LABELS");
    ASSERT_EQ(raw.graphs.size(), 2u);
    dense_matrix tri = dense_matrix::Ones(3, 3);
    tri.diagonal().setZero();
    dense_matrix edge(2, 2);
    edge << 0, 1, 1, 0;
    EXPECT_EQ(raw.graphs[0].adjacency, tri);
    EXPECT_EQ(raw.graphs[1].adjacency, edge);
    // Labels {1, -1} remap to ascending 0-based classes.
    EXPECT_EQ(raw.graphs[0].label, 1u);
    EXPECT_EQ(raw.graphs[1].label, 0u);
    EXPECT_EQ(raw.class_values, (std::vector<long>{-1, 1}));
    EXPECT_EQ(raw.graphs[0].node_labels, (std::vector<long>{0, 1, 2}));
    EXPECT_EQ(raw.attribute_dim, 0u);
}

TEST(LoadTu, AttributesAndIsolatedVertex) {
    const auto raw = load_tu_dataset(data_dir(), "TOY_ATTRS");
    ASSERT_EQ(raw.graphs.size(), 2u);
    EXPECT_EQ(raw.attribute_dim, 2u);
    EXPECT_FALSE(raw.has_node_labels);
    EXPECT_EQ(raw.graphs[0].adjacency.row(2).sum(), 0.0);
    EXPECT_EQ(raw.graphs[1].adjacency.sum(), 6.0);
    EXPECT_EQ(raw.graphs[1].attributes(0, 0), 4.0);
    const auto s = statistics(raw);
    EXPECT_DOUBLE_EQ(s.mean_vertices, 3.5);
    EXPECT_DOUBLE_EQ(s.mean_edges, 2.0);
}

TEST(LoadTu, MissingMandatoryFileNamesIt) {
    scratch_dataset s("missing");
    s.write("_A.txt", "1, 2\n");
    s.write("_graph_indicator.txt", "1\n1\n");
    try {
        load_tu_dataset(s.dir, "X");
        FAIL() << "expected io_error";
    } catch (const io_error& e) {
        EXPECT_NE(std::string(e.what()).find("X_graph_labels.txt"), std::string::npos);
    }
}

TEST(LoadTu, VertexOutOfRangeReportsLine) {
    scratch_dataset s("range");
    write_valid(s);
    s.write("_A.txt", "1, 2\n2, 1\n3, 9\n");
    try {
        load_tu_dataset(s.dir, "X");
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.file(), "X_A.txt");
    }
}

TEST(LoadTu, EdgeAcrossGraphsRejected) {
    scratch_dataset s("cross");
    write_valid(s);
    s.write("_A.txt", "1, 2\n2, 3\n");
    try {
        load_tu_dataset(s.dir, "X");
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(LoadTu, WhitespaceAndBlankLinesTolerated) {
    scratch_dataset s("ws");
    s.write("_A.txt", "  1 ,2\n\n2,  1  \n3,4\n");
    s.write("_graph_indicator.txt", "1\n1\n2\n2\n\n");
    s.write("_graph_labels.txt", "0\n1\n");
    const auto raw = load_tu_dataset(s.dir, "X");
    EXPECT_EQ(raw.graphs[0].adjacency.sum(), 2.0);
    EXPECT_EQ(raw.graphs[1].adjacency.sum(), 2.0);
}

TEST(LoadTu, SelfLoopsAndDuplicatesCollapse) {
    scratch_dataset s("dup");
    write_valid(s);
    s.write("_A.txt", "1, 1\n1, 2\n1, 2\n2, 1\n3, 4\n");
    const auto raw = load_tu_dataset(s.dir, "X");
    EXPECT_EQ(raw.graphs[0].adjacency(0, 0), 0.0);
    EXPECT_EQ(raw.graphs[0].adjacency.sum(), 2.0);
}

TEST(LoadTu, WriteThenReadRoundTrips) {
    scratch_dataset s("roundtrip");
    for (const char* name : {"TOY_LABELS", "TOY_ATTRS", "MUTAG"}) {
        const auto raw = load_tu_dataset(data_dir(), name);
        write_tu_dataset(raw, s.dir / name);
        const auto again = load_tu_dataset(s.dir, name);
        EXPECT_EQ(again, raw) << name;
    }
}

TEST(EncodeLabel, OneHotRows) {
    const auto data = encode_label_onehot(load_tu_dataset(data_dir(), "TOY_LABELS"));
    EXPECT_EQ(data.feature_dim, 3u);
    dense_matrix expected = dense_matrix::Identity(3, 3);
    EXPECT_EQ(data.graphs[0].features, expected);
    EXPECT_EQ(data.graphs[1].features.row(1), expected.row(1));
}

TEST(EncodeLabel, MutagHasSevenLabels) {
    const auto& data = mvgc::test::mutag();
    EXPECT_EQ(data.feature_dim, 7u);
    for (const auto& g : data.graphs)
        for (Eigen::Index i = 0; i < g.features.rows(); ++i) ASSERT_EQ(g.features.row(i).sum(), 1.0);
}

TEST(EncodeLabel, SingleLabelGraphHasIdenticalRows) {
    auto raw = load_tu_dataset(data_dir(), "TOY_LABELS");
    for (auto& g : raw.graphs) std::fill(g.node_labels.begin(), g.node_labels.end(), 4);
    const auto data = encode_label_onehot(raw);
    EXPECT_EQ(data.feature_dim, 1u);
    EXPECT_EQ(data.graphs[0].features, dense_matrix::Ones(3, 1));
}

TEST(EncodeLabel, MissingLabelsRejected) {
    EXPECT_THROW(encode_label_onehot(load_tu_dataset(data_dir(), "TOY_ATTRS")), encoding_error);
}

TEST(EncodeDegree, OneHotAndClamp) {
    raw_dataset raw;
    raw.name = "star";
    raw.class_values = {0};
    raw_graph g;
    g.adjacency = dense_matrix::Zero(76, 76);
    for (int i = 1; i < 76; ++i) g.adjacency(0, i) = g.adjacency(i, 0) = 1.0;
    for (int i = 1; i < 4; ++i) g.adjacency(1, i + 1) = g.adjacency(i + 1, 1) = 1.0;
    raw.graphs.push_back(g);
    const auto data = encode_degree_onehot(raw, 50);
    EXPECT_EQ(data.feature_dim, 51u);
    const auto& f = data.graphs[0].features;
    EXPECT_EQ(f(0, 50), 1.0);  // degree 75 clamps to the cap
    EXPECT_EQ(f(1, 4), 1.0);   // hub + 3 extra edges
    EXPECT_EQ(f(2, 2), 1.0);
    EXPECT_EQ(f(10, 1), 1.0);
    for (Eigen::Index i = 0; i < f.rows(); ++i) EXPECT_EQ(f.row(i).sum(), 1.0);
}

TEST(EncodeDegree, DegreeThreeCapFifty) {
    raw_dataset raw;
    raw.class_values = {0};
    raw_graph g;
    g.adjacency = dense_matrix::Zero(4, 4);
    for (int i = 1; i < 4; ++i) g.adjacency(0, i) = g.adjacency(i, 0) = 1.0;
    raw.graphs.push_back(g);
    const auto f = encode_degree_onehot(raw, 50).graphs[0].features;
    EXPECT_EQ(f.cols(), 51);
    EXPECT_EQ(f(0, 3), 1.0);
    EXPECT_EQ(f.row(0).sum(), 1.0);
}

TEST(EncodeDegree, CapOutOfRangeRejected) {
    const auto raw = load_tu_dataset(data_dir(), "TOY_LABELS");
    EXPECT_THROW(encode_degree_onehot(raw, 0), domain_error);
    EXPECT_THROW(encode_degree_onehot(raw, 201), domain_error);
}

TEST(EncodeDegree, MutagRowsSumToOne) {
    const auto data = encode_degree_onehot(mvgc::test::mutag_raw(), 50);
    for (const auto& g : data.graphs)
        for (Eigen::Index i = 0; i < g.features.rows(); ++i) ASSERT_EQ(g.features.row(i).sum(), 1.0);
}

TEST(NormalizeContinuous, ConstantColumnZeroAndStandardized) {
    const auto data = normalize_continuous(load_tu_dataset(data_dir(), "TOY_ATTRS"));
    ASSERT_EQ(data.feature_dim, 2u);
    double sum = 0.0, sq = 0.0, count = 0.0;
    for (const auto& g : data.graphs) {
        EXPECT_EQ(g.features.col(1), vector::Zero(g.features.rows()));
        sum += g.features.col(0).sum();
        sq += g.features.col(0).squaredNorm();
        count += static_cast<double>(g.features.rows());
    }
    EXPECT_NEAR(sum / count, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / count), 1.0, 1e-9);
}

TEST(NormalizeContinuous, TwoValuesMapToPlusMinusOne) {
    raw_dataset raw;
    raw.class_values = {0};
    raw.attribute_dim = 1;
    raw_graph g;
    g.adjacency = dense_matrix::Zero(2, 2);
    g.attributes.resize(2, 1);
    g.attributes << 0.0, 2.0;
    raw.graphs.push_back(g);
    const auto f = normalize_continuous(raw).graphs[0].features;
    EXPECT_DOUBLE_EQ(f(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(f(1, 0), 1.0);
}

TEST(NormalizeContinuous, FoldLocalStatistics) {
    const auto raw = load_tu_dataset(data_dir(), "TOY_ATTRS");
    const std::vector<std::size_t> only_first{0};
    const auto data = normalize_continuous(raw, only_first);
    // Graph 0 has values {0, 2, 1}: mean 1, population std sqrt(2/3).
    EXPECT_NEAR(data.graphs[0].features(0, 0), -1.0 / std::sqrt(2.0 / 3.0), 1e-12);
    EXPECT_NEAR(data.graphs[1].features(0, 0), 3.0 / std::sqrt(2.0 / 3.0), 1e-12);
}

TEST(NormalizeContinuous, MissingAttributesRejected) {
    EXPECT_THROW(normalize_continuous(load_tu_dataset(data_dir(), "TOY_LABELS")), encoding_error);
}

TEST(StratifiedKfold, MutagFoldSizes) {
    const auto plan = stratified_kfold(mvgc::test::mutag(), 10, 7);
    std::vector<std::size_t> sizes(10, 0);
    for (auto a : plan.assignments) ++sizes[a];
    std::size_t total = 0;
    for (auto s : sizes) {
        EXPECT_TRUE(s == 18 || s == 19) << s;
        total += s;
    }
    EXPECT_EQ(total, 188u);
}

TEST(StratifiedKfold, PerClassCountsBalanced) {
    const auto& data = mvgc::test::mutag();
    const auto plan = stratified_kfold(data, 10, 3);
    for (std::size_t c = 0; c < data.num_classes; ++c) {
        std::vector<std::size_t> counts(10, 0);
        for (std::size_t i = 0; i < data.graphs.size(); ++i)
            if (data.graphs[i].label == c) ++counts[plan.assignments[i]];
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        EXPECT_LE(*hi - *lo, 1u);
    }
}

TEST(StratifiedKfold, FoldsPartitionTheDataset) {
    const auto plan = stratified_kfold(mvgc::test::mutag(), 5, 1);
    std::vector<int> seen(188, 0);
    for (std::size_t f = 0; f < 5; ++f) {
        for (auto i : plan.test_indices(f)) ++seen[i];
        EXPECT_EQ(plan.train_indices(f).size() + plan.test_indices(f).size(), 188u);
    }
    for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(StratifiedKfold, SingleFold) {
    const auto plan = stratified_kfold(mvgc::test::mutag(), 1, 0);
    EXPECT_EQ(plan.test_indices(0).size(), 188u);
}

TEST(StratifiedKfold, Deterministic) {
    const auto a = stratified_kfold(mvgc::test::mutag(), 10, 42);
    const auto b = stratified_kfold(mvgc::test::mutag(), 10, 42);
    const auto c = stratified_kfold(mvgc::test::mutag(), 10, 43);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_NE(a.assignments, c.assignments);
}

TEST(StratifiedKfold, TooFewMembersRejected) {
    const std::vector<std::size_t> labels{0, 0, 0, 1, 1};
    EXPECT_THROW(stratified_kfold(labels, 3, 0), split_error);
}

TEST(SubsampleStratified, KeepsClassProportions) {
    const auto& raw = mvgc::test::mutag_raw();
    const auto sub = subsample_stratified(raw, 50, 1);
    ASSERT_EQ(sub.graphs.size(), 50u);
    std::size_t ones = 0;
    for (const auto& g : sub.graphs) ones += g.label;
    // MUTAG has 125 / 63 graphs per class.
    EXPECT_EQ(ones, 33u);
    EXPECT_EQ(subsample_stratified(raw, 0, 1).graphs.size(), 188u);
}
