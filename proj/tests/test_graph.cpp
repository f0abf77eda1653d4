#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dccgcn/graph.hpp"

using namespace dccgcn;
namespace fs = std::filesystem;

namespace {

double graph_weight(const SparseGraph& g, int u, int v) {
    for (int p = g.indptr[u]; p < g.indptr[u + 1]; ++p) {
        if (g.indices[p] == v) return g.weights[p];
    }
    return 0.0;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("normalizing a single self-looped node gives weight one") {
    const SparseGraph g = graph_from_edges(1, {}, true);
    const SparseGraph a = normalize_adjacency(g, true);
    REQUIRE(a.num_edges() == 1);
    CHECK(a.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("two connected nodes normalize to one half everywhere") {
    const SparseGraph a = normalize_adjacency(graph_from_edges(2, {{0, 1}}, true), true);
    REQUIRE(a.num_edges() == 4);
    for (double w : a.weights) CHECK(w == doctest::Approx(0.5));
}

TEST_CASE("star graph hub-leaf weight matches hand computation") {
    const SparseGraph a =
        normalize_adjacency(graph_from_edges(4, {{0, 1}, {0, 2}, {0, 3}}, true), true);
    // hub degree 4 (3 leaves + self), leaf degree 2
    CHECK(graph_weight(a, 0, 1) == doctest::Approx(1.0 / std::sqrt(8.0)));
    CHECK(graph_weight(a, 1, 0) == doctest::Approx(1.0 / std::sqrt(8.0)));
    CHECK(graph_weight(a, 0, 0) == doctest::Approx(0.25));
    CHECK(graph_weight(a, 1, 1) == doctest::Approx(0.5));
}

TEST_CASE("normalized adjacency weights are in (0,1] and symmetric") {
    // note: row sums of the symmetric normalization can exceed 1 on
    // irregular graphs (the star case above already does), so the checked
    // invariants are the entry range, symmetry and the degree identity
    Rng rng(21);
    std::vector<std::pair<int, int>> edges;
    const int n = 30;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (rng.uniform() < 0.15) edges.emplace_back(u, v);
        }
    }
    const SparseGraph g = graph_from_edges(n, edges, true);
    const SparseGraph a = normalize_adjacency(g, true);
    for (int u = 0; u < n; ++u) {
        const double deg_u = 1.0 + (g.indptr[u + 1] - g.indptr[u]);
        for (int p = a.indptr[u]; p < a.indptr[u + 1]; ++p) {
            const int v = a.indices[p];
            const double deg_v = 1.0 + (g.indptr[v + 1] - g.indptr[v]);
            CHECK(a.weights[p] > 0.0);
            CHECK(a.weights[p] <= 1.0);
            CHECK(a.weights[p] == doctest::Approx(1.0 / std::sqrt(deg_u * deg_v)));
            CHECK(std::abs(a.weights[p] - graph_weight(a, v, u)) < 1e-12);
        }
    }
}

TEST_CASE("isolated node without self-loops is a degree error") {
    const SparseGraph g = graph_from_edges(3, {{0, 1}}, true);
    CHECK_THROWS_AS(normalize_adjacency(g, false), ContractError);
}

TEST_CASE("duplicated feature rows become mutual nearest neighbours") {
    const Tensor x = Tensor::from_values(3, 2, {1.0, 0.0,
                                                1.0, 0.0,
                                                0.0, 1.0});
    const auto lists = knn_neighbor_lists(x, 1);
    CHECK(lists[0] == std::vector<int>{1});
    CHECK(lists[1] == std::vector<int>{0});
}

TEST_CASE("orthogonal rows are never selected as neighbours") {
    const Tensor x = Tensor::from_values(3, 3, {1.0, 0.0, 0.0,
                                                0.0, 1.0, 0.0,
                                                0.0, 0.0, 1.0});
    const auto lists = knn_neighbor_lists(x, 1);
    for (const auto& l : lists) CHECK(l.empty());
    const SparseGraph g = build_knn_graph(x, 1);
    CHECK(g.num_edges() == 0);
}

TEST_CASE("similarity ties break toward the lowest node index") {
    // rows 1 and 2 are identical, both equally similar to row 0
    const Tensor x = Tensor::from_values(3, 2, {1.0, 1.0,
                                                1.0, 0.0,
                                                1.0, 0.0});
    const auto lists = knn_neighbor_lists(x, 1);
    CHECK(lists[0] == std::vector<int>{1});
}

TEST_CASE("two tight clusters produce two disjoint intra-cluster edges") {
    const Tensor x = Tensor::from_values(4, 2, {10.0, 0.1,
                                                10.0, 0.2,
                                                0.1, 10.0,
                                                0.2, 10.0});
    // brute-force oracle: nearest neighbour by largest cosine
    for (int i = 0; i < 4; ++i) {
        int best = -1;
        double best_sim = -1.0;
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (int f = 0; f < 2; ++f) {
                dot += x.at(i, f) * x.at(j, f);
                ni += x.at(i, f) * x.at(i, f);
                nj += x.at(j, f) * x.at(j, f);
            }
            const double sim = dot / std::sqrt(ni * nj);
            if (sim > best_sim) {
                best_sim = sim;
                best = j;
            }
        }
        const auto lists = knn_neighbor_lists(x, 1);
        REQUIRE(lists[i].size() == 1);
        CHECK(lists[i][0] == best);
    }
    const SparseGraph g = build_knn_graph(x, 1);
    CHECK(g.num_edges() == 4);  // (0,1) and (2,3), both directions
    CHECK(graph_weight(g, 0, 1) == 1.0);
    CHECK(graph_weight(g, 2, 3) == 1.0);
    CHECK(graph_weight(g, 0, 2) == 0.0);
}

TEST_CASE("knn out-degree is exactly k when enough candidates exist") {
    Rng rng(4);
    Tensor x(20, 5);
    for (double& v : x.values()) v = rng.uniform(0.1, 1.0);  // all-positive, no zero sims
    for (int k : {1, 3, 7}) {
        const auto lists = knn_neighbor_lists(x, k);
        for (const auto& l : lists) {
            CHECK(static_cast<int>(l.size()) == k);
        }
    }
    const SparseGraph g = build_knn_graph(x, 3);
    CHECK(g.symmetric);
}

TEST_CASE("knn rejects zero-norm rows and oversized k") {
    const Tensor zero_row = Tensor::from_values(2, 2, {1.0, 0.0, 0.0, 0.0});
    CHECK_THROWS_AS(build_knn_graph(zero_row, 1), ContractError);
    const Tensor ok = Tensor::from_values(2, 2, {1.0, 0.0, 0.0, 1.0});
    CHECK_THROWS_AS(build_knn_graph(ok, 2), ContractError);
}

TEST_CASE("toy cora files load into three nodes and one edge") {
    const fs::path dir = temp_dir("dccgcn_toy_cora");
    {
        std::ofstream content(dir / "toy.content");
        content << "p1\t1\t0\tml\n";
        content << "p2\t0\t1\tdb\n";
        content << "p3\t1\t1\tml\n";
        std::ofstream cites(dir / "toy.cites");
        cites << "p1\tp2\n";
        cites << "p1\tghost\n";  // dropped with a warning
    }
    const Dataset ds = load_cora_format((dir / "toy.content").string(),
                                        (dir / "toy.cites").string());
    CHECK(ds.n() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.num_classes == 2);
    CHECK(ds.graph.num_edges() == 2);  // one undirected edge
    // labels sorted: db -> 0, ml -> 1
    CHECK(ds.labels[0] == 1);
    CHECK(ds.labels[1] == 0);
    CHECK(ds.labels[2] == 1);
}

TEST_CASE("cora loader reports inconsistent feature widths with the line") {
    const fs::path dir = temp_dir("dccgcn_bad_cora");
    {
        std::ofstream content(dir / "bad.content");
        content << "p1\t1\t0\tml\n";
        content << "p2\t0\tdb\n";
        std::ofstream cites(dir / "bad.cites");
    }
    try {
        load_cora_format((dir / "bad.content").string(), (dir / "bad.cites").string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("generic format equals the cora-format load of the same toy graph") {
    const fs::path dir = temp_dir("dccgcn_toy_generic");
    {
        std::ofstream feats(dir / "features.tsv");
        feats << "1\t0\n0\t1\n1\t1\n";
        std::ofstream labels(dir / "labels.tsv");
        labels << "1\n0\n1\n";
        std::ofstream edges(dir / "edges.tsv");
        edges << "0\t1\n";
    }
    const Dataset ds = load_generic(dir.string());
    CHECK(ds.n() == 3);
    CHECK(ds.num_classes == 2);
    CHECK(ds.graph.num_edges() == 2);
    CHECK(ds.train_mask.empty());  // no split.json
    CHECK(ds.labels == std::vector<int>{1, 0, 1});
}

TEST_CASE("generic loader rejects non-integer labels with the line number") {
    const fs::path dir = temp_dir("dccgcn_bad_generic");
    {
        std::ofstream feats(dir / "features.tsv");
        feats << "1\t0\n0\t1\n";
        std::ofstream labels(dir / "labels.tsv");
        labels << "0\nx7\n";
        std::ofstream edges(dir / "edges.tsv");
    }
    try {
        load_generic(dir.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("labels.tsv:2") != std::string::npos);
    }
}

TEST_CASE("generic loader rejects row-count mismatches") {
    const fs::path dir = temp_dir("dccgcn_mismatch_generic");
    {
        std::ofstream feats(dir / "features.tsv");
        feats << "1\t0\n0\t1\n";
        std::ofstream labels(dir / "labels.tsv");
        labels << "0\n";
        std::ofstream edges(dir / "edges.tsv");
    }
    CHECK_THROWS_AS(load_generic(dir.string()), FormatError);
}

TEST_CASE("save and reload round-trips a synthetic dataset") {
    SyntheticSpec spec;
    spec.n = 40;
    spec.c = 3;
    spec.d = 6;
    spec.seed = 5;
    Dataset ds = generate_synthetic(spec);
    make_split(ds, 5, std::nullopt, 9);
    const fs::path dir = temp_dir("dccgcn_roundtrip");
    save_generic(ds, dir.string());
    const Dataset back = load_generic(dir.string());
    CHECK(back.labels == ds.labels);
    CHECK(back.graph.indptr == ds.graph.indptr);
    CHECK(back.graph.indices == ds.graph.indices);
    CHECK(back.train_mask == ds.train_mask);
    CHECK(back.test_mask == ds.test_mask);
    REQUIRE(back.features.size() == ds.features.size());
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        CHECK(back.features.values()[i] == doctest::Approx(ds.features.values()[i]));
    }
}

TEST_CASE("per-class split draws the requested count from every class") {
    SyntheticSpec spec;
    spec.n = 70;
    spec.c = 7;
    Dataset ds = generate_synthetic(spec);
    make_split(ds, 3, std::nullopt, 1);
    std::vector<int> per_class(7, 0);
    int train_total = 0;
    for (int i = 0; i < ds.n(); ++i) {
        CHECK((ds.train_mask[i] ^ ds.test_mask[i]) == 1);  // masks partition V
        if (ds.train_mask[i]) {
            ++per_class[ds.labels[i]];
            ++train_total;
        }
    }
    CHECK(train_total == 21);
    for (int k = 0; k < 7; ++k) CHECK(per_class[k] == 3);
}

TEST_CASE("split is deterministic per seed") {
    SyntheticSpec spec;
    Dataset a = generate_synthetic(spec);
    Dataset b = generate_synthetic(spec);
    make_split(a, 10, std::nullopt, 42);
    make_split(b, 10, std::nullopt, 42);
    CHECK(a.train_mask == b.train_mask);
    make_split(b, 10, std::nullopt, 43);
    CHECK(a.train_mask != b.train_mask);
}

TEST_CASE("fraction split size follows the ceil-with-class-floor rule") {
    CHECK(fraction_split_size(2708, 7, 0.005) == 14);
    CHECK(fraction_split_size(200, 4, 0.005) == 4);  // class floor dominates
    CHECK(fraction_split_size(1000, 3, 0.0101) == 11);
}

TEST_CASE("fraction split keeps at least one node per class") {
    SyntheticSpec spec;
    spec.n = 200;
    spec.c = 4;
    Dataset ds = generate_synthetic(spec);
    make_split(ds, std::nullopt, 0.03, 3);
    std::vector<int> per_class(4, 0);
    int total = 0;
    for (int i = 0; i < ds.n(); ++i) {
        if (ds.train_mask[i]) {
            ++per_class[ds.labels[i]];
            ++total;
        }
    }
    CHECK(total == 6);  // ceil(0.03 * 200)
    for (int k = 0; k < 4; ++k) CHECK(per_class[k] >= 1);
}

TEST_CASE("split rejects classes with too few nodes") {
    SyntheticSpec spec;
    spec.n = 8;
    spec.c = 4;
    Dataset ds = generate_synthetic(spec);
    CHECK_THROWS_AS(make_split(ds, 3, std::nullopt, 1), ContractError);
}

TEST_CASE("row normalization is an L1 projection and idempotent") {
    const Tensor x = Tensor::from_values(2, 2, {2.0, 2.0, 0.0, 0.0});
    const Tensor once = row_normalize_features(x);
    CHECK(once.at(0, 0) == doctest::Approx(0.5));
    CHECK(once.at(0, 1) == doctest::Approx(0.5));
    CHECK(once.at(1, 0) == 0.0);
    CHECK(once.at(1, 1) == 0.0);
    const Tensor twice = row_normalize_features(once);
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(twice.values()[i] == doctest::Approx(once.values()[i]));
    }
}

TEST_CASE("extreme block model yields label-aligned components") {
    SyntheticSpec spec;
    spec.n = 60;
    spec.c = 2;
    spec.p_intra = 1.0;
    spec.p_inter = 0.0;
    const Dataset ds = generate_synthetic(spec);
    for (int u = 0; u < ds.n(); ++u) {
        for (int p = ds.graph.indptr[u]; p < ds.graph.indptr[u + 1]; ++p) {
            CHECK(ds.labels[u] == ds.labels[ds.graph.indices[p]]);
        }
    }
}

TEST_CASE("zero separation removes the class signal from features") {
    SyntheticSpec spec;
    spec.n = 120;
    spec.c = 3;
    spec.d = 8;
    spec.separation = 0.0;
    const Dataset ds = generate_synthetic(spec);
    // intra- vs inter-class mean cosine should be indistinguishable
    double intra = 0.0, inter = 0.0;
    int n_intra = 0, n_inter = 0;
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = i + 1; j < ds.n(); ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (int f = 0; f < ds.dim(); ++f) {
                dot += ds.features.at(i, f) * ds.features.at(j, f);
                ni += ds.features.at(i, f) * ds.features.at(i, f);
                nj += ds.features.at(j, f) * ds.features.at(j, f);
            }
            const double sim = dot / std::sqrt(ni * nj);
            if (ds.labels[i] == ds.labels[j]) {
                intra += sim;
                ++n_intra;
            } else {
                inter += sim;
                ++n_inter;
            }
        }
    }
    CHECK(std::abs(intra / n_intra - inter / n_inter) < 0.05);
}

TEST_CASE("synthetic defaults give every class at least twenty nodes") {
    const Dataset ds = generate_synthetic(SyntheticSpec{});
    std::vector<int> counts(ds.num_classes, 0);
    for (int l : ds.labels) ++counts[l];
    for (int c : counts) CHECK(c >= 20);
    // determinism
    const Dataset again = generate_synthetic(SyntheticSpec{});
    CHECK(again.graph.indices == ds.graph.indices);
    CHECK(again.features.values() == ds.features.values());
}
