#include "dccgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dccgcn/errors.hpp"
#include "dccgcn/random.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dccgcn {

void Dataset::validate() const {
    const int nn = n();
    if (nn == 0) {
        throw ContractError("Dataset: empty");
    }
    if (static_cast<int>(labels.size()) != nn) {
        throw ContractError("Dataset: label count does not match feature rows");
    }
    for (int l : labels) {
        if (l < 0 || l >= num_classes) {
            throw ContractError("Dataset: label out of range");
        }
    }
    for (double v : features.values()) {
        if (!std::isfinite(v)) {
            throw NumericError("Dataset: non-finite feature value");
        }
    }
    if (graph.n != nn) {
        throw ContractError("Dataset: graph size does not match feature rows");
    }
    graph.validate("Dataset.graph");
    if (!train_mask.empty() || !test_mask.empty()) {
        if (static_cast<int>(train_mask.size()) != nn ||
            static_cast<int>(test_mask.size()) != nn) {
            throw ContractError("Dataset: mask length mismatch");
        }
        for (int i = 0; i < nn; ++i) {
            if (train_mask[i] && test_mask[i]) {
                throw ContractError("Dataset: masks overlap at node " + std::to_string(i));
            }
        }
    }
}

SparseGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                             bool symmetrize) {
    std::set<std::pair<int, int>> uniq;
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n) {
            throw ContractError("graph_from_edges: endpoint out of range");
        }
        uniq.emplace(u, v);
        if (symmetrize) uniq.emplace(v, u);
    }
    SparseGraph g;
    g.n = n;
    g.symmetric = symmetrize;
    g.indptr.assign(n + 1, 0);
    for (auto& [u, v] : uniq) {
        ++g.indptr[u + 1];
    }
    for (int i = 0; i < n; ++i) g.indptr[i + 1] += g.indptr[i];
    g.indices.reserve(uniq.size());
    for (auto& [u, v] : uniq) {
        (void)u;
        g.indices.push_back(v);  // set iteration is already (u asc, v asc)
    }
    g.weights.assign(uniq.size(), 1.0);
    return g;
}

SparseGraph normalize_adjacency(const SparseGraph& g, bool add_self_loops) {
    g.validate("normalize_adjacency");
    if (!g.symmetric) {
        throw ContractError("normalize_adjacency: graph must be symmetric");
    }
    SparseGraph a = g;
    if (add_self_loops) {
        // merge (i, i) into each row, keeping column order
        SparseGraph with_loops;
        with_loops.n = g.n;
        with_loops.symmetric = true;
        with_loops.indptr.assign(g.n + 1, 0);
        for (int i = 0; i < g.n; ++i) {
            bool has_self = false;
            for (int p = g.indptr[i]; p < g.indptr[i + 1]; ++p) {
                if (g.indices[p] == i) has_self = true;
            }
            with_loops.indptr[i + 1] = g.indptr[i + 1] - g.indptr[i] + (has_self ? 0 : 1);
        }
        for (int i = 0; i < g.n; ++i) with_loops.indptr[i + 1] += with_loops.indptr[i];
        with_loops.indices.resize(with_loops.indptr.back());
        with_loops.weights.resize(with_loops.indptr.back());
        for (int i = 0; i < g.n; ++i) {
            int w = with_loops.indptr[i];
            bool placed_self = false;
            for (int p = g.indptr[i]; p < g.indptr[i + 1]; ++p) {
                const int v = g.indices[p];
                if (!placed_self && v > i) {
                    with_loops.indices[w] = i;
                    with_loops.weights[w] = 1.0;
                    ++w;
                    placed_self = true;
                }
                with_loops.indices[w] = v;
                with_loops.weights[w] = v == i ? g.weights[p] + 1.0 : g.weights[p];
                if (v == i) placed_self = true;
                ++w;
            }
            if (!placed_self) {
                with_loops.indices[w] = i;
                with_loops.weights[w] = 1.0;
            }
        }
        a = std::move(with_loops);
    }
    std::vector<double> degree(a.n, 0.0);
    for (int i = 0; i < a.n; ++i) {
        for (int p = a.indptr[i]; p < a.indptr[i + 1]; ++p) {
            degree[i] += a.weights[p];
        }
    }
    for (int i = 0; i < a.n; ++i) {
        if (degree[i] <= 0.0) {
            throw ContractError("normalize_adjacency: node " + std::to_string(i) +
                                " has degree zero");
        }
    }
    for (int i = 0; i < a.n; ++i) {
        for (int p = a.indptr[i]; p < a.indptr[i + 1]; ++p) {
            a.weights[p] /= std::sqrt(degree[i] * degree[a.indices[p]]);
        }
    }
    return a;
}

namespace {

constexpr double kSimilarityFloor = 1e-12;

struct SparseRows {
    std::vector<int> indptr, indices;
    std::vector<double> values;  // L2-normalized rows
};

SparseRows normalized_sparse_rows(const Tensor& x) {
    const int n = x.rows(), d = x.cols();
    SparseRows s;
    s.indptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
        double norm2 = 0.0;
        int nnz = 0;
        for (int j = 0; j < d; ++j) {
            const double v = x.at(i, j);
            norm2 += v * v;
            if (v != 0.0) ++nnz;
        }
        if (norm2 == 0.0) {
            throw ContractError("build_knn_graph: feature row " + std::to_string(i) +
                                " has zero norm");
        }
        s.indptr[i + 1] = s.indptr[i] + nnz;
        const double inv = 1.0 / std::sqrt(norm2);
        for (int j = 0; j < d; ++j) {
            const double v = x.at(i, j);
            if (v != 0.0) {
                s.indices.push_back(j);
                s.values.push_back(v * inv);
            }
        }
    }
    return s;
}

}  // namespace

std::vector<std::vector<int>> knn_neighbor_lists(const Tensor& features, int k) {
    const int n = features.rows();
    if (k < 1) {
        throw ContractError("build_knn_graph: k must be >= 1");
    }
    if (k >= n) {
        throw ContractError("build_knn_graph: k (" + std::to_string(k) +
                            ") must be below the node count (" + std::to_string(n) + ")");
    }
    const SparseRows rows = normalized_sparse_rows(features);
    const int d = features.cols();

    // invert columns so each node only visits rows sharing a feature
    std::vector<std::vector<std::pair<int, double>>> by_col(d);
    for (int i = 0; i < n; ++i) {
        for (int p = rows.indptr[i]; p < rows.indptr[i + 1]; ++p) {
            by_col[rows.indices[p]].emplace_back(i, rows.values[p]);
        }
    }

    std::vector<std::vector<int>> neighbors(n);
    std::vector<double> sim(n, 0.0);
    std::vector<int> touched;
    touched.reserve(n);
    for (int i = 0; i < n; ++i) {
        touched.clear();
        for (int p = rows.indptr[i]; p < rows.indptr[i + 1]; ++p) {
            const double vi = rows.values[p];
            for (auto [j, vj] : by_col[rows.indices[p]]) {
                if (sim[j] == 0.0) touched.push_back(j);
                sim[j] += vi * vj;
            }
        }
        std::vector<int> cand;
        cand.reserve(touched.size());
        for (int j : touched) {
            if (j != i && sim[j] > kSimilarityFloor) cand.push_back(j);
        }
        const auto closer = [&](int a, int b) {
            if (sim[a] != sim[b]) return sim[a] > sim[b];
            return a < b;
        };
        if (static_cast<int>(cand.size()) > k) {
            std::nth_element(cand.begin(), cand.begin() + k, cand.end(), closer);
            cand.resize(k);
        }
        std::sort(cand.begin(), cand.end());
        neighbors[i] = std::move(cand);
        for (int j : touched) sim[j] = 0.0;
    }
    return neighbors;
}

SparseGraph build_knn_graph(const Tensor& features, int k) {
    const auto lists = knn_neighbor_lists(features, k);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < static_cast<int>(lists.size()); ++i) {
        for (int j : lists[i]) {
            edges.emplace_back(i, j);
        }
    }
    return graph_from_edges(features.rows(), edges, /*symmetrize=*/true);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(std::move(tok));
    return out;
}

}  // namespace

Dataset load_cora_format(const std::string& content_path, const std::string& cites_path) {
    std::ifstream content(content_path);
    if (!content) {
        throw FormatError("cannot open content file: " + content_path);
    }
    std::unordered_map<std::string, int> id_to_node;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> label_strings;
    std::string line;
    int line_no = 0;
    int width = -1;
    while (std::getline(content, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() < 3) {
            throw FormatError(content_path + ":" + std::to_string(line_no) +
                              ": expected id, features and label");
        }
        const int d = static_cast<int>(toks.size()) - 2;
        if (width < 0) {
            width = d;
        } else if (d != width) {
            throw FormatError(content_path + ":" + std::to_string(line_no) +
                              ": feature width " + std::to_string(d) + " != " +
                              std::to_string(width));
        }
        if (!id_to_node.emplace(toks.front(), static_cast<int>(rows.size())).second) {
            throw FormatError(content_path + ":" + std::to_string(line_no) +
                              ": duplicate node id " + toks.front());
        }
        std::vector<double> feat(d);
        for (int j = 0; j < d; ++j) {
            try {
                feat[j] = std::stod(toks[j + 1]);
            } catch (const std::exception&) {
                throw FormatError(content_path + ":" + std::to_string(line_no) +
                                  ": bad feature value '" + toks[j + 1] + "'");
            }
        }
        rows.push_back(std::move(feat));
        label_strings.push_back(toks.back());
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) {
        throw FormatError(content_path + ": no nodes");
    }

    std::vector<std::string> classes(label_strings);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::unordered_map<std::string, int> class_index;
    for (int i = 0; i < static_cast<int>(classes.size()); ++i) {
        class_index[classes[i]] = i;
    }

    Dataset ds;
    ds.num_classes = static_cast<int>(classes.size());
    ds.labels.resize(n);
    for (int i = 0; i < n; ++i) ds.labels[i] = class_index[label_strings[i]];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n) * width);
    for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    ds.features = Tensor::from_values(n, width, std::move(flat));

    std::ifstream cites(cites_path);
    if (!cites) {
        throw FormatError("cannot open cites file: " + cites_path);
    }
    std::vector<std::pair<int, int>> edges;
    int dropped = 0;
    line_no = 0;
    while (std::getline(cites, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 2) {
            throw FormatError(cites_path + ":" + std::to_string(line_no) +
                              ": expected two node ids");
        }
        const auto a = id_to_node.find(toks[0]);
        const auto b = id_to_node.find(toks[1]);
        if (a == id_to_node.end() || b == id_to_node.end()) {
            ++dropped;
            continue;
        }
        if (a->second != b->second) {
            edges.emplace_back(a->second, b->second);
        }
    }
    if (dropped > 0) {
        std::cerr << "load_cora_format: dropped " << dropped
                  << " citation edge(s) referencing unknown ids\n";
    }
    ds.graph = graph_from_edges(n, edges, /*symmetrize=*/true);
    return ds;
}

Dataset load_generic(const std::string& dir) {
    const fs::path base(dir);
    std::ifstream feats(base / "features.tsv");
    if (!feats) {
        throw FormatError("cannot open " + (base / "features.tsv").string());
    }
    std::vector<double> flat;
    std::string line;
    int n = 0, width = -1, line_no = 0;
    while (std::getline(feats, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (width < 0) {
            width = static_cast<int>(toks.size());
        } else if (static_cast<int>(toks.size()) != width) {
            throw FormatError("features.tsv:" + std::to_string(line_no) +
                              ": row width mismatch");
        }
        for (const auto& t : toks) {
            try {
                flat.push_back(std::stod(t));
            } catch (const std::exception&) {
                throw FormatError("features.tsv:" + std::to_string(line_no) +
                                  ": bad float '" + t + "'");
            }
        }
        ++n;
    }
    if (n == 0) {
        throw FormatError("features.tsv: empty");
    }

    Dataset ds;
    ds.features = Tensor::from_values(n, width, std::move(flat));

    std::ifstream labels(base / "labels.tsv");
    if (!labels) {
        throw FormatError("cannot open " + (base / "labels.tsv").string());
    }
    line_no = 0;
    int max_label = -1;
    while (std::getline(labels, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        std::size_t pos = 0;
        int value = 0;
        try {
            value = std::stoi(toks[0], &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (toks.size() != 1 || pos != toks[0].size() || value < 0) {
            throw FormatError("labels.tsv:" + std::to_string(line_no) +
                              ": expected one nonnegative integer");
        }
        ds.labels.push_back(value);
        max_label = std::max(max_label, value);
    }
    if (static_cast<int>(ds.labels.size()) != n) {
        throw FormatError("labels.tsv: " + std::to_string(ds.labels.size()) +
                          " labels for " + std::to_string(n) + " feature rows");
    }
    ds.num_classes = max_label + 1;

    std::ifstream edges_file(base / "edges.tsv");
    if (!edges_file) {
        throw FormatError("cannot open " + (base / "edges.tsv").string());
    }
    std::vector<std::pair<int, int>> edges;
    line_no = 0;
    while (std::getline(edges_file, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 2) {
            throw FormatError("edges.tsv:" + std::to_string(line_no) +
                              ": expected two node indices");
        }
        int u = 0, v = 0;
        try {
            u = std::stoi(toks[0]);
            v = std::stoi(toks[1]);
        } catch (const std::exception&) {
            throw FormatError("edges.tsv:" + std::to_string(line_no) + ": bad index");
        }
        if (u < 0 || u >= n || v < 0 || v >= n) {
            throw FormatError("edges.tsv:" + std::to_string(line_no) +
                              ": index out of range");
        }
        if (u != v) edges.emplace_back(u, v);
    }
    ds.graph = graph_from_edges(n, edges, /*symmetrize=*/true);

    const fs::path split_path = base / "split.json";
    if (fs::exists(split_path)) {
        std::ifstream split_file(split_path);
        json j;
        try {
            split_file >> j;
        } catch (const json::exception& e) {
            throw FormatError("split.json: " + std::string(e.what()));
        }
        ds.train_mask.assign(n, 0);
        ds.test_mask.assign(n, 0);
        for (int idx : j.value("train", std::vector<int>{})) {
            if (idx < 0 || idx >= n) throw FormatError("split.json: train index out of range");
            ds.train_mask[idx] = 1;
        }
        for (int idx : j.value("test", std::vector<int>{})) {
            if (idx < 0 || idx >= n) throw FormatError("split.json: test index out of range");
            ds.test_mask[idx] = 1;
        }
    }
    ds.validate();
    return ds;
}

void save_generic(const Dataset& ds, const std::string& dir) {
    ds.validate();
    const fs::path base(dir);
    fs::create_directories(base);
    {
        std::ofstream out(base / "features.tsv");
        out.precision(17);
        for (int i = 0; i < ds.n(); ++i) {
            for (int j = 0; j < ds.dim(); ++j) {
                if (j) out << '\t';
                out << ds.features.at(i, j);
            }
            out << '\n';
        }
    }
    {
        std::ofstream out(base / "labels.tsv");
        for (int l : ds.labels) out << l << '\n';
    }
    {
        std::ofstream out(base / "edges.tsv");
        for (auto [u, v] : undirected_edge_list(ds.graph)) {
            out << u << '\t' << v << '\n';
        }
    }
    if (!ds.train_mask.empty()) {
        json j;
        j["train"] = json::array();
        j["test"] = json::array();
        for (int i = 0; i < ds.n(); ++i) {
            if (ds.train_mask[i]) j["train"].push_back(i);
            if (ds.test_mask[i]) j["test"].push_back(i);
        }
        std::ofstream out(base / "split.json");
        out << j.dump(2) << '\n';
    }
}

int fraction_split_size(int n, int c, double fraction) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw ContractError("make_split: label fraction must be in (0, 1)");
    }
    const int target = static_cast<int>(std::ceil(fraction * n));
    return std::max(target, c);
}

void make_split(Dataset& ds, std::optional<int> per_class,
                std::optional<double> label_fraction, std::uint64_t seed) {
    if (per_class.has_value() == label_fraction.has_value()) {
        throw ContractError("make_split: exactly one of per_class and label_fraction");
    }
    const int n = ds.n();
    std::vector<std::vector<int>> by_class(ds.num_classes);
    for (int i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);

    Rng rng(Rng::mix(seed, 0x5117));
    const auto sample_without_replacement = [&rng](std::vector<int>& pool, int count,
                                                   std::vector<int>& out) {
        for (int t = 0; t < count; ++t) {
            const std::size_t pick =
                t + rng.uniform_index(pool.size() - static_cast<std::size_t>(t));
            std::swap(pool[t], pool[pick]);
            out.push_back(pool[t]);
        }
        pool.erase(pool.begin(), pool.begin() + count);
    };

    std::vector<int> train_nodes;
    if (per_class) {
        if (*per_class < 1) {
            throw ContractError("make_split: per_class must be >= 1");
        }
        for (int k = 0; k < ds.num_classes; ++k) {
            if (static_cast<int>(by_class[k].size()) < *per_class) {
                throw ContractError("make_split: class " + std::to_string(k) + " has only " +
                                    std::to_string(by_class[k].size()) + " nodes, needs " +
                                    std::to_string(*per_class));
            }
            sample_without_replacement(by_class[k], *per_class, train_nodes);
        }
    } else {
        const int target = fraction_split_size(n, ds.num_classes, *label_fraction);
        for (int k = 0; k < ds.num_classes; ++k) {
            if (by_class[k].empty()) {
                throw ContractError("make_split: class " + std::to_string(k) + " has no nodes");
            }
            sample_without_replacement(by_class[k], 1, train_nodes);
        }
        std::vector<int> rest;
        for (auto& pool : by_class) rest.insert(rest.end(), pool.begin(), pool.end());
        std::sort(rest.begin(), rest.end());
        const int remaining = target - ds.num_classes;
        if (remaining > 0) {
            if (remaining > static_cast<int>(rest.size())) {
                throw ContractError("make_split: label fraction exceeds node count");
            }
            sample_without_replacement(rest, remaining, train_nodes);
        }
    }

    ds.train_mask.assign(n, 0);
    ds.test_mask.assign(n, 1);
    for (int v : train_nodes) {
        ds.train_mask[v] = 1;
        ds.test_mask[v] = 0;
    }
}

Tensor row_normalize_features(const Tensor& x) {
    Tensor out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
        double norm = 0.0;
        for (int j = 0; j < x.cols(); ++j) norm += std::abs(x.at(i, j));
        const double inv = norm > 0.0 ? 1.0 / norm : 0.0;
        for (int j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) * inv;
    }
    return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < spec.c || spec.c < 2 || spec.d < 1) {
        throw ContractError("generate_synthetic: need n >= c >= 2 and d >= 1");
    }
    if (spec.p_intra < 0.0 || spec.p_intra > 1.0 || spec.p_inter < 0.0 ||
        spec.p_inter > 1.0) {
        throw ContractError("generate_synthetic: edge probabilities must be in [0, 1]");
    }
    Dataset ds;
    ds.num_classes = spec.c;
    ds.labels.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) ds.labels[i] = i % spec.c;

    Rng feat_rng(Rng::mix(spec.seed, 0xfea7));
    Tensor x(spec.n, spec.d);
    for (int i = 0; i < spec.n; ++i) {
        const int mean_dim = ds.labels[i] % spec.d;
        for (int j = 0; j < spec.d; ++j) {
            x.at(i, j) = feat_rng.normal() + (j == mean_dim ? spec.separation : 0.0);
        }
    }
    ds.features = std::move(x);

    Rng edge_rng(Rng::mix(spec.seed, 0xed9e));
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < spec.n; ++u) {
        for (int v = u + 1; v < spec.n; ++v) {
            const double p = ds.labels[u] == ds.labels[v] ? spec.p_intra : spec.p_inter;
            if (edge_rng.uniform() < p) {
                edges.emplace_back(u, v);
            }
        }
    }
    ds.graph = graph_from_edges(spec.n, edges, /*symmetrize=*/true);
    return ds;
}

CsrMatrix dense_to_csr(const Tensor& x) {
    CsrMatrix m;
    m.rows = x.rows();
    m.cols = x.cols();
    m.indptr.assign(m.rows + 1, 0);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            const double v = x.at(i, j);
            if (v != 0.0) {
                m.indices.push_back(j);
                m.values.push_back(v);
            }
        }
        m.indptr[i + 1] = static_cast<int>(m.indices.size());
    }
    return m;
}

}  // namespace dccgcn
