#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dccgcn/sparse.hpp"
#include "dccgcn/tensor.hpp"

namespace dccgcn {

struct Dataset {
    Tensor features;                       // n x d
    std::vector<int> labels;               // class index in [0, c)
    int num_classes = 0;
    SparseGraph graph;                     // undirected topology
    std::vector<std::uint8_t> train_mask;  // n entries, disjoint from test
    std::vector<std::uint8_t> test_mask;

    int n() const { return features.defined() ? features.rows() : 0; }
    int dim() const { return features.defined() ? features.cols() : 0; }
    void validate() const;
};

struct SyntheticSpec {
    int n = 200;
    int c = 4;
    int d = 16;
    double separation = 1.0;  // distance of class feature means from origin
    double p_intra = 0.05;    // same-class edge probability
    double p_inter = 0.005;
    std::uint64_t seed = 1;
};

/// Builds an unweighted CSR graph from an edge list; duplicates are merged
/// and, when symmetrize is set, both orientations are stored.
SparseGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                             bool symmetrize = true);

/// D^{-1/2} (A + I) D^{-1/2} over the edge weights; degrees are weight sums
/// after optional self-loop insertion. A node with no edges and self-loops
/// disabled is an error.
SparseGraph normalize_adjacency(const SparseGraph& g, bool add_self_loops = true);

/// Nearest neighbours per node under d(x_i, x_j) = |x_i||x_j| / (x_i . x_j),
/// self excluded, pairs with cosine similarity <= 1e-12 never selected,
/// similarity ties broken by lowest node index. Lists are sorted and hold
/// fewer than k entries when fewer candidates are admissible.
std::vector<std::vector<int>> knn_neighbor_lists(const Tensor& features, int k);

/// knn_neighbor_lists symmetrized by union into an unweighted graph.
SparseGraph build_knn_graph(const Tensor& features, int k);

/// content rows: "id f1 ... fd label"; cites rows: "cited citing".
/// Node order follows first appearance in the content file; labels map to
/// indices by sorted label-string order; citation edges to unknown ids are
/// dropped with a counted warning on stderr.
Dataset load_cora_format(const std::string& content_path, const std::string& cites_path);

/// Directory with features.tsv, labels.tsv, edges.tsv and optional
/// split.json ({"train":[...],"test":[...]}).
Dataset load_generic(const std::string& dir);
void save_generic(const Dataset& ds, const std::string& dir);

/// Training-set size in fraction mode: ceil(fraction*n), raised to c so
/// every class keeps at least one node.
int fraction_split_size(int n, int c, double fraction);

/// Fills train/test masks. Exactly one of per_class and label_fraction must
/// be set; the test set is the complement of the train set.
void make_split(Dataset& ds, std::optional<int> per_class,
                std::optional<double> label_fraction, std::uint64_t seed);

/// L1-normalizes each nonzero row; zero rows pass through.
Tensor row_normalize_features(const Tensor& x);

/// Class-conditional Gaussian features with a stochastic-block-model graph;
/// deterministic for a fixed spec.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Dense n x d matrix to CSR, dropping exact zeros.
CsrMatrix dense_to_csr(const Tensor& x);

}  // namespace dccgcn
