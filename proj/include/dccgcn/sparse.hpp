#pragma once

#include <span>
#include <vector>

namespace dccgcn {

/// General rectangular CSR matrix. Used for sparse feature matrices and as
/// the structural half of graphs; the numerical values travel separately
/// when they need gradients.
struct CsrMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> indptr;   // rows + 1 entries
    std::vector<int> indices;  // column index per nonzero
    std::vector<double> values;

    int nnz() const { return static_cast<int>(indices.size()); }
    void validate(const char* what) const;
};

/// Adjacency in CSR form with per-edge weights. Row v lists the neighbours
/// that feed node v during aggregation; for symmetric graphs the two
/// orientations carry the same weight.
struct SparseGraph {
    int n = 0;
    std::vector<int> indptr;   // n + 1 entries
    std::vector<int> indices;
    std::vector<double> weights;
    bool symmetric = false;

    int num_edges() const { return static_cast<int>(indices.size()); }
    void validate(const char* what) const;
};

/// Structure-only view shared by CsrMatrix and SparseGraph so kernels can
/// take either.
struct CsrView {
    int rows = 0;
    int cols = 0;
    std::span<const int> indptr;
    std::span<const int> indices;
};

inline CsrView csr_view(const CsrMatrix& m) {
    return {m.rows, m.cols, m.indptr, m.indices};
}

inline CsrView csr_view(const SparseGraph& g) {
    return {g.n, g.n, g.indptr, g.indices};
}

/// Endpoint arrays in CSR storage order: us[e] is the row owning edge e,
/// vs[e] the stored column. Aligned with the per-edge weight vector.
struct EdgeEndpoints {
    std::vector<int> us;
    std::vector<int> vs;
};

EdgeEndpoints edge_endpoints(const SparseGraph& g);

/// Unique undirected edges (u < v), self-loops excluded.
std::vector<std::pair<int, int>> undirected_edge_list(const SparseGraph& g);

}  // namespace dccgcn
