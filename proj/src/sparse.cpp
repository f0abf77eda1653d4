#include "dccgcn/sparse.hpp"

#include <string>

#include "dccgcn/errors.hpp"

namespace dccgcn {

namespace {
void validate_csr(const char* what, int rows, int cols,
                  const std::vector<int>& indptr, const std::vector<int>& indices) {
    if (rows < 0 || cols < 0) {
        throw ContractError(std::string(what) + ": negative dimension");
    }
    if (static_cast<int>(indptr.size()) != rows + 1) {
        throw ContractError(std::string(what) + ": indptr length must be rows+1");
    }
    if (indptr.front() != 0 || indptr.back() != static_cast<int>(indices.size())) {
        throw ContractError(std::string(what) + ": indptr endpoints inconsistent");
    }
    for (int r = 0; r < rows; ++r) {
        if (indptr[r] > indptr[r + 1]) {
            throw ContractError(std::string(what) + ": indptr not monotone at row " +
                                std::to_string(r));
        }
    }
    for (int idx : indices) {
        if (idx < 0 || idx >= cols) {
            throw ContractError(std::string(what) + ": column index out of range");
        }
    }
}
}  // namespace

void CsrMatrix::validate(const char* what) const {
    validate_csr(what, rows, cols, indptr, indices);
    if (values.size() != indices.size()) {
        throw ContractError(std::string(what) + ": values length mismatch");
    }
}

void SparseGraph::validate(const char* what) const {
    validate_csr(what, n, n, indptr, indices);
    if (weights.size() != indices.size()) {
        throw ContractError(std::string(what) + ": weights length mismatch");
    }
}

EdgeEndpoints edge_endpoints(const SparseGraph& g) {
    EdgeEndpoints e;
    e.us.resize(g.indices.size());
    e.vs = g.indices;
    for (int r = 0; r < g.n; ++r) {
        for (int p = g.indptr[r]; p < g.indptr[r + 1]; ++p) {
            e.us[p] = r;
        }
    }
    return e;
}

std::vector<std::pair<int, int>> undirected_edge_list(const SparseGraph& g) {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < g.n; ++u) {
        for (int p = g.indptr[u]; p < g.indptr[u + 1]; ++p) {
            const int v = g.indices[p];
            if (u < v) {
                out.emplace_back(u, v);
            }
        }
    }
    return out;
}

}  // namespace dccgcn
