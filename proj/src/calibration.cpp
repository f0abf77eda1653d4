#include "dccgcn/calibration.hpp"

#include <algorithm>
#include <deque>

#include "dccgcn/errors.hpp"

namespace dccgcn {

ConfidencePartition ConfidencePartition::all_high(int n) {
    ConfidencePartition p;
    p.is_high.assign(n, 1);
    p.high.resize(n);
    for (int i = 0; i < n; ++i) p.high[i] = i;
    return p;
}

ConfidencePartition partition_by_agreement(const Tensor& logits1, const Tensor& logits2) {
    if (logits1.rows() != logits2.rows() || logits1.cols() != logits2.cols()) {
        throw DimensionError("partition_by_agreement: logit shapes differ");
    }
    const std::vector<int> a1 = row_argmax(logits1);
    const std::vector<int> a2 = row_argmax(logits2);
    ConfidencePartition p;
    p.is_high.resize(a1.size());
    for (std::size_t i = 0; i < a1.size(); ++i) {
        const bool agree = a1[i] == a2[i];
        p.is_high[i] = agree;
        (agree ? p.high : p.low).push_back(static_cast<int>(i));
    }
    return p;
}

std::vector<std::vector<int>> m_hop_high_conf_neighbors(const SparseGraph& g,
                                                        const ConfidencePartition& partition,
                                                        int m) {
    if (m < 1) {
        throw ContractError("m_hop_high_conf_neighbors: m must be >= 1");
    }
    if (partition.n() != g.n) {
        throw ContractError("m_hop_high_conf_neighbors: partition size mismatch");
    }
    std::vector<std::vector<int>> candidates(g.n);
    std::vector<int> depth(g.n, -1);
    std::deque<int> queue;
    for (const int u : partition.low) {
        std::vector<int> visited;
        depth[u] = 0;
        visited.push_back(u);
        queue.clear();
        queue.push_back(u);
        while (!queue.empty()) {
            const int cur = queue.front();
            queue.pop_front();
            if (depth[cur] == m) continue;
            for (int p = g.indptr[cur]; p < g.indptr[cur + 1]; ++p) {
                const int nxt = g.indices[p];
                if (depth[nxt] >= 0) continue;
                depth[nxt] = depth[cur] + 1;
                visited.push_back(nxt);
                queue.push_back(nxt);
            }
        }
        std::vector<int>& list = candidates[u];
        for (int v : visited) {
            if (v != u && partition.is_high[v]) list.push_back(v);
        }
        std::sort(list.begin(), list.end());
        for (int v : visited) depth[v] = -1;
    }
    return candidates;
}

Tensor calibrate_embeddings(Tape& tape, const Tensor& h, const ConfidencePartition& partition,
                            const std::vector<std::vector<int>>& candidates,
                            const BeliefParams& beliefs, double eps, bool normalize) {
    const int n = h.rows();
    if (partition.n() != n || static_cast<int>(candidates.size()) != n) {
        throw ContractError("calibrate_embeddings: size mismatch");
    }
    std::vector<int> us, vs;
    for (const int u : partition.low) {
        for (const int v : candidates[u]) {
            us.push_back(u);
            vs.push_back(v);
        }
    }
    if (us.empty()) {
        return h;  // nothing to calibrate
    }

    // CSR over the (low node -> candidate) pairs; rows without candidates
    // stay empty and fall back to the original embedding.
    CsrMatrix pairs;
    pairs.rows = n;
    pairs.cols = n;
    pairs.indptr.assign(n + 1, 0);
    for (int u : us) ++pairs.indptr[u + 1];
    for (int i = 0; i < n; ++i) pairs.indptr[i + 1] += pairs.indptr[i];
    pairs.indices = vs;  // us is sorted, so CSR order matches pair order

    const Tensor r = influence_weights_pairs(tape, beliefs, us, vs, eps);
    Tensor aggregated = spmm(tape, csr_view(pairs), r, h);
    if (normalize) {
        const Tensor ones(n, 1, 1.0);
        const Tensor totals = spmm(tape, csr_view(pairs), r, ones);
        aggregated = scale_rows(tape, aggregated, reciprocal(tape, clamp_min(tape, totals, eps)));
    }

    // Blend: calibrated rows for low nodes with candidates, h elsewhere.
    Tensor keep_mask(n, h.cols(), 1.0);
    Tensor low_mask(n, h.cols(), 0.0);
    for (const int u : partition.low) {
        if (candidates[u].empty()) continue;
        for (int j = 0; j < h.cols(); ++j) {
            keep_mask.at(u, j) = 0.0;
            low_mask.at(u, j) = 1.0;
        }
    }
    return add(tape, mul(tape, keep_mask, h), mul(tape, low_mask, aggregated));
}

}  // namespace dccgcn
