#pragma once

#include <vector>

#include "dccgcn/model.hpp"
#include "dccgcn/sparse.hpp"
#include "dccgcn/tensor.hpp"

namespace dccgcn {

/// Disjoint node sets produced by channel agreement; high and low together
/// cover every node.
struct ConfidencePartition {
    std::vector<int> high;               // sorted
    std::vector<int> low;                // sorted
    std::vector<std::uint8_t> is_high;   // n flags

    static ConfidencePartition all_high(int n);
    int n() const { return static_cast<int>(is_high.size()); }
};

/// A node is high-confidence iff both channels pick the same class
/// (argmax ties broken by lowest class index).
ConfidencePartition partition_by_agreement(const Tensor& logits1, const Tensor& logits2);

/// For every low-confidence node, the sorted high-confidence nodes within
/// graph distance [1, m] (BFS over the topology graph, self excluded).
/// Entries for high-confidence nodes stay empty.
std::vector<std::vector<int>> m_hop_high_conf_neighbors(const SparseGraph& g,
                                                        const ConfidencePartition& partition,
                                                        int m);

/// Replaces each low-confidence embedding with the influence-weighted sum
/// of its candidates' embeddings: z_u = sum_v r_vu h_v. High-confidence
/// rows and low rows without candidates keep h unchanged. Differentiable
/// through both the embeddings and the beliefs. With normalize set the sum
/// is divided by the total influence.
Tensor calibrate_embeddings(Tape& tape, const Tensor& h, const ConfidencePartition& partition,
                            const std::vector<std::vector<int>>& candidates,
                            const BeliefParams& beliefs, double eps, bool normalize = false);

}  // namespace dccgcn
