#pragma once

#include <span>
#include <vector>

#include "dccgcn/graph.hpp"
#include "dccgcn/random.hpp"
#include "dccgcn/sparse.hpp"
#include "dccgcn/tensor.hpp"

namespace dccgcn {

/// Learnable per-node label scores mu (n x c) and diagonal covariances
/// parameterized as Sigma_kk = exp(log_var_k), so variances stay positive
/// under unconstrained updates. One belief set is shared by both channels.
struct BeliefParams {
    Tensor mu;
    Tensor log_var;

    /// mu from Xavier, log_var zero (identity covariance).
    static BeliefParams init(int n, int c, Rng& rng);
    /// All-zero constant beliefs, excluded from optimization.
    static BeliefParams frozen_uniform(int n, int c);

    int n() const { return mu.rows(); }
    int num_classes() const { return mu.cols(); }
};

/// One confidence-weighted convolution channel: two conv layers, a
/// dimension-doubling expansion and a softmax classifier head.
struct ChannelNet {
    Tensor theta1;    // d x h1
    Tensor theta2;    // h1 x h2
    Tensor w_expand;  // h2 x 2*h2
    Tensor b_expand;  // 1 x 2*h2
    Tensor w_cls;     // 2*h2 x c
    Tensor b_cls;     // 1 x c
    double dropout = 0.5;

    static ChannelNet init(int d, int h1, int h2, int c, double dropout, Rng& rng);
    std::vector<Tensor> parameters() const;
};

/// Symmetric covariance-weighted squared distance between the label
/// distributions of two nodes:
///   sum_k (mu_u,k - mu_v,k)^2 (1/Sigma_u,kk + 1/Sigma_v,kk).
double mahalanobis_distance(int u, int v, const BeliefParams& beliefs);

/// Differentiable batch of pairwise distances (nnz x 1) for arbitrary
/// node pairs; the smoothness loss and influence weights share this.
Tensor mahalanobis_pairs(Tape& tape, const BeliefParams& beliefs,
                         std::span<const int> us, std::span<const int> vs);

/// Per-pair influence r = 1 / max(d, eps) as a differentiable nnz x 1
/// tensor; us/vs index arbitrary node pairs.
Tensor influence_weights_pairs(Tape& tape, const BeliefParams& beliefs,
                               std::span<const int> us, std::span<const int> vs,
                               double eps);

/// Influence for every stored edge of a graph, in CSR edge order.
Tensor influence_weights(Tape& tape, const BeliefParams& beliefs, const SparseGraph& g,
                         double eps);

/// Node features kept sparse for the first-layer product.
struct SparseFeatures {
    CsrMatrix structure;
    Tensor values;  // nnz x 1, constant

    static SparseFeatures from_dense(const Tensor& x);
};

struct ChannelOutputs {
    Tensor h1;         // n x h1 hidden embedding (post ReLU/dropout)
    Tensor h2;         // n x h2 output-layer embedding
    Tensor expanded;   // n x 2*h2
    Tensor logits;     // n x c softmax probabilities from the channel head
    Tensor influence;  // per-edge r in CSR order
};

/// Runs one channel over a normalized adjacency:
///   h1 = dropout(relu(spmm(r .* A, x theta1)))
///   h2 = spmm(r .* A, h1 theta2)
///   logits = softmax(relu(h2 w_expand + b) w_cls + b_cls)
ChannelOutputs channel_forward(Tape& tape, const SparseGraph& norm_adj,
                               const SparseFeatures& x, const BeliefParams& beliefs,
                               const ChannelNet& net, Rng& rng, bool train, double eps);

/// softmax(concat(z1, z2) w + b); z1/z2 are the calibrated channel
/// embeddings, w is 2*h2 x c.
Tensor fuse_and_classify(Tape& tape, const Tensor& z1, const Tensor& z2, const Tensor& w,
                         const Tensor& b);

}  // namespace dccgcn
