#include "dccgcn/model.hpp"

#include <cmath>

#include "dccgcn/errors.hpp"

namespace dccgcn {

BeliefParams BeliefParams::init(int n, int c, Rng& rng) {
    BeliefParams b;
    b.mu = xavier_init(n, c, rng).set_requires_grad();
    b.log_var = Tensor(n, c, 0.0);
    b.log_var.set_requires_grad();
    return b;
}

BeliefParams BeliefParams::frozen_uniform(int n, int c) {
    BeliefParams b;
    b.mu = Tensor(n, c, 0.0);
    b.log_var = Tensor(n, c, 0.0);
    return b;
}

ChannelNet ChannelNet::init(int d, int h1, int h2, int c, double dropout, Rng& rng) {
    ChannelNet net;
    net.theta1 = xavier_init(d, h1, rng).set_requires_grad();
    net.theta2 = xavier_init(h1, h2, rng).set_requires_grad();
    net.w_expand = xavier_init(h2, 2 * h2, rng).set_requires_grad();
    net.b_expand = Tensor(1, 2 * h2, 0.0);
    net.b_expand.set_requires_grad();
    net.w_cls = xavier_init(2 * h2, c, rng).set_requires_grad();
    net.b_cls = Tensor(1, c, 0.0);
    net.b_cls.set_requires_grad();
    net.dropout = dropout;
    return net;
}

std::vector<Tensor> ChannelNet::parameters() const {
    return {theta1, theta2, w_expand, b_expand, w_cls, b_cls};
}

double mahalanobis_distance(int u, int v, const BeliefParams& beliefs) {
    const int c = beliefs.num_classes();
    double acc = 0.0;
    for (int k = 0; k < c; ++k) {
        const double diff = beliefs.mu.at(u, k) - beliefs.mu.at(v, k);
        const double winv =
            std::exp(-beliefs.log_var.at(u, k)) + std::exp(-beliefs.log_var.at(v, k));
        acc += diff * diff * winv;
    }
    return acc;
}

Tensor mahalanobis_pairs(Tape& tape, const BeliefParams& beliefs,
                         std::span<const int> us, std::span<const int> vs) {
    if (us.size() != vs.size()) {
        throw ContractError("mahalanobis_pairs: endpoint arrays differ in length");
    }
    const Tensor mu_u = gather_rows(tape, beliefs.mu, us);
    const Tensor mu_v = gather_rows(tape, beliefs.mu, vs);
    const Tensor diff = sub(tape, mu_u, mu_v);
    const Tensor sq = mul(tape, diff, diff);
    const Tensor inv_u = exp_elem(tape, scale(tape, gather_rows(tape, beliefs.log_var, us), -1.0));
    const Tensor inv_v = exp_elem(tape, scale(tape, gather_rows(tape, beliefs.log_var, vs), -1.0));
    return row_sum(tape, mul(tape, sq, add(tape, inv_u, inv_v)));
}

Tensor influence_weights_pairs(Tape& tape, const BeliefParams& beliefs,
                               std::span<const int> us, std::span<const int> vs,
                               double eps) {
    if (eps <= 0.0) {
        throw ContractError("influence_weights: eps must be positive");
    }
    const Tensor dist = mahalanobis_pairs(tape, beliefs, us, vs);
    return reciprocal(tape, clamp_min(tape, dist, eps));
}

Tensor influence_weights(Tape& tape, const BeliefParams& beliefs, const SparseGraph& g,
                         double eps) {
    const EdgeEndpoints e = edge_endpoints(g);
    return influence_weights_pairs(tape, beliefs, e.us, e.vs, eps);
}

SparseFeatures SparseFeatures::from_dense(const Tensor& x) {
    SparseFeatures f;
    f.structure = dense_to_csr(x);
    f.values = Tensor::column(f.structure.values);
    return f;
}

ChannelOutputs channel_forward(Tape& tape, const SparseGraph& norm_adj,
                               const SparseFeatures& x, const BeliefParams& beliefs,
                               const ChannelNet& net, Rng& rng, bool train, double eps) {
    if (x.structure.rows != norm_adj.n) {
        throw DimensionError("channel_forward: feature rows do not match graph size");
    }
    ChannelOutputs out;
    out.influence = influence_weights(tape, beliefs, norm_adj, eps);
    const Tensor adj_weights = Tensor::column(norm_adj.weights);
    const Tensor edge_w = mul(tape, out.influence, adj_weights);

    // spmm(rA, x theta1) == spmm(rA, x) theta1; the small side goes first.
    const Tensor xw = spmm(tape, csr_view(x.structure), x.values, net.theta1);
    Tensor h1 = relu(tape, spmm(tape, csr_view(norm_adj), edge_w, xw));
    h1 = dropout(tape, h1, net.dropout, rng, train);
    out.h1 = h1;
    out.h2 = spmm(tape, csr_view(norm_adj), edge_w, matmul(tape, h1, net.theta2));
    out.expanded = relu(tape, add_bias(tape, matmul(tape, out.h2, net.w_expand), net.b_expand));
    out.logits = row_softmax(tape, add_bias(tape, matmul(tape, out.expanded, net.w_cls), net.b_cls));
    return out;
}

Tensor fuse_and_classify(Tape& tape, const Tensor& z1, const Tensor& z2, const Tensor& w,
                         const Tensor& b) {
    const Tensor zhat = concat_cols(tape, z1, z2);
    return row_softmax(tape, add_bias(tape, matmul(tape, zhat, w), b));
}

}  // namespace dccgcn
