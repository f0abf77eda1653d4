#include "dccgcn/dcc_model.hpp"

#include "dccgcn/errors.hpp"

namespace dccgcn {

void TrainConfig::validate() const {
    if (epochs < 1) throw ContractError("TrainConfig: epochs must be >= 1");
    if (learning_rate <= 0.0) throw ContractError("TrainConfig: learning rate must be positive");
    if (weight_decay < 0.0) throw ContractError("TrainConfig: weight decay must be >= 0");
    if (hidden1 < 1 || hidden2 < 1) throw ContractError("TrainConfig: hidden dims must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ContractError("TrainConfig: dropout must be in [0, 1)");
    if (knn_k < 1) throw ContractError("TrainConfig: knn_k must be >= 1");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ContractError("TrainConfig: lambda weights must be >= 0");
    if (phi <= 0.0) throw ContractError("TrainConfig: phi must be positive");
    if (calibration_hops < 1) throw ContractError("TrainConfig: calibration_hops must be >= 1");
    if (warmup_epochs < 0) throw ContractError("TrainConfig: warmup must be >= 0");
    if (influence_clamp <= 0.0) throw ContractError("TrainConfig: influence clamp must be positive");
    if (aux_channel_weight < 0.0) throw ContractError("TrainConfig: aux weight must be >= 0");
}

DccGcnModel::DccGcnModel(const Dataset& ds, const TrainConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    ds.validate();
    const int n = ds.n();
    const int d = ds.dim();
    const int c = ds.num_classes;

    const Tensor x_norm = row_normalize_features(ds.features);
    topo_raw_ = ds.graph;
    topo_norm_ = normalize_adjacency(topo_raw_, /*add_self_loops=*/true);
    if (!cfg_.no_aggregation) {
        feat_norm_ = normalize_adjacency(build_knn_graph(x_norm, cfg_.knn_k),
                                         /*add_self_loops=*/true);
    }
    x_ = SparseFeatures::from_dense(x_norm);

    Rng rng(cfg_.seed);
    ch1_ = ChannelNet::init(d, cfg_.hidden1, cfg_.hidden2, c, cfg_.dropout, rng);
    if (!cfg_.no_aggregation) {
        ch2_ = ChannelNet::init(d, cfg_.hidden1, cfg_.hidden2, c, cfg_.dropout, rng);
    }
    const int fuse_in = cfg_.no_aggregation ? cfg_.hidden2 : 2 * cfg_.hidden2;
    fuse_w_ = xavier_init(fuse_in, c, rng).set_requires_grad();
    fuse_b_ = Tensor(1, c, 0.0);
    fuse_b_.set_requires_grad();
    beliefs_ = cfg_.freeze_beliefs ? BeliefParams::frozen_uniform(n, c)
                                   : BeliefParams::init(n, c, rng);
}

DccGcnModel::Outputs DccGcnModel::forward(Tape& tape, Rng& rng, bool train,
                                          bool partition_active, bool calibrate) const {
    Outputs out;
    out.ch1 = channel_forward(tape, topo_norm_, x_, beliefs_, ch1_, rng, train,
                              cfg_.influence_clamp);
    if (!cfg_.no_aggregation) {
        out.ch2 = channel_forward(tape, feat_norm_, x_, beliefs_, ch2_, rng, train,
                                  cfg_.influence_clamp);
        out.partition = partition_active
                            ? partition_by_agreement(out.ch1.logits, out.ch2.logits)
                            : ConfidencePartition::all_high(topo_raw_.n);
    } else {
        out.partition = ConfidencePartition::all_high(topo_raw_.n);
    }

    if (calibrate && !out.partition.low.empty()) {
        const auto candidates =
            m_hop_high_conf_neighbors(topo_raw_, out.partition, cfg_.calibration_hops);
        out.z1 = calibrate_embeddings(tape, out.ch1.h2, out.partition, candidates, beliefs_,
                                      cfg_.influence_clamp, cfg_.calibrate_normalize);
        if (!cfg_.no_aggregation) {
            out.z2 = calibrate_embeddings(tape, out.ch2.h2, out.partition, candidates,
                                          beliefs_, cfg_.influence_clamp,
                                          cfg_.calibrate_normalize);
        }
    } else {
        out.z1 = out.ch1.h2;
        if (!cfg_.no_aggregation) out.z2 = out.ch2.h2;
    }

    if (cfg_.no_aggregation) {
        out.zhat = out.z1;
        out.fused = row_softmax(tape, add_bias(tape, matmul(tape, out.z1, fuse_w_), fuse_b_));
    } else {
        out.zhat = concat_cols(tape, out.z1, out.z2);
        out.fused = row_softmax(tape, add_bias(tape, matmul(tape, out.zhat, fuse_w_), fuse_b_));
    }
    return out;
}

std::vector<Tensor> DccGcnModel::parameters() const {
    std::vector<Tensor> out;
    for (const Tensor& t : ch1_.parameters()) out.push_back(t);
    if (!cfg_.no_aggregation) {
        for (const Tensor& t : ch2_.parameters()) out.push_back(t);
    }
    out.push_back(fuse_w_);
    out.push_back(fuse_b_);
    if (!cfg_.freeze_beliefs) {
        out.push_back(beliefs_.mu);
        out.push_back(beliefs_.log_var);
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> DccGcnModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    const auto add_channel = [&out](const std::string& prefix, const ChannelNet& net) {
        out.emplace_back(prefix + ".theta1", net.theta1);
        out.emplace_back(prefix + ".theta2", net.theta2);
        out.emplace_back(prefix + ".w_expand", net.w_expand);
        out.emplace_back(prefix + ".b_expand", net.b_expand);
        out.emplace_back(prefix + ".w_cls", net.w_cls);
        out.emplace_back(prefix + ".b_cls", net.b_cls);
    };
    add_channel("channel1", ch1_);
    if (!cfg_.no_aggregation) add_channel("channel2", ch2_);
    out.emplace_back("fuse.w", fuse_w_);
    out.emplace_back("fuse.b", fuse_b_);
    out.emplace_back("beliefs.mu", beliefs_.mu);
    out.emplace_back("beliefs.log_var", beliefs_.log_var);
    return out;
}

}  // namespace dccgcn
