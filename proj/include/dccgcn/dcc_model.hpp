#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dccgcn/calibration.hpp"
#include "dccgcn/config.hpp"
#include "dccgcn/graph.hpp"
#include "dccgcn/model.hpp"

namespace dccgcn {

/// The full dual-channel model: a topology-graph channel and a KNN
/// feature-graph channel over shared beliefs, agreement partitioning,
/// low-confidence calibration and a fused classifier head.
class DccGcnModel {
public:
    DccGcnModel(const Dataset& ds, const TrainConfig& cfg);

    struct Outputs {
        ChannelOutputs ch1;
        ChannelOutputs ch2;  // undefined under no_aggregation
        ConfidencePartition partition;
        Tensor z1, z2;       // channel embeddings after calibration
        Tensor zhat;         // fused pre-head embedding
        Tensor fused;        // n x c class probabilities
    };

    /// One full forward pass. partition_active selects agreement-based
    /// partitioning (otherwise every node counts as high-confidence);
    /// calibrate applies the low-confidence correction.
    Outputs forward(Tape& tape, Rng& rng, bool train, bool partition_active,
                    bool calibrate) const;

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;

    const TrainConfig& config() const { return cfg_; }
    const SparseGraph& topology() const { return topo_raw_; }
    const SparseGraph& topology_normalized() const { return topo_norm_; }
    const SparseGraph& feature_graph_normalized() const { return feat_norm_; }
    const BeliefParams& beliefs() const { return beliefs_; }
    BeliefParams& beliefs() { return beliefs_; }
    const ChannelNet& channel1() const { return ch1_; }
    const ChannelNet& channel2() const { return ch2_; }

private:
    TrainConfig cfg_;
    SparseGraph topo_raw_;
    SparseGraph topo_norm_;
    SparseGraph feat_norm_;  // empty under no_aggregation
    SparseFeatures x_;
    BeliefParams beliefs_;
    ChannelNet ch1_, ch2_;
    Tensor fuse_w_, fuse_b_;
};

}  // namespace dccgcn
