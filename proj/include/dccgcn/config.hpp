#pragma once

#include <cstdint>

namespace dccgcn {

/// Every hyperparameter, seed and ablation switch for one training run.
struct TrainConfig {
    int epochs = 200;
    double learning_rate = 5e-3;
    double weight_decay = 1e-5;
    int hidden1 = 256;
    int hidden2 = 128;
    double dropout = 0.5;
    int knn_k = 6;
    double lambda1 = 0.25;        // smoothness term weight
    double lambda2 = 0.5;         // label term weight
    double phi = 1.0;             // label-loss identity blend, > 0
    int calibration_hops = 2;     // m
    int warmup_epochs = 20;       // epochs before the partition activates
    std::uint64_t seed = 1;
    bool no_calibration = false;  // ablation: keep raw embeddings
    bool no_aggregation = false;  // ablation: drop the feature-graph channel
    bool calibrate_normalize = false;  // divide calibrated sums by total influence
    bool freeze_beliefs = false;  // hold beliefs at a uniform constant
    // Floor for pairwise belief distances. Self-loops sit at distance zero,
    // so every edge weight is bounded by adjacency * (1/clamp); at 1.0 the
    // influence only down-weights dissimilar neighbours and the uniform-
    // belief case reduces exactly to a plain GCN. Values near zero blow up
    // the self-loop weight and stall training.
    double influence_clamp = 1.0;
    double aux_channel_weight = 0.5;   // per-channel head cross-entropy weight

    void validate() const;
};

}  // namespace dccgcn
