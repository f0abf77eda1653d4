#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dccgcn/dcc_model.hpp"

namespace dccgcn {

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> loss_trace;
    int low_conf_count = 0;
    // Accuracy on test nodes the final partition marks low-confidence,
    // from an uncalibrated / calibrated forward pass. Absent when no test
    // node is low-confidence.
    std::optional<double> low_conf_acc_before;
    std::optional<double> low_conf_acc_after;
    std::uint64_t seed = 0;
};

struct EvalMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

/// Accuracy and macro-F1 over the masked nodes. Every class contributes to
/// the F1 mean; a class absent from both predictions and truth counts 0.
EvalMetrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& mask, int num_classes);

// ---- objective terms -------------------------------------------------------

/// sum over undirected edges of the pairwise belief distance.
Tensor loss_smooth(Tape& tape, const BeliefParams& beliefs,
                   const std::vector<std::pair<int, int>>& edges);

/// sum over labeled nodes of (mu - y)^T (Sigma^{-1} + I/phi) (mu - y).
Tensor loss_label(Tape& tape, const BeliefParams& beliefs,
                  const std::vector<int>& labeled_nodes, const std::vector<int>& labels,
                  int num_classes, double phi);

/// -sum over the given nodes of log probs[v, label(v)], probability floored
/// at 1e-12.
Tensor loss_cross(Tape& tape, const Tensor& probs, const std::vector<int>& labels,
                  const std::vector<int>& nodes);

/// The complete objective one training step minimizes: fused cross-entropy
/// plus weighted channel-head cross-entropies plus the smoothness and
/// label terms.
Tensor training_objective(Tape& tape, const DccGcnModel& model,
                          const DccGcnModel::Outputs& out, const Dataset& ds,
                          const TrainConfig& cfg, const std::vector<int>& labeled,
                          const std::vector<std::pair<int, int>>& smooth_edges);

struct TrainOutcome {
    DccGcnModel model;
    Metrics metrics;
    ConfidencePartition final_partition;
    std::vector<int> predictions;                // calibrated fused argmax
    std::vector<int> predictions_uncalibrated;
    Tensor final_embedding;                      // fused pre-head embedding
};

/// Full training loop: per epoch the influence weights are recomputed, both
/// channels run, nodes are partitioned by agreement once the warmup has
/// passed, low-confidence embeddings are calibrated, and the combined
/// objective is minimized with Adam. Non-finite loss aborts with the epoch
/// number.
TrainOutcome train(const Dataset& ds, const TrainConfig& cfg);

// ---- plain GCN harness -----------------------------------------------------

/// Two-layer GCN over the topology graph with no beliefs; the reference
/// baseline and the pseudo-label student.
struct PlainGcnConfig {
    int hidden = 16;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    double dropout = 0.5;
    int epochs = 200;
    std::uint64_t seed = 1;
};

struct PseudoLabelConfig {
    int count = 100;
    double alpha = 0.3;
    int activation_epoch = 100;  // alpha applies strictly after this epoch
};

/// Pseudo-label weight for a 1-based epoch number.
double pseudo_alpha(int epoch, const PseudoLabelConfig& plc);

struct PseudoLabels {
    std::vector<int> nodes;
    std::vector<int> labels;
};

struct PlainGcnOutcome {
    Metrics metrics;
    std::vector<int> predictions;
};

PlainGcnOutcome train_plain_gcn(const Dataset& ds, const PlainGcnConfig& cfg,
                                const std::optional<PseudoLabels>& pseudo = std::nullopt,
                                const PseudoLabelConfig& plc = {});

/// Trains the dual-channel model, draws `count` pseudo-labeled nodes
/// uniformly from its high-confidence set, then trains a fresh plain GCN
/// with the extra cross-entropy term.
Metrics pseudo_label_train(const Dataset& ds, const TrainConfig& cfg,
                           const PseudoLabelConfig& plc,
                           const PlainGcnConfig& gcn_cfg = {});

// ---- serialization ---------------------------------------------------------

nlohmann::json train_config_to_json(const TrainConfig& cfg);
/// Keys present in j override the base config; everything else passes
/// through, so partial config files layer over presets.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base = {});
nlohmann::json metrics_to_json(const Metrics& m, const nlohmann::json& config_echo);

}  // namespace dccgcn
