#include "dccgcn/training.hpp"

#include <algorithm>
#include <cmath>

#include "dccgcn/errors.hpp"

using nlohmann::json;

namespace dccgcn {

EvalMetrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& mask, int num_classes) {
    if (predictions.size() != labels.size() || mask.size() != labels.size()) {
        throw ContractError("evaluate: array lengths differ");
    }
    std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    long correct = 0, total = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        const int p = predictions[i], t = labels[i];
        if (p == t) {
            ++correct;
            ++tp[t];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    if (total == 0) {
        throw ContractError("evaluate: empty mask");
    }
    EvalMetrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    double f1_sum = 0.0;
    for (int k = 0; k < num_classes; ++k) {
        const double denom_p = tp[k] + fp[k];
        const double denom_r = tp[k] + fn[k];
        const double precision = denom_p > 0 ? tp[k] / denom_p : 0.0;
        const double recall = denom_r > 0 ? tp[k] / denom_r : 0.0;
        f1_sum += (precision + recall) > 0.0
                      ? 2.0 * precision * recall / (precision + recall)
                      : 0.0;
    }
    m.macro_f1 = f1_sum / num_classes;
    return m;
}

// ---- objective terms -------------------------------------------------------

Tensor loss_smooth(Tape& tape, const BeliefParams& beliefs,
                   const std::vector<std::pair<int, int>>& edges) {
    if (edges.empty()) {
        return Tensor::scalar(0.0);
    }
    std::vector<int> us, vs;
    us.reserve(edges.size());
    vs.reserve(edges.size());
    for (auto [u, v] : edges) {
        us.push_back(u);
        vs.push_back(v);
    }
    return sum(tape, mahalanobis_pairs(tape, beliefs, us, vs));
}

namespace {

Tensor one_hot_rows(const std::vector<int>& labels, const std::vector<int>& nodes,
                    int num_classes) {
    Tensor y(static_cast<int>(nodes.size()), num_classes, 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        y.at(static_cast<int>(i), labels[nodes[i]]) = 1.0;
    }
    return y;
}

}  // namespace

Tensor loss_label(Tape& tape, const BeliefParams& beliefs,
                  const std::vector<int>& labeled_nodes, const std::vector<int>& labels,
                  int num_classes, double phi) {
    if (phi <= 0.0) {
        throw ContractError("loss_label: phi must be positive");
    }
    if (labeled_nodes.empty()) {
        return Tensor::scalar(0.0);
    }
    const Tensor y = one_hot_rows(labels, labeled_nodes, num_classes);
    const Tensor mu_l = gather_rows(tape, beliefs.mu, labeled_nodes);
    const Tensor diff = sub(tape, mu_l, y);
    const Tensor sq = mul(tape, diff, diff);
    const Tensor sigma_inv =
        exp_elem(tape, scale(tape, gather_rows(tape, beliefs.log_var, labeled_nodes), -1.0));
    const Tensor phi_term(static_cast<int>(labeled_nodes.size()), num_classes, 1.0 / phi);
    return sum(tape, mul(tape, sq, add(tape, sigma_inv, phi_term)));
}

Tensor loss_cross(Tape& tape, const Tensor& probs, const std::vector<int>& labels,
                  const std::vector<int>& nodes) {
    if (nodes.empty()) {
        return Tensor::scalar(0.0);
    }
    const Tensor rows = gather_rows(tape, probs, nodes);
    const Tensor log_p = log_elem(tape, clamp_min(tape, rows, 1e-12));
    const Tensor y = one_hot_rows(labels, nodes, probs.cols());
    return scale(tape, sum(tape, mul(tape, log_p, y)), -1.0);
}

// ---- training loop ---------------------------------------------------------

namespace {

std::vector<int> mask_to_nodes(const std::vector<std::uint8_t>& mask) {
    std::vector<int> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace

Tensor training_objective(Tape& tape, const DccGcnModel& model,
                          const DccGcnModel::Outputs& out, const Dataset& ds,
                          const TrainConfig& cfg, const std::vector<int>& labeled,
                          const std::vector<std::pair<int, int>>& smooth_edges) {
    Tensor loss = loss_cross(tape, out.fused, ds.labels, labeled);
    if (cfg.aux_channel_weight > 0.0) {
        loss = add(tape, loss,
                   scale(tape, loss_cross(tape, out.ch1.logits, ds.labels, labeled),
                         cfg.aux_channel_weight));
        if (!cfg.no_aggregation) {
            loss = add(tape, loss,
                       scale(tape, loss_cross(tape, out.ch2.logits, ds.labels, labeled),
                             cfg.aux_channel_weight));
        }
    }
    if (cfg.lambda1 > 0.0 && !cfg.freeze_beliefs) {
        loss = add(tape, loss,
                   scale(tape, loss_smooth(tape, model.beliefs(), smooth_edges), cfg.lambda1));
    }
    if (cfg.lambda2 > 0.0 && !cfg.freeze_beliefs) {
        loss = add(tape, loss,
                   scale(tape,
                         loss_label(tape, model.beliefs(), labeled, ds.labels,
                                    ds.num_classes, cfg.phi),
                         cfg.lambda2));
    }
    return loss;
}

namespace {

double masked_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                       const std::vector<std::uint8_t>& mask) {
    long correct = 0, total = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        correct += pred[i] == truth[i];
    }
    return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

}  // namespace

TrainOutcome train(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate();
    if (ds.train_mask.empty()) {
        throw ContractError("train: dataset has no train/test split");
    }
    const std::vector<int> labeled = mask_to_nodes(ds.train_mask);
    if (labeled.empty()) {
        throw ContractError("train: no labeled nodes");
    }

    DccGcnModel model(ds, cfg);
    const auto smooth_edges = undirected_edge_list(model.topology());
    AdamOptimizer opt(model.parameters(),
                      {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    Rng dropout_rng(Rng::mix(cfg.seed, 0xd409));

    Metrics metrics;
    metrics.seed = cfg.seed;
    metrics.loss_trace.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        const bool active = epoch >= cfg.warmup_epochs;
        const auto out = model.forward(tape, dropout_rng, /*train=*/true, active,
                                       active && !cfg.no_calibration);
        const Tensor loss = training_objective(tape, model, out, ds, cfg, labeled, smooth_edges);
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
            throw NumericError("train: diverged at epoch " + std::to_string(epoch));
        }
        metrics.loss_trace.push_back(loss_value);
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
    }

    // Final evaluation, dropout off. The partition comes from the channel
    // heads and is identical with and without calibration, so the before /
    // after views refer to the same node sets.
    Tape eval_tape;
    const auto calibrated = model.forward(eval_tape, dropout_rng, /*train=*/false,
                                          /*partition_active=*/true,
                                          /*calibrate=*/!cfg.no_calibration);
    eval_tape.clear();
    const auto uncalibrated = model.forward(eval_tape, dropout_rng, /*train=*/false,
                                            /*partition_active=*/true, /*calibrate=*/false);
    eval_tape.clear();

    TrainOutcome outcome{std::move(model), std::move(metrics), calibrated.partition,
                         row_argmax(calibrated.fused), row_argmax(uncalibrated.fused),
                         calibrated.zhat};

    const EvalMetrics test = evaluate(outcome.predictions, ds.labels, ds.test_mask,
                                      ds.num_classes);
    outcome.metrics.accuracy = test.accuracy;
    outcome.metrics.macro_f1 = test.macro_f1;
    outcome.metrics.low_conf_count = static_cast<int>(outcome.final_partition.low.size());

    std::vector<std::uint8_t> low_test(ds.test_mask);
    int low_test_count = 0;
    for (int i = 0; i < ds.n(); ++i) {
        low_test[i] = ds.test_mask[i] && !outcome.final_partition.is_high[i];
        low_test_count += low_test[i];
    }
    if (low_test_count > 0) {
        outcome.metrics.low_conf_acc_before =
            masked_accuracy(outcome.predictions_uncalibrated, ds.labels, low_test);
        outcome.metrics.low_conf_acc_after =
            masked_accuracy(outcome.predictions, ds.labels, low_test);
    }
    return outcome;
}

// ---- plain GCN harness -----------------------------------------------------

double pseudo_alpha(int epoch, const PseudoLabelConfig& plc) {
    return epoch > plc.activation_epoch ? plc.alpha : 0.0;
}

PlainGcnOutcome train_plain_gcn(const Dataset& ds, const PlainGcnConfig& cfg,
                                const std::optional<PseudoLabels>& pseudo,
                                const PseudoLabelConfig& plc) {
    ds.validate();
    if (ds.train_mask.empty()) {
        throw ContractError("train_plain_gcn: dataset has no split");
    }
    if (cfg.epochs < 1 || cfg.hidden < 1 || cfg.learning_rate <= 0.0) {
        throw ContractError("train_plain_gcn: bad config");
    }
    const std::vector<int> labeled = mask_to_nodes(ds.train_mask);
    const SparseGraph norm = normalize_adjacency(ds.graph, /*add_self_loops=*/true);
    const Tensor adj_w = Tensor::column(norm.weights);
    const SparseFeatures x = SparseFeatures::from_dense(row_normalize_features(ds.features));

    Rng init_rng(cfg.seed);
    Tensor w1 = xavier_init(ds.dim(), cfg.hidden, init_rng).set_requires_grad();
    Tensor w2 = xavier_init(cfg.hidden, ds.num_classes, init_rng).set_requires_grad();
    AdamOptimizer opt({w1, w2}, {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    Rng dropout_rng(Rng::mix(cfg.seed, 0xd409));

    const auto forward = [&](Tape& tape, bool train) {
        const Tensor xw = spmm(tape, csr_view(x.structure), x.values, w1);
        Tensor h = relu(tape, spmm(tape, csr_view(norm), adj_w, xw));
        h = dropout(tape, h, cfg.dropout, dropout_rng, train);
        const Tensor logits = spmm(tape, csr_view(norm), adj_w, matmul(tape, h, w2));
        return row_softmax(tape, logits);
    };

    Metrics metrics;
    metrics.seed = cfg.seed;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        const Tensor probs = forward(tape, true);
        Tensor loss = loss_cross(tape, probs, ds.labels, labeled);
        if (pseudo && !pseudo->nodes.empty()) {
            const double alpha = pseudo_alpha(epoch + 1, plc);
            if (alpha > 0.0) {
                loss = add(tape, loss,
                           scale(tape, loss_cross(tape, probs, pseudo->labels, pseudo->nodes),
                                 alpha));
            }
        }
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
            throw NumericError("train_plain_gcn: diverged at epoch " + std::to_string(epoch));
        }
        metrics.loss_trace.push_back(loss_value);
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
    }

    Tape eval_tape;
    const Tensor probs = forward(eval_tape, false);
    eval_tape.clear();
    PlainGcnOutcome out{std::move(metrics), row_argmax(probs)};
    const EvalMetrics test = evaluate(out.predictions, ds.labels, ds.test_mask, ds.num_classes);
    out.metrics.accuracy = test.accuracy;
    out.metrics.macro_f1 = test.macro_f1;
    return out;
}

Metrics pseudo_label_train(const Dataset& ds, const TrainConfig& cfg,
                           const PseudoLabelConfig& plc, const PlainGcnConfig& gcn_cfg) {
    if (plc.count < 0) {
        throw ContractError("pseudo_label_train: count must be >= 0");
    }
    const TrainOutcome teacher = train(ds, cfg);
    const std::vector<int>& high = teacher.final_partition.high;
    if (static_cast<int>(high.size()) < plc.count) {
        throw ContractError("pseudo_label_train: only " + std::to_string(high.size()) +
                            " high-confidence nodes for count " + std::to_string(plc.count));
    }
    PseudoLabels pseudo;
    if (plc.count > 0) {
        std::vector<int> pool(high);
        Rng rng(Rng::mix(cfg.seed, 0x95e0));
        for (int t = 0; t < plc.count; ++t) {
            const std::size_t pick = t + rng.uniform_index(pool.size() - t);
            std::swap(pool[t], pool[pick]);
            pseudo.nodes.push_back(pool[t]);
        }
        std::sort(pseudo.nodes.begin(), pseudo.nodes.end());
        pseudo.labels.resize(ds.n(), 0);
        for (int v : pseudo.nodes) pseudo.labels[v] = teacher.predictions[v];
    }
    PlainGcnConfig student = gcn_cfg;
    student.seed = cfg.seed;
    return train_plain_gcn(ds, student,
                           plc.count > 0 ? std::optional<PseudoLabels>(pseudo) : std::nullopt,
                           plc)
        .metrics;
}

// ---- serialization ---------------------------------------------------------

json train_config_to_json(const TrainConfig& cfg) {
    return json{{"epochs", cfg.epochs},
                {"learning_rate", cfg.learning_rate},
                {"weight_decay", cfg.weight_decay},
                {"hidden1", cfg.hidden1},
                {"hidden2", cfg.hidden2},
                {"dropout", cfg.dropout},
                {"knn_k", cfg.knn_k},
                {"lambda1", cfg.lambda1},
                {"lambda2", cfg.lambda2},
                {"phi", cfg.phi},
                {"calibration_hops", cfg.calibration_hops},
                {"warmup_epochs", cfg.warmup_epochs},
                {"seed", cfg.seed},
                {"no_calibration", cfg.no_calibration},
                {"no_aggregation", cfg.no_aggregation},
                {"calibrate_normalize", cfg.calibrate_normalize},
                {"freeze_beliefs", cfg.freeze_beliefs},
                {"influence_clamp", cfg.influence_clamp},
                {"aux_channel_weight", cfg.aux_channel_weight}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
    TrainConfig cfg = base;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.hidden1 = j.value("hidden1", cfg.hidden1);
    cfg.hidden2 = j.value("hidden2", cfg.hidden2);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.knn_k = j.value("knn_k", cfg.knn_k);
    cfg.lambda1 = j.value("lambda1", cfg.lambda1);
    cfg.lambda2 = j.value("lambda2", cfg.lambda2);
    cfg.phi = j.value("phi", cfg.phi);
    cfg.calibration_hops = j.value("calibration_hops", cfg.calibration_hops);
    cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.no_calibration = j.value("no_calibration", cfg.no_calibration);
    cfg.no_aggregation = j.value("no_aggregation", cfg.no_aggregation);
    cfg.calibrate_normalize = j.value("calibrate_normalize", cfg.calibrate_normalize);
    cfg.freeze_beliefs = j.value("freeze_beliefs", cfg.freeze_beliefs);
    cfg.influence_clamp = j.value("influence_clamp", cfg.influence_clamp);
    cfg.aux_channel_weight = j.value("aux_channel_weight", cfg.aux_channel_weight);
    return cfg;
}

json metrics_to_json(const Metrics& m, const json& config_echo) {
    json j{{"accuracy", m.accuracy},
           {"macro_f1", m.macro_f1},
           {"loss_trace", m.loss_trace},
           {"low_conf_count", m.low_conf_count},
           {"low_conf_acc_before",
            m.low_conf_acc_before ? json(*m.low_conf_acc_before) : json(nullptr)},
           {"low_conf_acc_after",
            m.low_conf_acc_after ? json(*m.low_conf_acc_after) : json(nullptr)},
           {"config", config_echo},
           {"seed", m.seed}};
    return j;
}

}  // namespace dccgcn
