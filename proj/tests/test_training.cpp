#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dccgcn/training.hpp"
#include "support.hpp"

using namespace dccgcn;

namespace {

Dataset small_dataset(std::uint64_t seed = 1, int n = 24, int c = 2, int d = 5,
                      double separation = 3.0) {
    SyntheticSpec spec;
    spec.n = n;
    spec.c = c;
    spec.d = d;
    spec.separation = separation;
    spec.p_intra = 0.35;
    spec.p_inter = 0.05;
    spec.seed = seed;
    Dataset ds = generate_synthetic(spec);
    make_split(ds, std::max(2, n / (4 * c)), std::nullopt, seed);
    return ds;
}

TrainConfig small_config(std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.hidden1 = 8;
    cfg.hidden2 = 6;
    cfg.dropout = 0.2;
    cfg.knn_k = 3;
    cfg.warmup_epochs = 10;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("smoothness loss is zero for constant beliefs") {
    BeliefParams b = BeliefParams::frozen_uniform(4, 3);
    Tape tape;
    CHECK(loss_smooth(tape, b, {{0, 1}, {1, 2}, {2, 3}}).item() == 0.0);
}

TEST_CASE("smoothness of one unit-difference edge is two") {
    BeliefParams b;
    b.mu = Tensor::from_values(2, 2, {1.0, 0.0, 0.0, 0.0});
    b.log_var = Tensor(2, 2, 0.0);
    Tape tape;
    CHECK(loss_smooth(tape, b, {{0, 1}}).item() == doctest::Approx(2.0));
}

TEST_CASE("smoothness equals the summed pairwise distances") {
    Rng rng(7);
    const int n = 8, c = 3;
    BeliefParams b;
    b.mu = xavier_init(n, c, rng);
    b.log_var = xavier_init(n, c, rng);
    const SparseGraph g = graph_from_edges(n, {{0, 1}, {0, 2}, {3, 5}, {6, 7}, {2, 4}}, true);
    const auto edges = undirected_edge_list(g);
    Tape tape;
    const double total = loss_smooth(tape, b, edges).item();
    double oracle = 0.0;
    for (auto [u, v] : edges) oracle += mahalanobis_distance(u, v, b);
    CHECK(total == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("label loss vanishes when beliefs equal the one-hot labels") {
    BeliefParams b;
    b.mu = Tensor::from_values(3, 2, {1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
    b.log_var = Tensor(3, 2, 0.0);
    const std::vector<int> labels = {0, 1, 0};
    Tape tape;
    CHECK(loss_label(tape, b, {0, 1, 2}, labels, 2, 1.0).item() == doctest::Approx(0.0));
}

TEST_CASE("single labeled node with unit error scores two") {
    // Sigma = I, phi = 1: weight (1 + 1); mu - y = e1 squared = 1
    BeliefParams b;
    b.mu = Tensor::from_values(2, 2, {0.0, 0.0, 0.3, 0.7});
    b.log_var = Tensor(2, 2, 0.0);
    const std::vector<int> labels = {0, 1};
    Tape tape;
    CHECK(loss_label(tape, b, {0}, labels, 2, 1.0).item() == doctest::Approx(2.0));
}

TEST_CASE("large phi leaves only the covariance weighting") {
    BeliefParams b;
    b.mu = Tensor::from_values(1, 2, {0.0, 0.0});
    b.log_var = Tensor(1, 2, std::log(2.0));  // Sigma = 2I, Sigma^-1 = 0.5
    const std::vector<int> labels = {0};
    Tape tape;
    const double big_phi = loss_label(tape, b, {0}, labels, 2, 1e12).item();
    CHECK(big_phi == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("cross entropy of a perfect prediction is zero") {
    const Tensor probs = Tensor::from_values(2, 2, {1.0, 0.0, 0.0, 1.0});
    const std::vector<int> labels = {0, 1};
    Tape tape;
    CHECK(loss_cross(tape, probs, labels, {0, 1}).item() == doctest::Approx(0.0));
}

TEST_CASE("uniform prediction over seven classes costs ln 7") {
    Tensor probs(1, 7, 1.0 / 7.0);
    Tape tape;
    CHECK(loss_cross(tape, probs, {3}, {0}).item() == doctest::Approx(std::log(7.0)));
}

TEST_CASE("cross entropy adds over labeled nodes") {
    Rng rng(5);
    Tape tape;
    Tensor raw(3, 4);
    for (double& v : raw.values()) v = rng.uniform(-1, 1);
    const Tensor probs = row_softmax(tape, raw);
    const std::vector<int> labels = {1, 3, 0};
    const double both = loss_cross(tape, probs, labels, {0, 2}).item();
    const double first = loss_cross(tape, probs, labels, {0}).item();
    const double second = loss_cross(tape, probs, labels, {2}).item();
    CHECK(both == doctest::Approx(first + second).epsilon(1e-12));
}

TEST_CASE("objective terms are nonnegative for random parameters") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6, c = 3;
        BeliefParams b;
        b.mu = xavier_init(n, c, rng);
        b.log_var = xavier_init(n, c, rng);
        const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
        Tape tape;
        CHECK(loss_smooth(tape, b, {{0, 1}, {2, 3}, {4, 5}}).item() >= 0.0);
        CHECK(loss_label(tape, b, {0, 3, 4}, labels, c, 0.7).item() >= 0.0);
    }
}

TEST_CASE("evaluate scores accuracy and macro f1 as defined") {
    // binary, all predicted 0, truth balanced: acc .5, f1 (2/3 + 0)/2
    const std::vector<int> pred = {0, 0, 0, 0};
    const std::vector<int> truth = {0, 0, 1, 1};
    const std::vector<std::uint8_t> mask = {1, 1, 1, 1};
    const EvalMetrics m = evaluate(pred, truth, mask, 2);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.macro_f1 == doctest::Approx(1.0 / 3.0));

    const EvalMetrics perfect = evaluate(truth, truth, mask, 2);
    CHECK(perfect.accuracy == doctest::Approx(1.0));
    CHECK(perfect.macro_f1 == doctest::Approx(1.0));

    CHECK_THROWS_AS(evaluate(pred, truth, {0, 0, 0, 0}, 2), ContractError);
}

TEST_CASE("training a separable synthetic dataset fits the train set") {
    SyntheticSpec spec;
    spec.n = 40;
    spec.c = 2;
    spec.d = 6;
    spec.separation = 6.0;
    spec.p_intra = 0.5;
    spec.p_inter = 0.02;
    Dataset ds = generate_synthetic(spec);
    make_split(ds, 5, std::nullopt, 2);

    TrainConfig cfg = small_config(3);
    cfg.epochs = 50;
    const TrainOutcome out = train(ds, cfg);
    const EvalMetrics train_view = evaluate(out.predictions, ds.labels, ds.train_mask, 2);
    CHECK(train_view.accuracy == doctest::Approx(1.0));
    CHECK(out.metrics.accuracy > 0.8);
    // cross-entropy trace must end below its start
    CHECK(out.metrics.loss_trace.back() < out.metrics.loss_trace.front());
}

TEST_CASE("identical seeds give identical metrics") {
    const Dataset ds = small_dataset(4);
    const TrainConfig cfg = small_config(7);
    const TrainOutcome a = train(ds, cfg);
    const TrainOutcome b = train(ds, cfg);
    CHECK(a.metrics.accuracy == b.metrics.accuracy);
    CHECK(a.metrics.macro_f1 == b.metrics.macro_f1);
    CHECK(a.metrics.loss_trace == b.metrics.loss_trace);
    CHECK(a.predictions == b.predictions);
}

TEST_CASE("full objective gradients match finite differences on a small instance") {
    const Dataset ds = small_dataset(6, 12, 2, 5);
    TrainConfig cfg = small_config(5);
    cfg.hidden1 = 4;
    cfg.hidden2 = 3;
    cfg.dropout = 0.0;          // keep the loss a pure function of parameters
    cfg.influence_clamp = 1.0;  // moderate the scales so the softmax stays alive
    cfg.warmup_epochs = 0;

    DccGcnModel model(ds, cfg);
    std::vector<int> labeled;
    for (int i = 0; i < ds.n(); ++i) {
        if (ds.train_mask[i]) labeled.push_back(i);
    }
    const auto edges = undirected_edge_list(model.topology());

    Rng dummy(1);
    auto objective = [&](Tape& tape) {
        const auto out = model.forward(tape, dummy, true, true, true);
        Tensor loss = loss_cross(tape, out.fused, ds.labels, labeled);
        loss = add(tape, loss,
                   scale(tape, loss_cross(tape, out.ch1.logits, ds.labels, labeled), 0.5));
        loss = add(tape, loss,
                   scale(tape, loss_cross(tape, out.ch2.logits, ds.labels, labeled), 0.5));
        loss = add(tape, loss, scale(tape, loss_smooth(tape, model.beliefs(), edges), 0.3));
        loss = add(tape, loss,
                   scale(tape,
                         loss_label(tape, model.beliefs(), labeled, ds.labels, 2, 1.0),
                         0.4));
        return loss;
    };
    auto loss_value = [&]() {
        Tape t;
        return objective(t).item();
    };
    const double err = dccgcn::testing::max_gradient_error(loss_value, objective,
                                                           model.parameters());
    CHECK(err < 1e-4);
}

TEST_CASE("ablated, frozen-belief runs track the plain gcn baseline") {
    // no calibration, no aggregation, uniform beliefs, eps = 1 -> the
    // channel is a plain GCN with an extra head; with both sides run to
    // convergence the seed means agree within noise
    double dcc_sum = 0.0, plain_sum = 0.0;
    const int seeds = 5;
    for (int s = 1; s <= seeds; ++s) {
        SyntheticSpec spec;
        spec.n = 120;
        spec.c = 3;
        spec.d = 8;
        spec.separation = 3.0;
        spec.p_intra = 0.15;
        spec.p_inter = 0.02;
        spec.seed = s;
        Dataset ds = generate_synthetic(spec);
        make_split(ds, 10, std::nullopt, s);

        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.learning_rate = 0.01;
        cfg.weight_decay = 5e-4;
        cfg.hidden1 = 16;
        cfg.hidden2 = 8;
        cfg.dropout = 0.5;
        cfg.knn_k = 3;
        cfg.warmup_epochs = 10;
        cfg.seed = s;
        cfg.no_calibration = true;
        cfg.no_aggregation = true;
        cfg.freeze_beliefs = true;
        cfg.influence_clamp = 1.0;
        dcc_sum += train(ds, cfg).metrics.accuracy;

        PlainGcnConfig pg;
        pg.hidden = cfg.hidden1;
        pg.epochs = cfg.epochs;
        pg.learning_rate = cfg.learning_rate;
        pg.weight_decay = cfg.weight_decay;
        pg.dropout = cfg.dropout;
        pg.seed = s;
        plain_sum += train_plain_gcn(ds, pg).metrics.accuracy;
    }
    CHECK(std::abs(dcc_sum / seeds - plain_sum / seeds) <= 0.02);
}

TEST_CASE("pseudo-label weight follows the activation schedule") {
    PseudoLabelConfig plc;
    CHECK(pseudo_alpha(100, plc) == 0.0);
    CHECK(pseudo_alpha(101, plc) == doctest::Approx(0.3));
    CHECK(pseudo_alpha(1, plc) == 0.0);
}

TEST_CASE("zero pseudo-label count reduces to the plain baseline") {
    const Dataset ds = small_dataset(8, 30, 2, 5);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 25;
    PseudoLabelConfig plc;
    plc.count = 0;
    PlainGcnConfig pg;
    pg.hidden = 8;
    pg.epochs = 30;
    pg.seed = cfg.seed;
    const Metrics augmented = pseudo_label_train(ds, cfg, plc, pg);
    const Metrics baseline = train_plain_gcn(ds, pg).metrics;
    CHECK(augmented.accuracy == baseline.accuracy);
    CHECK(augmented.loss_trace == baseline.loss_trace);
}

TEST_CASE("pseudo-label training rejects oversized counts") {
    const Dataset ds = small_dataset(9, 30, 2, 5);
    TrainConfig cfg = small_config(2);
    cfg.epochs = 25;
    PseudoLabelConfig plc;
    plc.count = 1000;
    CHECK_THROWS_AS(pseudo_label_train(ds, cfg, plc), ContractError);
}

TEST_CASE("metrics serialize with the documented keys") {
    Metrics m;
    m.accuracy = 0.5;
    m.macro_f1 = 0.4;
    m.loss_trace = {2.0, 1.0};
    m.low_conf_count = 3;
    m.low_conf_acc_after = 0.6;
    m.seed = 11;
    const TrainConfig cfg;
    const auto j = metrics_to_json(m, train_config_to_json(cfg));
    for (const char* key : {"accuracy", "macro_f1", "loss_trace", "low_conf_count",
                            "low_conf_acc_before", "low_conf_acc_after", "config", "seed"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["low_conf_acc_before"].is_null());
    CHECK(j["low_conf_acc_after"].get<double>() == doctest::Approx(0.6));
    const TrainConfig round = train_config_from_json(j["config"]);
    CHECK(round.epochs == cfg.epochs);
    CHECK(round.learning_rate == cfg.learning_rate);
    CHECK(round.influence_clamp == cfg.influence_clamp);
}

TEST_CASE("training without a split is a contract error") {
    SyntheticSpec spec;
    spec.n = 20;
    Dataset ds = generate_synthetic(spec);
    CHECK_THROWS_AS(train(ds, small_config()), ContractError);
}
