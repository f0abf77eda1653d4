// Command-line front end: train, theory, hop-sweep, synth, pseudo-label.
// Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dccgcn/theory.hpp"
#include "dccgcn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dccgcn;

namespace {

struct PresetRow {
    double lr, wd;
    int h1, h2;
    double dropout;
    int k;
    double l1, l2;
    int epochs;
};

const std::map<std::string, PresetRow>& presets() {
    static const std::map<std::string, PresetRow> table = {
        {"cora", {5e-3, 1e-5, 256, 128, 0.5, 6, 0.25, 0.5, 200}},
        {"citeseer", {1e-3, 1e-5, 768, 128, 0.5, 6, 0.25, 0.5, 200}},
        {"pubmed", {1e-3, 1e-5, 768, 256, 0.5, 3, 0.25, 0.5, 500}},
        {"corafull", {2e-4, 1e-5, 512, 128, 0.5, 10, 0.25, 0.5, 1000}},
        {"acm", {1e-4, 5e-4, 768, 256, 0.5, 9, 0.2, 0.8, 300}},
        {"flickr", {1e-4, 5e-4, 512, 128, 0.5, 5, 0.4, 0.8, 200}},
        {"uai2010", {1e-4, 5e-4, 512, 128, 0.5, 6, 0.35, 0.7, 200}},
    };
    return table;
}

void apply_preset(TrainConfig& cfg, const std::string& name) {
    const auto it = presets().find(name);
    if (it == presets().end()) {
        throw ContractError("unknown preset: " + name);
    }
    const PresetRow& row = it->second;
    cfg.learning_rate = row.lr;
    cfg.weight_decay = row.wd;
    cfg.hidden1 = row.h1;
    cfg.hidden2 = row.h2;
    cfg.dropout = row.dropout;
    cfg.knn_k = row.k;
    cfg.lambda1 = row.l1;
    cfg.lambda2 = row.l2;
    cfg.epochs = row.epochs;
}

// Options shared by the commands that load a dataset and train.
struct RunOptions {
    std::string dataset;
    std::string format = "generic";
    std::string preset;
    std::string config_path;
    std::string out_dir = "out";
    int per_class = 0;
    double label_fraction = 0.0;
    SyntheticSpec synth;  // fallback when no dataset path is given

    TrainConfig cfg;
    // flags that were explicitly passed, to keep the precedence
    // builtin < preset < config file < command line
    CLI::App* cmd = nullptr;

    json resolved_echo;
};

void add_train_flags(CLI::App* cmd, RunOptions& opt, bool single_hop_flag = true) {
    opt.cmd = cmd;
    cmd->add_option("--dataset", opt.dataset, "Dataset directory");
    cmd->add_option("--format", opt.format, "Dataset format: cora or generic")
        ->check(CLI::IsMember({"cora", "generic"}));
    cmd->add_option("--preset", opt.preset, "Named hyperparameter preset")
        ->check(CLI::IsMember(
            {"cora", "citeseer", "pubmed", "corafull", "acm", "flickr", "uai2010"}));
    cmd->add_option("--config", opt.config_path, "JSON config file");
    cmd->add_option("--out", opt.out_dir, "Output directory");
    cmd->add_option("--per-class", opt.per_class, "Labeled nodes per class");
    cmd->add_option("--label-fraction", opt.label_fraction, "Labeled fraction of nodes");

    cmd->add_option("--epochs", opt.cfg.epochs, "Training epochs");
    cmd->add_option("--lr", opt.cfg.learning_rate, "Learning rate");
    cmd->add_option("--weight-decay", opt.cfg.weight_decay, "L2 weight decay");
    cmd->add_option("--hidden1", opt.cfg.hidden1, "First hidden dimension");
    cmd->add_option("--hidden2", opt.cfg.hidden2, "Second hidden dimension");
    cmd->add_option("--dropout", opt.cfg.dropout, "Dropout rate");
    cmd->add_option("--k", opt.cfg.knn_k, "Feature-graph neighbours per node");
    cmd->add_option("--lambda1", opt.cfg.lambda1, "Smoothness loss weight");
    cmd->add_option("--lambda2", opt.cfg.lambda2, "Label loss weight");
    cmd->add_option("--phi", opt.cfg.phi, "Label loss identity blend");
    if (single_hop_flag) {
        cmd->add_option("--m", opt.cfg.calibration_hops, "Calibration neighbourhood hops");
    }
    cmd->add_option("--warmup", opt.cfg.warmup_epochs, "Epochs before partitioning starts");
    cmd->add_option("--seed", opt.cfg.seed, "Run seed");
    cmd->add_option("--eps", opt.cfg.influence_clamp, "Influence distance clamp");
    cmd->add_flag("--no-calibration", opt.cfg.no_calibration,
                  "Ablation: skip low-confidence calibration");
    cmd->add_flag("--no-aggregation", opt.cfg.no_aggregation,
                  "Ablation: drop the feature-graph channel");
    cmd->add_flag("--calibrate-normalize", opt.cfg.calibrate_normalize,
                  "Divide calibrated sums by total influence");

    cmd->add_option("--synth-n", opt.synth.n, "Synthetic node count (no --dataset)");
    cmd->add_option("--synth-c", opt.synth.c, "Synthetic class count");
    cmd->add_option("--synth-d", opt.synth.d, "Synthetic feature dimension");
    cmd->add_option("--synth-separation", opt.synth.separation, "Synthetic class separation");
    cmd->add_option("--synth-p-intra", opt.synth.p_intra, "Synthetic intra-class edge prob");
    cmd->add_option("--synth-p-inter", opt.synth.p_inter, "Synthetic inter-class edge prob");
}

/// builtin defaults <- preset <- config file <- explicit flags.
TrainConfig resolve_config(RunOptions& opt) {
    TrainConfig cfg;
    if (!opt.preset.empty()) {
        apply_preset(cfg, opt.preset);
    }
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) {
            throw ContractError("cannot open config file: " + opt.config_path);
        }
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw FormatError("config file: " + std::string(e.what()));
        }
        cfg = train_config_from_json(j, cfg);
    }
    const auto passed = [&](const std::string& flag) {
        return opt.cmd->get_option_no_throw(flag) != nullptr && opt.cmd->count(flag) > 0;
    };
    if (passed("--epochs")) cfg.epochs = opt.cfg.epochs;
    if (passed("--lr")) cfg.learning_rate = opt.cfg.learning_rate;
    if (passed("--weight-decay")) cfg.weight_decay = opt.cfg.weight_decay;
    if (passed("--hidden1")) cfg.hidden1 = opt.cfg.hidden1;
    if (passed("--hidden2")) cfg.hidden2 = opt.cfg.hidden2;
    if (passed("--dropout")) cfg.dropout = opt.cfg.dropout;
    if (passed("--k")) cfg.knn_k = opt.cfg.knn_k;
    if (passed("--lambda1")) cfg.lambda1 = opt.cfg.lambda1;
    if (passed("--lambda2")) cfg.lambda2 = opt.cfg.lambda2;
    if (passed("--phi")) cfg.phi = opt.cfg.phi;
    if (passed("--m")) cfg.calibration_hops = opt.cfg.calibration_hops;
    if (passed("--warmup")) cfg.warmup_epochs = opt.cfg.warmup_epochs;
    if (passed("--seed")) cfg.seed = opt.cfg.seed;
    if (passed("--eps")) cfg.influence_clamp = opt.cfg.influence_clamp;
    if (passed("--no-calibration")) cfg.no_calibration = true;
    if (passed("--no-aggregation")) cfg.no_aggregation = true;
    if (passed("--calibrate-normalize")) cfg.calibrate_normalize = true;
    return cfg;
}

Dataset find_cora_files(const std::string& dir) {
    std::string content, cites;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string p = entry.path().string();
        if (p.ends_with(".content")) content = p;
        if (p.ends_with(".cites")) cites = p;
    }
    if (content.empty() || cites.empty()) {
        throw FormatError("no .content/.cites pair under " + dir);
    }
    return load_cora_format(content, cites);
}

Dataset load_dataset(RunOptions& opt, const TrainConfig& cfg) {
    Dataset ds;
    if (opt.dataset.empty()) {
        opt.synth.seed = cfg.seed;
        ds = generate_synthetic(opt.synth);
    } else if (opt.format == "cora") {
        ds = find_cora_files(opt.dataset);
    } else {
        ds = load_generic(opt.dataset);
    }
    const bool explicit_split = opt.per_class > 0 || opt.label_fraction > 0.0;
    if (ds.train_mask.empty() || explicit_split) {
        if (opt.per_class > 0 && opt.label_fraction > 0.0) {
            throw ContractError("give either --per-class or --label-fraction, not both");
        }
        if (opt.label_fraction > 0.0) {
            make_split(ds, std::nullopt, opt.label_fraction, cfg.seed);
        } else {
            make_split(ds, opt.per_class > 0 ? opt.per_class : 20, std::nullopt, cfg.seed);
        }
    }
    return ds;
}

json run_echo(const RunOptions& opt, const TrainConfig& cfg) {
    json j = train_config_to_json(cfg);
    j["dataset"] = opt.dataset.empty() ? "synthetic" : opt.dataset;
    j["format"] = opt.format;
    j["preset"] = opt.preset;
    j["per_class"] = opt.per_class;
    j["label_fraction"] = opt.label_fraction;
    if (opt.dataset.empty()) {
        j["synthetic"] = {{"n", opt.synth.n},         {"c", opt.synth.c},
                          {"d", opt.synth.d},         {"separation", opt.synth.separation},
                          {"p_intra", opt.synth.p_intra}, {"p_inter", opt.synth.p_inter}};
    }
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw ContractError("cannot write " + path.string());
    }
    out << text;
}

void write_config_echo(const fs::path& dir, const json& echo) {
    write_text(dir / "config.json", echo.dump(2) + "\n");
}

void write_embeddings_csv(const fs::path& path, const Tensor& z) {
    std::ofstream out(path);
    out << "node_id";
    for (int j = 0; j < z.cols(); ++j) out << ",e" << j;
    out << '\n';
    out.precision(12);
    for (int i = 0; i < z.rows(); ++i) {
        out << i;
        for (int j = 0; j < z.cols(); ++j) out << ',' << z.at(i, j);
        out << '\n';
    }
}

void write_model_bin(const fs::path& path, const DccGcnModel& model) {
    std::ofstream out(path, std::ios::binary);
    const char magic[8] = {'D', 'C', 'C', 'G', 'C', 'N', '0', '1'};
    out.write(magic, sizeof(magic));
    const auto named = model.named_parameters();
    const auto write_u32 = [&out](std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    write_u32(static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, tensor] : named) {
        write_u32(static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(static_cast<std::uint32_t>(tensor.rows()));
        write_u32(static_cast<std::uint32_t>(tensor.cols()));
        out.write(reinterpret_cast<const char*>(tensor.values().data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
}

int cmd_train(RunOptions& opt) {
    const TrainConfig cfg = resolve_config(opt);
    const Dataset ds = load_dataset(opt, cfg);
    const json echo = run_echo(opt, cfg);

    const TrainOutcome outcome = train(ds, cfg);
    fs::create_directories(opt.out_dir);
    write_config_echo(opt.out_dir, echo);
    write_text(fs::path(opt.out_dir) / "metrics.json",
               metrics_to_json(outcome.metrics, echo).dump(2) + "\n");
    write_embeddings_csv(fs::path(opt.out_dir) / "embeddings.csv", outcome.final_embedding);
    write_model_bin(fs::path(opt.out_dir) / "model.bin", outcome.model);
    std::cout << "accuracy " << outcome.metrics.accuracy << " macro_f1 "
              << outcome.metrics.macro_f1 << " low_conf " << outcome.metrics.low_conf_count
              << '\n';
    return 0;
}

int cmd_pseudo_label(RunOptions& opt, PseudoLabelConfig& plc, PlainGcnConfig& student) {
    const TrainConfig cfg = resolve_config(opt);
    const Dataset ds = load_dataset(opt, cfg);
    json echo = run_echo(opt, cfg);
    echo["pseudo_count"] = plc.count;
    echo["pseudo_alpha"] = plc.alpha;
    echo["pseudo_activation_epoch"] = plc.activation_epoch;
    echo["student_hidden"] = student.hidden;
    echo["student_epochs"] = student.epochs;

    const Metrics baseline = train_plain_gcn(ds, student).metrics;
    const Metrics augmented = pseudo_label_train(ds, cfg, plc, student);
    fs::create_directories(opt.out_dir);
    write_config_echo(opt.out_dir, echo);
    json j;
    j["baseline"] = metrics_to_json(baseline, echo);
    j["augmented"] = metrics_to_json(augmented, echo);
    write_text(fs::path(opt.out_dir) / "metrics.json", j.dump(2) + "\n");
    std::cout << "baseline " << baseline.accuracy << " augmented " << augmented.accuracy
              << '\n';
    return 0;
}

int cmd_hop_sweep(RunOptions& opt, std::vector<int>& hops, int seed_count) {
    const TrainConfig base = resolve_config(opt);
    if (hops.empty()) {
        hops = {1, 2, 3, 4};
    }
    fs::create_directories(opt.out_dir);
    json echo = run_echo(opt, base);
    echo["hops"] = hops;
    echo["seed_count"] = seed_count;
    write_config_echo(opt.out_dir, echo);

    std::ofstream csv(fs::path(opt.out_dir) / "hops.csv");
    csv << "m,seed,accuracy\n";
    csv.precision(10);
    for (const int m : hops) {
        for (int s = 0; s < seed_count; ++s) {
            TrainConfig cfg = base;
            cfg.calibration_hops = m;
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            RunOptions local = opt;
            const Dataset ds = load_dataset(local, cfg);
            const TrainOutcome outcome = train(ds, cfg);
            csv << m << ',' << cfg.seed << ',' << outcome.metrics.accuracy << '\n';
            csv.flush();
        }
    }
    return 0;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
    const Dataset ds = generate_synthetic(spec);
    save_generic(ds, out_dir);
    json echo = {{"n", spec.n},
                 {"c", spec.c},
                 {"d", spec.d},
                 {"separation", spec.separation},
                 {"p_intra", spec.p_intra},
                 {"p_inter", spec.p_inter},
                 {"seed", spec.seed}};
    write_config_echo(out_dir, echo);
    std::cout << "wrote " << out_dir << " (" << ds.n() << " nodes, "
              << ds.graph.num_edges() / 2 << " undirected edges)\n";
    return 0;
}

struct BoundArgs {
    double p1 = 0.0, p2 = 0.0, gamma = 0.0;
    int c = 7;
    std::string kind = "theorem1";
};

int cmd_theory_bound(const BoundArgs& args) {
    double value = 0.0;
    if (args.kind == "theorem1") {
        value = theorem1_bound(args.p1, args.p2);
    } else if (args.kind == "lowconf") {
        value = lowconf_accuracy_exact(args.p1, args.p2, args.c, args.gamma);
    } else if (args.kind == "agreement") {
        value = agreement_fraction(args.p1, args.p2, args.c, args.gamma);
    } else if (args.kind == "theorem2") {
        value = theorem2_bound(args.p1, args.p2, args.c, args.gamma);
    } else {
        value = effective_gain_bound(args.p1, args.p2, args.c, args.gamma);
    }
    std::printf("%.10g\n", value);
    return 0;
}

int cmd_theory_simulate(const SimSpec& spec, const std::string& out_dir) {
    const SimResult r = simulate(spec);
    json j = {{"n", r.n},
              {"n_r", r.n_r},
              {"n_w", r.n_w},
              {"n_a", r.n_a},
              {"disagreements", r.disagreements},
              {"agreement", r.agreement},
              {"p_lowconf", r.p_lowconf},
              {"p_lowconf_raw", r.p_lowconf_raw},
              {"gamma_hat", r.gamma_hat},
              {"spec",
               {{"n", spec.n},
                {"c", spec.c},
                {"p1", spec.p1},
                {"p2", spec.p2},
                {"rho", spec.rho},
                {"seed", spec.seed}}}};
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "sim.json", j.dump(2) + "\n");
    std::cout << "agreement " << r.agreement << " p_lowconf " << r.p_lowconf
              << " gamma_hat " << r.gamma_hat << '\n';
    return 0;
}

int cmd_theory_sweep(const std::vector<int>& c_list, double step, double gamma,
                     const std::string& out_dir) {
    const auto points = sweep_gain_surface(c_list, step, gamma);
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "surface.csv");
    write_surface_csv(csv, points);
    json echo = {{"c_list", c_list}, {"step", step}, {"gamma", gamma}};
    write_config_echo(out_dir, echo);
    std::cout << "wrote " << (fs::path(out_dir) / "surface.csv").string() << " ("
              << points.size() << " points)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-channel consistency GCN toolkit"};
    app.require_subcommand(1);

    RunOptions train_opt;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the dual-channel model");
    add_train_flags(train_cmd, train_opt);

    RunOptions pseudo_opt;
    PseudoLabelConfig plc;
    PlainGcnConfig student;
    CLI::App* pseudo_cmd =
        app.add_subcommand("pseudo-label", "Augment a plain GCN with pseudo-labels");
    add_train_flags(pseudo_cmd, pseudo_opt);
    pseudo_cmd->add_option("--count", plc.count, "Pseudo-labeled node count");
    pseudo_cmd->add_option("--alpha", plc.alpha, "Pseudo-label loss weight");
    pseudo_cmd->add_option("--activation-epoch", plc.activation_epoch,
                           "Epoch after which alpha applies");
    pseudo_cmd->add_option("--student-hidden", student.hidden, "Student hidden width");
    pseudo_cmd->add_option("--student-epochs", student.epochs, "Student epochs");
    pseudo_cmd->add_option("--student-lr", student.learning_rate, "Student learning rate");

    RunOptions hop_opt;
    std::vector<int> hops;
    int seed_count = 5;
    CLI::App* hop_cmd = app.add_subcommand("hop-sweep", "Accuracy per calibration hop count");
    add_train_flags(hop_cmd, hop_opt, /*single_hop_flag=*/false);
    hop_cmd->add_option("--m", hops, "Hop counts to sweep")->delimiter(',');
    hop_cmd->add_option("--seeds", seed_count, "Seeds per hop count");

    SyntheticSpec synth_spec;
    std::string synth_out = "data/synthetic";
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_cmd->add_option("--n", synth_spec.n, "Node count");
    synth_cmd->add_option("--c", synth_spec.c, "Class count");
    synth_cmd->add_option("--d", synth_spec.d, "Feature dimension");
    synth_cmd->add_option("--separation", synth_spec.separation, "Class mean separation");
    synth_cmd->add_option("--p-intra", synth_spec.p_intra, "Intra-class edge probability");
    synth_cmd->add_option("--p-inter", synth_spec.p_inter, "Inter-class edge probability");
    synth_cmd->add_option("--seed", synth_spec.seed, "Generator seed");
    synth_cmd->add_option("--out", synth_out, "Output directory");

    CLI::App* theory_cmd = app.add_subcommand("theory", "Bound evaluation and simulation");
    theory_cmd->require_subcommand(1);

    BoundArgs bound_args;
    CLI::App* bound_cmd = theory_cmd->add_subcommand("bound", "Print one bound value");
    bound_cmd->add_option("--p1", bound_args.p1, "Channel 1 accuracy")->required();
    bound_cmd->add_option("--p2", bound_args.p2, "Channel 2 accuracy")->required();
    bound_cmd->add_option("--c", bound_args.c, "Class count");
    bound_cmd->add_option("--gamma", bound_args.gamma, "Excess agreement");
    bound_cmd->add_option("--kind", bound_args.kind, "Bound to evaluate")
        ->check(CLI::IsMember({"theorem1", "lowconf", "agreement", "theorem2",
                               "effective-gain"}));

    SimSpec sim_spec;
    std::string sim_out = "out";
    CLI::App* sim_cmd = theory_cmd->add_subcommand("simulate", "Monte Carlo channel pair");
    sim_cmd->add_option("--n", sim_spec.n, "Sample count");
    sim_cmd->add_option("--c", sim_spec.c, "Class count");
    sim_cmd->add_option("--p1", sim_spec.p1, "Channel 1 accuracy");
    sim_cmd->add_option("--p2", sim_spec.p2, "Channel 2 accuracy");
    sim_cmd->add_option("--rho", sim_spec.rho, "Correctness coupling in [0,1]");
    sim_cmd->add_option("--seed", sim_spec.seed, "Simulation seed");
    sim_cmd->add_option("--out", sim_out, "Output directory");

    std::vector<int> sweep_c = {3, 7, 70};
    double sweep_step = 0.02;
    double sweep_gamma = 0.0;
    std::string sweep_out = "out";
    CLI::App* sweep_cmd = theory_cmd->add_subcommand("sweep", "Gain-bound surface CSV");
    sweep_cmd->add_option("--c", sweep_c, "Class counts")->delimiter(',');
    sweep_cmd->add_option("--step", sweep_step, "Grid step");
    sweep_cmd->add_option("--gamma", sweep_gamma, "Excess agreement");
    sweep_cmd->add_option("--out", sweep_out, "Output directory");

    try {
        app.parse(argc, argv);
        if (*train_cmd) return cmd_train(train_opt);
        if (*pseudo_cmd) return cmd_pseudo_label(pseudo_opt, plc, student);
        if (*hop_cmd) return cmd_hop_sweep(hop_opt, hops, seed_count);
        if (*synth_cmd) return cmd_synth(synth_spec, synth_out);
        if (*bound_cmd) return cmd_theory_bound(bound_args);
        if (*sim_cmd) return cmd_theory_simulate(sim_spec, sim_out);
        if (*sweep_cmd) return cmd_theory_sweep(sweep_c, sweep_step, sweep_gamma, sweep_out);
        std::cerr << "no command selected\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
