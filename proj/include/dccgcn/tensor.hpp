#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dccgcn/errors.hpp"
#include "dccgcn/random.hpp"
#include "dccgcn/sparse.hpp"

namespace dccgcn {

struct TensorData {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major, rows*cols entries
    std::vector<double> grad;    // empty until first needed, then same shape
    bool requires_grad = false;
    int node_id = -1;            // assigned when the tensor joins a tape
};

/// Dense 2-D tensor handle with shared storage. Copies are views of the
/// same buffer; ops never mutate their inputs.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols, double fill = 0.0);

    static Tensor from_values(int rows, int cols, std::vector<double> values);
    /// m x 1 column vector.
    static Tensor column(std::vector<double> values);
    static Tensor scalar(double value);

    bool defined() const { return d_ != nullptr; }
    int rows() const { return d_->rows; }
    int cols() const { return d_->cols; }
    std::size_t size() const { return d_->values.size(); }

    double at(int r, int c) const { return d_->values[static_cast<std::size_t>(r) * d_->cols + c]; }
    double& at(int r, int c) { return d_->values[static_cast<std::size_t>(r) * d_->cols + c]; }
    double item() const;  // value of a 1x1 tensor

    std::vector<double>& values() { return d_->values; }
    const std::vector<double>& values() const { return d_->values; }

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool on = true);

    bool has_grad() const { return !d_->grad.empty(); }
    std::vector<double>& grad();              // throws ContractError when absent
    const std::vector<double>& grad() const;
    void ensure_grad();                       // allocate zero grad if absent
    void zero_grad();

    int node_id() const { return d_->node_id; }

    std::shared_ptr<TensorData> impl() const { return d_; }

private:
    std::shared_ptr<TensorData> d_;
};

/// Records each differentiable op in execution order; execution order is a
/// topological order by construction. backward() replays the records in
/// exact reverse order and then clears the tape.
class Tape {
public:
    struct Entry {
        std::vector<int> input_ids;
        int output_id = -1;
    };

    /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    /// recorded tensor with requires_grad. loss must be 1x1.
    void backward(const Tensor& loss);

    void clear() { records_.clear(); }
    std::size_t num_records() const { return records_.size(); }
    std::vector<Entry> entries() const;

    /// Used by op implementations.
    void record(const char* op, std::vector<Tensor> inputs, const Tensor& output,
                std::function<void()> backward_fn);

private:
    struct Record {
        const char* op;
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void()> backward_fn;
    };
    int ensure_id(const Tensor& t);
    std::vector<Record> records_;
    int next_id_ = 0;
};

// ---- forward op set -------------------------------------------------------
// Each op validates shapes, checks its output for non-finite values, and
// records a backward rule on the tape when any input requires grad.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// out[r] = sum_e w[e] * dense[indices[e]] over row r of the CSR structure.
/// w is nnz x 1 and may require grad (per-edge weights), dense likewise.
Tensor spmm(Tape& tape, const CsrView& m, const Tensor& edge_weights, const Tensor& dense);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double s);
/// x: n x c, bias: 1 x c added to every row.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);
Tensor relu(Tape& tape, const Tensor& x);
/// Numerically stable softmax per row; output rows sum to 1.
Tensor row_softmax(Tape& tape, const Tensor& x);
Tensor log_elem(Tape& tape, const Tensor& x);
Tensor exp_elem(Tape& tape, const Tensor& x);
Tensor reciprocal(Tape& tape, const Tensor& x);
/// max(x, floor) with zero gradient in the clamped region.
Tensor clamp_min(Tape& tape, const Tensor& x, double floor);
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const int> idx);
/// Inverted dropout: scales kept entries by 1/(1-p) at train time,
/// identity at eval or p == 0.
Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool train);
/// n x c -> n x 1 row sums.
Tensor row_sum(Tape& tape, const Tensor& x);
/// x: n x c scaled per row by col: n x 1.
Tensor scale_rows(Tape& tape, const Tensor& x, const Tensor& col);
Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

/// Per-row argmax, ties broken by lowest column index.
std::vector<int> row_argmax(const Tensor& x);

/// Entries uniform in +-sqrt(6/(rows+cols)).
Tensor xavier_init(int rows, int cols, Rng& rng);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

/// Bias-corrected Adam with weight decay added to the gradient (L2 style)
/// before the moment update. One moment pair per registered parameter.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, const AdamConfig& cfg);

    /// Applies one update from the current grads; every parameter must
    /// have a populated grad buffer.
    void step();
    void zero_grad();
    std::int64_t step_count() const { return step_count_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    std::int64_t step_count_ = 0;
};

}  // namespace dccgcn
