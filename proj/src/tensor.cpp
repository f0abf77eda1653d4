#include "dccgcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef DCCGCN_PROFILE_BACKWARD
#include <chrono>
#endif

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dccgcn {

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
    const std::int64_t n = static_cast<std::int64_t>(v.size());
    std::int64_t bad = 0;
#pragma omp parallel for schedule(static) reduction(+ : bad) if (n > (1 << 15))
    for (std::int64_t i = 0; i < n; ++i) {
        bad += !std::isfinite(v[i]);
    }
    if (bad > 0) {
        throw NumericError(std::string(op) + ": non-finite value produced");
    }
}

// loops below this size are not worth a parallel region
constexpr std::int64_t kParallelCutoff = 1 << 15;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shape mismatch (" +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
    }
}

// C[i,j] += sum_k A[i,k] * B[k,j]; row-partitioned, each output row is
// produced by exactly one thread in fixed k order, so results do not
// depend on the thread count.
void matmul_nn_acc(double* c, const double* a, const double* b, int n, int k, int m) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ci = c + static_cast<std::size_t>(i) * m;
        const double* ai = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) {
                ci[j] += av * bp[j];
            }
        }
    }
}

// C[i,j] += sum_k A[i,k] * B[j,k]  (B used transposed). B is transposed
// into a scratch buffer so the inner loop is a vectorizable broadcast
// accumulate rather than a dot-product reduction.
void matmul_nt_acc(double* c, const double* a, const double* b, int n, int k, int m) {
    std::vector<double> bt(static_cast<std::size_t>(k) * m);
    for (int j = 0; j < m; ++j) {
        for (int p = 0; p < k; ++p) {
            bt[static_cast<std::size_t>(p) * m + j] = b[static_cast<std::size_t>(j) * k + p];
        }
    }
    matmul_nn_acc(c, a, bt.data(), n, k, m);
}

// C[p,j] += sum_i A[i,p] * B[i,j]  (A used transposed). Threads own
// disjoint column blocks of C; every element is accumulated in the same
// i order regardless of the thread count.
void matmul_tn_acc(double* c, const double* a, const double* b, int n, int k, int m) {
#pragma omp parallel
    {
        int j0 = 0, j1 = m;
#ifdef _OPENMP
        const int threads = omp_get_num_threads();
        const int tid = omp_get_thread_num();
        j0 = static_cast<int>((static_cast<long>(m) * tid) / threads);
        j1 = static_cast<int>((static_cast<long>(m) * (tid + 1)) / threads);
#endif
        for (int i = 0; i < n; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * k;
            const double* bi = b + static_cast<std::size_t>(i) * m;
            for (int p = 0; p < k; ++p) {
                const double av = ai[p];
                if (av == 0.0) continue;
                double* cp = c + static_cast<std::size_t>(p) * m;
                for (int j = j0; j < j1; ++j) {
                    cp[j] += av * bi[j];
                }
            }
        }
    }
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(int rows, int cols, double fill) : d_(std::make_shared<TensorData>()) {
    if (rows < 0 || cols < 0) {
        throw ContractError("Tensor: negative dimension");
    }
    d_->rows = rows;
    d_->cols = cols;
    d_->values.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> values) {
    if (values.size() != static_cast<std::size_t>(rows) * cols) {
        throw DimensionError("Tensor::from_values: " + std::to_string(values.size()) +
                             " values for " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
    Tensor t(rows, cols);
    t.d_->values = std::move(values);
    return t;
}

Tensor Tensor::column(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return from_values(n, 1, std::move(values));
}

Tensor Tensor::scalar(double value) {
    return from_values(1, 1, {value});
}

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("Tensor::item: tensor is not 1x1");
    }
    return d_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    d_->requires_grad = on;
    return *this;
}

std::vector<double>& Tensor::grad() {
    if (d_->grad.empty()) {
        throw ContractError("Tensor::grad: gradient buffer not populated");
    }
    return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (d_->grad.empty()) {
        throw ContractError("Tensor::grad: gradient buffer not populated");
    }
    return d_->grad;
}

void Tensor::ensure_grad() {
    if (d_->grad.empty()) {
        d_->grad.assign(d_->values.size(), 0.0);
    }
}

void Tensor::zero_grad() {
    if (!d_->grad.empty()) {
        std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
    }
}

// ---- Tape ------------------------------------------------------------------

int Tape::ensure_id(const Tensor& t) {
    if (t.impl()->node_id < 0) {
        t.impl()->node_id = next_id_++;
    }
    return t.impl()->node_id;
}

void Tape::record(const char* op, std::vector<Tensor> inputs, const Tensor& output,
                  std::function<void()> backward_fn) {
    for (const Tensor& in : inputs) {
        ensure_id(in);
    }
    output.impl()->node_id = next_id_++;
    records_.push_back({op, std::move(inputs), output, std::move(backward_fn)});
}

std::vector<Tape::Entry> Tape::entries() const {
    std::vector<Entry> out;
    out.reserve(records_.size());
    for (const Record& r : records_) {
        Entry e;
        for (const Tensor& in : r.inputs) {
            e.input_ids.push_back(in.node_id());
        }
        e.output_id = r.output.node_id();
        out.push_back(std::move(e));
    }
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("Tape::backward: loss must be a 1x1 tensor");
    }
    if (records_.empty()) {
        throw ContractError("Tape::backward: tape is empty");
    }
    loss.impl()->grad.assign(1, 1.0);
#ifdef DCCGCN_PROFILE_BACKWARD
    extern void profile_backward_note(const char*, double);
    struct Timer {
        const char* op;
        std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
        ~Timer() {
            profile_backward_note(op, std::chrono::duration<double>(
                                          std::chrono::steady_clock::now() - start)
                                          .count());
        }
    };
#endif
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (it->output.impl()->grad.empty()) {
            continue;  // branch never reached the loss
        }
#ifdef DCCGCN_PROFILE_BACKWARD
        Timer timer{it->op};
#endif
        it->backward_fn();
        for (const Tensor& in : it->inputs) {
            if (in.requires_grad() && !in.impl()->grad.empty()) {
                for (double g : in.impl()->grad) {
                    if (!std::isfinite(g)) {
                        throw NumericError(std::string(it->op) +
                                           ": non-finite gradient in backward");
                    }
                }
            }
        }
    }
    // Contract: every recorded tensor with requires_grad ends up with a
    // grad buffer, even when its branch was unreachable.
    for (Record& r : records_) {
        for (Tensor& in : r.inputs) {
            if (in.requires_grad()) in.ensure_grad();
        }
        if (r.output.requires_grad()) r.output.ensure_grad();
    }
    clear();
}

// ---- op helpers ------------------------------------------------------------

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts) {
        if ((*t).requires_grad()) return true;
    }
    return false;
}

Tensor make_output(int rows, int cols, bool requires_grad) {
    Tensor t(rows, cols);
    t.set_requires_grad(requires_grad);
    return t;
}

}  // namespace

// ---- ops -------------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ (" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    }
    const int n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out = make_output(n, m, any_requires_grad({&a, &b}));
    matmul_nn_acc(out.values().data(), a.values().data(), b.values().data(), n, k, m);
    check_finite("matmul", out.values());
    if (out.requires_grad()) {
        tape.record("matmul", {a, b}, out, [a, b, out, n, k, m]() {
            const std::vector<double>& go = out.impl()->grad;
            if (a.requires_grad()) {
                Tensor at = a;
                at.ensure_grad();
                matmul_nt_acc(at.impl()->grad.data(), go.data(), b.values().data(), n, m, k);
            }
            if (b.requires_grad()) {
                Tensor bt = b;
                bt.ensure_grad();
                matmul_tn_acc(bt.impl()->grad.data(), a.values().data(), go.data(), n, k, m);
            }
        });
    }
    return out;
}

Tensor spmm(Tape& tape, const CsrView& m, const Tensor& edge_weights, const Tensor& dense) {
    const int nnz = static_cast<int>(m.indices.size());
    if (edge_weights.rows() != nnz || edge_weights.cols() != 1) {
        throw DimensionError("spmm: edge weight vector must be nnz x 1");
    }
    if (dense.rows() != m.cols) {
        throw DimensionError("spmm: dense rows (" + std::to_string(dense.rows()) +
                             ") do not match sparse cols (" + std::to_string(m.cols) + ")");
    }
    const int f = dense.cols();
    Tensor out = make_output(m.rows, f, any_requires_grad({&edge_weights, &dense}));
    {
        double* o = out.values().data();
        const double* w = edge_weights.values().data();
        const double* x = dense.values().data();
#pragma omp parallel for schedule(static) if (m.rows > 256)
        for (int r = 0; r < m.rows; ++r) {
            double* orow = o + static_cast<std::size_t>(r) * f;
            for (int p = m.indptr[r]; p < m.indptr[r + 1]; ++p) {
                const double we = w[p];
                if (we == 0.0) continue;
                const double* xrow = x + static_cast<std::size_t>(m.indices[p]) * f;
                for (int j = 0; j < f; ++j) {
                    orow[j] += we * xrow[j];
                }
            }
        }
    }
    check_finite("spmm", out.values());
    if (out.requires_grad()) {
        // Copy the view's structure; spans may not outlive the caller.
        std::vector<int> indptr(m.indptr.begin(), m.indptr.end());
        std::vector<int> indices(m.indices.begin(), m.indices.end());
        const int rows = m.rows;
        tape.record("spmm", {edge_weights, dense}, out,
                    [edge_weights, dense, out, rows, f,
                     indptr = std::move(indptr), indices = std::move(indices)]() {
            const double* go = out.impl()->grad.data();
            if (dense.requires_grad()) {
                Tensor dt = dense;
                dt.ensure_grad();
                double* gx = dt.impl()->grad.data();
                const double* w = edge_weights.values().data();
                // scatter target rows collide, so threads own column
                // slices instead; per-element accumulation order is the
                // edge order at any thread count
#pragma omp parallel
                {
                    int j0 = 0, j1 = f;
#ifdef _OPENMP
                    const int threads = omp_get_num_threads();
                    const int tid = omp_get_thread_num();
                    j0 = static_cast<int>((static_cast<long>(f) * tid) / threads);
                    j1 = static_cast<int>((static_cast<long>(f) * (tid + 1)) / threads);
#endif
                    for (int r = 0; r < rows; ++r) {
                        const double* grow = go + static_cast<std::size_t>(r) * f;
                        for (int p = indptr[r]; p < indptr[r + 1]; ++p) {
                            const double we = w[p];
                            if (we == 0.0) continue;
                            double* gxrow = gx + static_cast<std::size_t>(indices[p]) * f;
                            for (int j = j0; j < j1; ++j) {
                                gxrow[j] += we * grow[j];
                            }
                        }
                    }
                }
            }
            if (edge_weights.requires_grad()) {
                Tensor wt = edge_weights;
                wt.ensure_grad();
                double* gw = wt.impl()->grad.data();
                const double* x = dense.values().data();
#pragma omp parallel for schedule(static) if (rows > 256)
                for (int r = 0; r < rows; ++r) {
                    const double* grow = go + static_cast<std::size_t>(r) * f;
                    for (int p = indptr[r]; p < indptr[r + 1]; ++p) {
                        const double* xrow = x + static_cast<std::size_t>(indices[p]) * f;
                        double acc = 0.0;
                        for (int j = 0; j < f; ++j) {
                            acc += grow[j] * xrow[j];
                        }
                        gw[p] += acc;
                    }
                }
            }
        });
    }
    return out;
}

namespace {

Tensor elementwise_binary(Tape& tape, const char* name, const Tensor& a, const Tensor& b,
                          double bsign) {
    require_same_shape(name, a, b);
    Tensor out = make_output(a.rows(), a.cols(), any_requires_grad({&a, &b}));
    const std::int64_t sz = static_cast<std::int64_t>(out.size());
    double* ov = out.values().data();
    const double* av = a.values().data();
    const double* bv = b.values().data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
    for (std::int64_t i = 0; i < sz; ++i) {
        ov[i] = av[i] + bsign * bv[i];
    }
    check_finite(name, out.values());
    if (out.requires_grad()) {
        tape.record(name, {a, b}, out, [a, b, out, bsign]() {
            const std::vector<double>& go = out.impl()->grad;
            const std::int64_t sz = static_cast<std::int64_t>(go.size());
            if (a.requires_grad()) {
                Tensor at = a;
                at.ensure_grad();
                double* g = at.impl()->grad.data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
                for (std::int64_t i = 0; i < sz; ++i) g[i] += go[i];
            }
            if (b.requires_grad()) {
                Tensor bt = b;
                bt.ensure_grad();
                double* g = bt.impl()->grad.data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
                for (std::int64_t i = 0; i < sz; ++i) g[i] += bsign * go[i];
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    return elementwise_binary(tape, "add", a, b, 1.0);
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    return elementwise_binary(tape, "sub", a, b, -1.0);
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = make_output(a.rows(), a.cols(), any_requires_grad({&a, &b}));
    const std::int64_t sz = static_cast<std::int64_t>(out.size());
    double* ov = out.values().data();
    const double* av = a.values().data();
    const double* bv = b.values().data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
    for (std::int64_t i = 0; i < sz; ++i) {
        ov[i] = av[i] * bv[i];
    }
    check_finite("mul", out.values());
    if (out.requires_grad()) {
        tape.record("mul", {a, b}, out, [a, b, out]() {
            const std::vector<double>& go = out.impl()->grad;
            const std::int64_t sz = static_cast<std::int64_t>(go.size());
            if (a.requires_grad()) {
                Tensor at = a;
                at.ensure_grad();
                double* g = at.impl()->grad.data();
                const double* bv = b.values().data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
                for (std::int64_t i = 0; i < sz; ++i) {
                    g[i] += go[i] * bv[i];
                }
            }
            if (b.requires_grad()) {
                Tensor bt = b;
                bt.ensure_grad();
                double* g = bt.impl()->grad.data();
                const double* av = a.values().data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
                for (std::int64_t i = 0; i < sz; ++i) {
                    g[i] += go[i] * av[i];
                }
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& x, double s) {
    Tensor out = make_output(x.rows(), x.cols(), x.requires_grad());
    {
        double* ov = out.values().data();
        const double* xv = x.values().data();
        const std::int64_t sz = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
        for (std::int64_t i = 0; i < sz; ++i) {
            ov[i] = s * xv[i];
        }
    }
    check_finite("scale", out.values());
    if (out.requires_grad()) {
        tape.record("scale", {x}, out, [x, out, s]() {
            Tensor xt = x;
            xt.ensure_grad();
            const std::vector<double>& go = out.impl()->grad;
            double* g = xt.impl()->grad.data();
            const std::int64_t sz = static_cast<std::int64_t>(go.size());
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
            for (std::int64_t i = 0; i < sz; ++i) g[i] += s * go[i];
        });
    }
    return out;
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw DimensionError("add_bias: bias must be 1 x cols(x)");
    }
    const int n = x.rows(), c = x.cols();
    Tensor out = make_output(n, c, any_requires_grad({&x, &bias}));
    {
        double* ov = out.values().data();
        const double* xv = x.values().data();
        const double* bv = bias.values().data();
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * c > kParallelCutoff)
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < c; ++j) {
                ov[static_cast<std::size_t>(i) * c + j] = xv[static_cast<std::size_t>(i) * c + j] + bv[j];
            }
        }
    }
    check_finite("add_bias", out.values());
    if (out.requires_grad()) {
        tape.record("add_bias", {x, bias}, out, [x, bias, out, n, c]() {
            const std::vector<double>& go = out.impl()->grad;
            if (x.requires_grad()) {
                Tensor xt = x;
                xt.ensure_grad();
                double* g = xt.impl()->grad.data();
                const std::int64_t sz = static_cast<std::int64_t>(go.size());
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
                for (std::int64_t i = 0; i < sz; ++i) g[i] += go[i];
            }
            if (bias.requires_grad()) {
                Tensor bt = bias;
                bt.ensure_grad();
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < c; ++j) {
                        bt.impl()->grad[j] += go[static_cast<std::size_t>(i) * c + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out = make_output(x.rows(), x.cols(), x.requires_grad());
    const std::int64_t sz = static_cast<std::int64_t>(out.size());
    double* ov = out.values().data();
    const double* xv = x.values().data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
    for (std::int64_t i = 0; i < sz; ++i) {
        ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    }
    check_finite("relu", out.values());
    if (out.requires_grad()) {
        tape.record("relu", {x}, out, [x, out]() {
            Tensor xt = x;
            xt.ensure_grad();
            const std::vector<double>& go = out.impl()->grad;
            const std::int64_t sz = static_cast<std::int64_t>(go.size());
            double* g = xt.impl()->grad.data();
            const double* xv = x.values().data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
            for (std::int64_t i = 0; i < sz; ++i) {
                if (xv[i] > 0.0) g[i] += go[i];
            }
        });
    }
    return out;
}

Tensor row_softmax(Tape& tape, const Tensor& x) {
    const int n = x.rows(), c = x.cols();
    if (c < 1) {
        throw DimensionError("row_softmax: empty rows");
    }
    Tensor out = make_output(n, c, x.requires_grad());
    for (int i = 0; i < n; ++i) {
        double mx = x.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, x.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < c; ++j) out.at(i, j) /= denom;
    }
    check_finite("row_softmax", out.values());
    if (out.requires_grad()) {
        tape.record("row_softmax", {x}, out, [x, out, n, c]() {
            Tensor xt = x;
            xt.ensure_grad();
            const std::vector<double>& go = out.impl()->grad;
            for (int i = 0; i < n; ++i) {
                const std::size_t base = static_cast<std::size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) {
                    dot += go[base + j] * out.values()[base + j];
                }
                for (int j = 0; j < c; ++j) {
                    xt.impl()->grad[base + j] +=
                        out.values()[base + j] * (go[base + j] - dot);
                }
            }
        });
    }
    return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(Tape& tape, const char* name, const Tensor& x, Fwd fwd, Bwd dfdx) {
    Tensor out = make_output(x.rows(), x.cols(), x.requires_grad());
    {
        double* ov = out.values().data();
        const double* xv = x.values().data();
        const std::int64_t sz = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
        for (std::int64_t i = 0; i < sz; ++i) {
            ov[i] = fwd(xv[i]);
        }
    }
    check_finite(name, out.values());
    if (out.requires_grad()) {
        tape.record(name, {x}, out, [x, out, dfdx]() {
            Tensor xt = x;
            xt.ensure_grad();
            const std::vector<double>& go = out.impl()->grad;
            double* g = xt.impl()->grad.data();
            const double* xv = x.values().data();
            const double* ov = out.values().data();
            const std::int64_t sz = static_cast<std::int64_t>(go.size());
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
            for (std::int64_t i = 0; i < sz; ++i) {
                g[i] += go[i] * dfdx(xv[i], ov[i]);
            }
        });
    }
    return out;
}

}  // namespace

Tensor log_elem(Tape& tape, const Tensor& x) {
    return elementwise_unary(tape, "log", x,
                             [](double v) { return std::log(v); },
                             [](double v, double) { return 1.0 / v; });
}

Tensor exp_elem(Tape& tape, const Tensor& x) {
    return elementwise_unary(tape, "exp", x,
                             [](double v) { return std::exp(v); },
                             [](double, double y) { return y; });
}

Tensor reciprocal(Tape& tape, const Tensor& x) {
    return elementwise_unary(tape, "reciprocal", x,
                             [](double v) { return 1.0 / v; },
                             [](double, double y) { return -y * y; });
}

Tensor clamp_min(Tape& tape, const Tensor& x, double floor) {
    return elementwise_unary(tape, "clamp_min", x,
                             [floor](double v) { return v > floor ? v : floor; },
                             [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("concat_cols: row counts differ");
    }
    const int n = a.rows(), ca = a.cols(), cb = b.cols();
    Tensor out = make_output(n, ca + cb, any_requires_grad({&a, &b}));
    {
        double* ov = out.values().data();
        const double* av = a.values().data();
        const double* bv = b.values().data();
        const int cw = ca + cb;
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * cw > kParallelCutoff)
        for (int i = 0; i < n; ++i) {
            double* orow = ov + static_cast<std::size_t>(i) * cw;
            const double* arow = av + static_cast<std::size_t>(i) * ca;
            const double* brow = bv + static_cast<std::size_t>(i) * cb;
            for (int j = 0; j < ca; ++j) orow[j] = arow[j];
            for (int j = 0; j < cb; ++j) orow[ca + j] = brow[j];
        }
    }
    check_finite("concat_cols", out.values());
    if (out.requires_grad()) {
        tape.record("concat_cols", {a, b}, out, [a, b, out, n, ca, cb]() {
            const std::vector<double>& go = out.impl()->grad;
            const int cw = ca + cb;
            if (a.requires_grad()) {
                Tensor at = a;
                at.ensure_grad();
                double* g = at.impl()->grad.data();
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * ca > kParallelCutoff)
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < ca; ++j) {
                        g[static_cast<std::size_t>(i) * ca + j] +=
                            go[static_cast<std::size_t>(i) * cw + j];
                    }
                }
            }
            if (b.requires_grad()) {
                Tensor bt = b;
                bt.ensure_grad();
                double* g = bt.impl()->grad.data();
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * cb > kParallelCutoff)
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < cb; ++j) {
                        g[static_cast<std::size_t>(i) * cb + j] +=
                            go[static_cast<std::size_t>(i) * cw + ca + j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const int> idx) {
    const int n = x.rows(), c = x.cols();
    for (int i : idx) {
        if (i < 0 || i >= n) {
            throw ContractError("gather_rows: row index out of range");
        }
    }
    const int m = static_cast<int>(idx.size());
    Tensor out = make_output(m, c, x.requires_grad());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < c; ++j) out.at(i, j) = x.at(idx[i], j);
    }
    if (out.requires_grad()) {
        std::vector<int> rows(idx.begin(), idx.end());
        tape.record("gather_rows", {x}, out, [x, out, rows = std::move(rows), c]() {
            Tensor xt = x;
            xt.ensure_grad();
            const std::vector<double>& go = out.impl()->grad;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (int j = 0; j < c; ++j) {
                    xt.impl()->grad[static_cast<std::size_t>(rows[i]) * c + j] +=
                        go[i * c + j];
                }
            }
        });
    }
    return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool train) {
    if (p < 0.0 || p >= 1.0) {
        throw ContractError("dropout: probability must be in [0, 1)");
    }
    if (!train || p == 0.0) {
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.size());
    for (double& m : mask) {
        m = rng.uniform() >= p ? keep_scale : 0.0;
    }
    Tensor out = make_output(x.rows(), x.cols(), x.requires_grad());
    const std::int64_t sz = static_cast<std::int64_t>(out.size());
    double* ov = out.values().data();
    const double* xv = x.values().data();
    const double* mk = mask.data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
    for (std::int64_t i = 0; i < sz; ++i) {
        ov[i] = xv[i] * mk[i];
    }
    check_finite("dropout", out.values());
    if (out.requires_grad()) {
        tape.record("dropout", {x}, out, [x, out, mask = std::move(mask)]() {
            Tensor xt = x;
            xt.ensure_grad();
            const std::vector<double>& go = out.impl()->grad;
            const std::int64_t sz = static_cast<std::int64_t>(go.size());
            double* g = xt.impl()->grad.data();
            const double* mk = mask.data();
#pragma omp parallel for schedule(static) if (sz > kParallelCutoff)
            for (std::int64_t i = 0; i < sz; ++i) {
                g[i] += go[i] * mk[i];
            }
        });
    }
    return out;
}

Tensor row_sum(Tape& tape, const Tensor& x) {
    const int n = x.rows(), c = x.cols();
    Tensor out = make_output(n, 1, x.requires_grad());
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += x.at(i, j);
        out.at(i, 0) = acc;
    }
    check_finite("row_sum", out.values());
    if (out.requires_grad()) {
        tape.record("row_sum", {x}, out, [x, out, n, c]() {
            Tensor xt = x;
            xt.ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double g = out.impl()->grad[i];
                for (int j = 0; j < c; ++j) {
                    xt.impl()->grad[static_cast<std::size_t>(i) * c + j] += g;
                }
            }
        });
    }
    return out;
}

Tensor scale_rows(Tape& tape, const Tensor& x, const Tensor& col) {
    if (col.rows() != x.rows() || col.cols() != 1) {
        throw DimensionError("scale_rows: scaler must be rows(x) x 1");
    }
    const int n = x.rows(), c = x.cols();
    Tensor out = make_output(n, c, any_requires_grad({&x, &col}));
    for (int i = 0; i < n; ++i) {
        const double s = col.at(i, 0);
        for (int j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) * s;
    }
    check_finite("scale_rows", out.values());
    if (out.requires_grad()) {
        tape.record("scale_rows", {x, col}, out, [x, col, out, n, c]() {
            const std::vector<double>& go = out.impl()->grad;
            if (x.requires_grad()) {
                Tensor xt = x;
                xt.ensure_grad();
                for (int i = 0; i < n; ++i) {
                    const double s = col.at(i, 0);
                    for (int j = 0; j < c; ++j) {
                        xt.impl()->grad[static_cast<std::size_t>(i) * c + j] +=
                            go[static_cast<std::size_t>(i) * c + j] * s;
                    }
                }
            }
            if (col.requires_grad()) {
                Tensor ct = col;
                ct.ensure_grad();
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < c; ++j) {
                        acc += go[static_cast<std::size_t>(i) * c + j] * x.at(i, j);
                    }
                    ct.impl()->grad[i] += acc;
                }
            }
        });
    }
    return out;
}

namespace {

Tensor reduce_all(Tape& tape, const char* name, const Tensor& x, double denom) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    Tensor out = Tensor::scalar(acc / denom);
    out.set_requires_grad(x.requires_grad());
    check_finite(name, out.values());
    if (out.requires_grad()) {
        tape.record(name, {x}, out, [x, out, denom]() {
            Tensor xt = x;
            xt.ensure_grad();
            const double g = out.impl()->grad[0] / denom;
            for (double& gv : xt.impl()->grad) gv += g;
        });
    }
    return out;
}

}  // namespace

Tensor sum(Tape& tape, const Tensor& x) {
    return reduce_all(tape, "sum", x, 1.0);
}

Tensor mean(Tape& tape, const Tensor& x) {
    if (x.size() == 0) {
        throw ContractError("mean: empty tensor");
    }
    return reduce_all(tape, "mean", x, static_cast<double>(x.size()));
}

std::vector<int> row_argmax(const Tensor& x) {
    std::vector<int> out(x.rows());
    for (int i = 0; i < x.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < x.cols(); ++j) {
            if (x.at(i, j) > x.at(i, best)) best = j;
        }
        out[i] = best;
    }
    return out;
}

Tensor xavier_init(int rows, int cols, Rng& rng) {
    if (rows < 1 || cols < 1) {
        throw ContractError("xavier_init: dimensions must be >= 1");
    }
    const double bound = std::sqrt(6.0 / (rows + cols));
    Tensor t(rows, cols);
    for (double& v : t.values()) {
        v = rng.uniform(-bound, bound);
    }
    return t;
}

// ---- Adam ------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.learning_rate <= 0.0 || cfg_.beta1 <= 0.0 || cfg_.beta2 <= 0.0 ||
        cfg_.epsilon <= 0.0) {
        throw ContractError("AdamOptimizer: hyperparameters must be positive");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        if (!p.has_grad()) {
            throw ContractError("AdamOptimizer::step: parameter " + std::to_string(pi) +
                                " has no gradient");
        }
        std::vector<double>& val = p.values();
        const std::vector<double>& g = p.grad();
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        for (std::size_t i = 0; i < val.size(); ++i) {
            const double grad = g[i] + cfg_.weight_decay * val[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad * grad;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            if (!std::isfinite(val[i])) {
                throw NumericError("AdamOptimizer::step: parameter became non-finite");
            }
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Tensor& p : params_) {
        p.ensure_grad();
        p.zero_grad();
    }
}

}  // namespace dccgcn
