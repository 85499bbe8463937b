#include "plad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include <cblas.h>

#include "plad/errors.hpp"

namespace plad {

namespace {

// Dense products go to single-threaded OpenBLAS: runs already execute in
// parallel, and one BLAS thread keeps every product's summation order fixed.
void single_threaded_blas() {
    static std::once_flag once;
    std::call_once(once, [] { openblas_set_num_threads(1); });
}

using Int = blasint;

Int as_int(std::size_t v) { return static_cast<Int>(v); }

// c(n,m) += a(n,k) * b(k,m)
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    single_threaded_blas();
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, as_int(n), as_int(m), as_int(k), 1.0, a,
                as_int(k), b, as_int(m), 1.0, c, as_int(m));
}

// c(n,m) += a(n,k) * b(m,k)^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    single_threaded_blas();
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, as_int(n), as_int(m), as_int(k), 1.0, a,
                as_int(k), b, as_int(k), 1.0, c, as_int(m));
}

// c(k,m) += a(n,k)^T * b(n,m)
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    single_threaded_blas();
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, as_int(k), as_int(m), as_int(n), 1.0, a,
                as_int(k), b, as_int(m), 1.0, c, as_int(m));
}

[[noreturn]] void shape_error(OpKind kind, const Tensor& a, const Tensor& b) {
    throw DimensionError(std::string(op_name(kind)) + ": incompatible shapes " +
                         shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

Tape& common_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) {
        throw ContractError("operands recorded on different tapes");
    }
    return a.tape();
}

// Elementwise binary op supporting identical shapes or a scalar operand.
template <typename F>
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b, F f) {
    if (a.same_shape(b)) {
        Tensor out(a.shape());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
        return out;
    }
    if (b.is_scalar() && b.rank() == 1) {
        Tensor out(a.shape());
        const double s = b[0];
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], s);
        return out;
    }
    if (a.is_scalar() && a.rank() == 1) {
        Tensor out(b.shape());
        const double s = a[0];
        for (std::size_t i = 0; i < b.size(); ++i) out[i] = f(s, b[i]);
        return out;
    }
    shape_error(kind, a, b);
}

template <typename F>
Tensor unary(const Tensor& x, F f) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return out;
}

Shape with_cols(const Tensor& like, std::size_t cols) {
    if (like.rank() == 2) return {like.rows(), cols};
    return {cols};
}

void add_into(std::optional<Tensor>& slot, const Tensor& g) {
    if (!slot) {
        slot = g;
        return;
    }
    auto dst = slot->values();
    auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Reduce a broadcast gradient back to a scalar operand when needed.
Tensor reduce_to(const Tensor& grad, const Tensor& operand) {
    if (grad.same_shape(operand)) return grad;
    double acc = 0.0;
    for (double g : grad.values()) acc += g;
    return Tensor::scalar(acc);
}

}  // namespace

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::matmul_bt: return "matmul_bt";
        case OpKind::add: return "add";
        case OpKind::add_bias: return "add_bias";
        case OpKind::hadamard: return "hadamard";
        case OpKind::scale: return "scale";
        case OpKind::leaky_relu: return "leaky_relu";
        case OpKind::relu: return "relu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::exp: return "exp";
        case OpKind::square: return "square";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
        case OpKind::concat: return "concat";
        case OpKind::split: return "split";
        case OpKind::bce_logits: return "bce_logits";
    }
    return "unknown";
}

const Tensor& Var::value() const { return tape_->value(*this); }

Gradients::Gradients(std::vector<std::optional<Tensor>> grads, const Tape& tape)
    : grads_(std::move(grads)), tape_(&tape) {}

Tensor Gradients::of(Var v) const {
    if (v.id() < grads_.size() && grads_[v.id()]) return *grads_[v.id()];
    return Tensor::zeros(tape_->value(v).shape());
}

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NumericError("leaf: non-finite value");
    nodes_.push_back(Node{.kind = OpKind::leaf, .value = std::move(value)});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) {
    Var v = constant(std::move(value));
    nodes_.back().requires_grad = true;
    return v;
}

Var Tape::record(OpKind kind, std::initializer_list<Var> inputs, Tensor value, double param,
                 std::size_t offset) {
    if (!value.all_finite()) {
        throw NumericError(std::string(op_name(kind)) + ": non-finite output");
    }
    Node node{.kind = kind, .value = std::move(value), .param = param, .offset = offset};
    for (Var in : inputs) {
        if (&in.tape() != this) throw ContractError("operand recorded on a different tape");
        node.inputs[node.arity++] = in.id();
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var matmul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows()) shape_error(OpKind::matmul, x, y);
    Tensor out({x.rows(), y.cols()});
    gemm_nn(x.data().data(), y.data().data(), out.values().data(), x.rows(), x.cols(), y.cols());
    return t.record(OpKind::matmul, {a, b}, std::move(out));
}

Var matmul_bt(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (y.rank() != 2 || x.cols() != y.cols()) shape_error(OpKind::matmul_bt, x, y);
    Tensor out({x.rows(), y.rows()});
    gemm_nt(x.data().data(), y.data().data(), out.values().data(), x.rows(), x.cols(), y.rows());
    return t.record(OpKind::matmul_bt, {a, b}, std::move(out));
}

Var add(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(OpKind::add, {a, b},
                    elementwise(OpKind::add, a.value(), b.value(),
                                [](double u, double v) { return u + v; }));
}

Var add_bias(Var x, Var bias) {
    Tape& t = common_tape(x, bias);
    const Tensor& v = x.value();
    const Tensor& b = bias.value();
    if (b.rank() != 1 || b.size() != v.cols()) shape_error(OpKind::add_bias, v, b);
    Tensor out = v;
    const std::size_t m = v.cols();
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t j = 0; j < m; ++j) out[r * m + j] += b[j];
    return t.record(OpKind::add_bias, {x, bias}, std::move(out));
}

Var hadamard(Var a, Var b) {
    Tape& t = common_tape(a, b);
    return t.record(OpKind::hadamard, {a, b},
                    elementwise(OpKind::hadamard, a.value(), b.value(),
                                [](double u, double v) { return u * v; }));
}

Var scale(Var x, double factor) {
    return x.tape().record(OpKind::scale, {x},
                           unary(x.value(), [factor](double v) { return v * factor; }), factor);
}

Var leaky_relu(Var x, double slope) {
    return x.tape().record(OpKind::leaky_relu, {x},
                           unary(x.value(), [slope](double v) { return v > 0.0 ? v : slope * v; }),
                           slope);
}

Var relu(Var x) {
    return x.tape().record(OpKind::relu, {x},
                           unary(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
}

Var sigmoid(Var x) {
    return x.tape().record(OpKind::sigmoid, {x}, unary(x.value(), [](double v) {
                               if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                               const double e = std::exp(v);
                               return e / (1.0 + e);
                           }));
}

Var exp(Var x) {
    return x.tape().record(OpKind::exp, {x}, unary(x.value(), [](double v) { return std::exp(v); }));
}

Var square(Var x) {
    return x.tape().record(OpKind::square, {x}, unary(x.value(), [](double v) { return v * v; }));
}

Var sum(Var x) {
    double acc = 0.0;
    for (double v : x.value().values()) acc += v;
    return x.tape().record(OpKind::sum, {x}, Tensor::scalar(acc));
}

Var mean(Var x) {
    double acc = 0.0;
    for (double v : x.value().values()) acc += v;
    return x.tape().record(OpKind::mean, {x},
                           Tensor::scalar(acc / static_cast<double>(x.value().size())));
}

Var concat(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.rank() != y.rank() || x.rows() != y.rows()) shape_error(OpKind::concat, x, y);
    const std::size_t cx = x.cols(), cy = y.cols(), c = cx + cy;
    Tensor out(with_cols(x, c));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::copy_n(x.data().begin() + r * cx, cx, out.values().begin() + r * c);
        std::copy_n(y.data().begin() + r * cy, cy, out.values().begin() + r * c + cx);
    }
    return t.record(OpKind::concat, {a, b}, std::move(out));
}

Var split(Var x, std::size_t offset, std::size_t width) {
    const Tensor& v = x.value();
    if (width == 0 || offset + width > v.cols()) {
        throw DimensionError("split: columns [" + std::to_string(offset) + ", " +
                             std::to_string(offset + width) + ") out of range for shape " +
                             shape_string(v.shape()));
    }
    const std::size_t c = v.cols();
    Tensor out(with_cols(v, width));
    for (std::size_t r = 0; r < v.rows(); ++r)
        std::copy_n(v.data().begin() + r * c + offset, width, out.values().begin() + r * width);
    return x.tape().record(OpKind::split, {x}, std::move(out), 0.0, offset);
}

Var bce_logits(Var logits, double label) {
    if (label != 0.0 && label != 1.0) {
        throw ContractError("bce_logits: label must be 0 or 1, got " + std::to_string(label));
    }
    return logits.tape().record(OpKind::bce_logits, {logits}, unary(logits.value(), [label](double t) {
                                    return std::max(t, 0.0) - t * label +
                                           std::log1p(std::exp(-std::abs(t)));
                                }),
                                label);
}

Gradients Tape::backward(Var loss) const {
    if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
    if (!value(loss).is_scalar()) {
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_string(value(loss).shape()));
    }
    std::vector<std::optional<Tensor>> grads(nodes_.size());
    grads[loss.id()] = Tensor::filled(value(loss).shape(), 1.0);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (!grads[id] || !node.requires_grad || node.kind == OpKind::leaf) continue;
        for (std::size_t k = 0; k < node.arity; ++k) {
            if (node.inputs[k] >= id) throw InternalError("tape is not topologically ordered");
        }
        accumulate_input_grads(node, *grads[id], grads);
    }
    return Gradients(std::move(grads), *this);
}

void Tape::accumulate_input_grads(const Node& node, const Tensor& g,
                                  std::vector<std::optional<Tensor>>& grads) const {
    const std::size_t ia = node.inputs[0];
    const std::size_t ib = node.inputs[1];
    const Node& a = nodes_[ia];
    auto wants = [&](std::size_t id) { return nodes_[id].requires_grad; };

    switch (node.kind) {
        case OpKind::leaf:
            return;
        case OpKind::matmul: {
            const Tensor& x = a.value;
            const Tensor& y = nodes_[ib].value;
            const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
            if (wants(ia)) {
                Tensor dx(x.shape());
                gemm_nt(g.data().data(), y.data().data(), dx.values().data(), n, m, k);
                add_into(grads[ia], dx);
            }
            if (wants(ib)) {
                Tensor dy(y.shape());
                gemm_tn(x.data().data(), g.data().data(), dy.values().data(), n, k, m);
                add_into(grads[ib], dy);
            }
            return;
        }
        case OpKind::matmul_bt: {
            const Tensor& x = a.value;
            const Tensor& y = nodes_[ib].value;
            const std::size_t n = x.rows(), k = x.cols(), m = y.rows();
            if (wants(ia)) {
                Tensor dx(x.shape());
                gemm_nn(g.data().data(), y.data().data(), dx.values().data(), n, m, k);
                add_into(grads[ia], dx);
            }
            if (wants(ib)) {
                Tensor dy(y.shape());
                gemm_tn(g.data().data(), x.data().data(), dy.values().data(), n, m, k);
                add_into(grads[ib], dy);
            }
            return;
        }
        case OpKind::add:
            if (wants(ia)) add_into(grads[ia], reduce_to(g, a.value));
            if (wants(ib)) add_into(grads[ib], reduce_to(g, nodes_[ib].value));
            return;
        case OpKind::add_bias: {
            if (wants(ia)) add_into(grads[ia], g);
            if (wants(ib)) {
                const std::size_t m = g.cols();
                Tensor db({m});
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t j = 0; j < m; ++j) db[j] += g[r * m + j];
                add_into(grads[ib], db);
            }
            return;
        }
        case OpKind::hadamard: {
            const Tensor& x = a.value;
            const Tensor& y = nodes_[ib].value;
            if (wants(ia)) {
                add_into(grads[ia], reduce_to(elementwise(OpKind::hadamard, g, y,
                                                          [](double u, double v) { return u * v; }),
                                              x));
            }
            if (wants(ib)) {
                add_into(grads[ib], reduce_to(elementwise(OpKind::hadamard, g, x,
                                                          [](double u, double v) { return u * v; }),
                                              y));
            }
            return;
        }
        case OpKind::scale: {
            const double f = node.param;
            add_into(grads[ia], unary(g, [f](double v) { return v * f; }));
            return;
        }
        case OpKind::leaky_relu:
        case OpKind::relu: {
            const double slope = node.kind == OpKind::relu ? 0.0 : node.param;
            Tensor d(g.shape());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.value[i] > 0.0 ? g[i] : slope * g[i];
            add_into(grads[ia], d);
            return;
        }
        case OpKind::sigmoid: {
            Tensor d(g.shape());
            for (std::size_t i = 0; i < d.size(); ++i) {
                const double s = node.value[i];
                d[i] = g[i] * s * (1.0 - s);
            }
            add_into(grads[ia], d);
            return;
        }
        case OpKind::exp: {
            Tensor d(g.shape());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * node.value[i];
            add_into(grads[ia], d);
            return;
        }
        case OpKind::square: {
            Tensor d(g.shape());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = 2.0 * a.value[i] * g[i];
            add_into(grads[ia], d);
            return;
        }
        case OpKind::sum:
            add_into(grads[ia], Tensor::filled(a.value.shape(), g[0]));
            return;
        case OpKind::mean:
            add_into(grads[ia],
                     Tensor::filled(a.value.shape(), g[0] / static_cast<double>(a.value.size())));
            return;
        case OpKind::concat: {
            const Tensor& x = a.value;
            const Tensor& y = nodes_[ib].value;
            const std::size_t cx = x.cols(), cy = y.cols(), c = cx + cy;
            if (wants(ia)) {
                Tensor dx(x.shape());
                for (std::size_t r = 0; r < x.rows(); ++r)
                    std::copy_n(g.data().begin() + r * c, cx, dx.values().begin() + r * cx);
                add_into(grads[ia], dx);
            }
            if (wants(ib)) {
                Tensor dy(y.shape());
                for (std::size_t r = 0; r < y.rows(); ++r)
                    std::copy_n(g.data().begin() + r * c + cx, cy, dy.values().begin() + r * cy);
                add_into(grads[ib], dy);
            }
            return;
        }
        case OpKind::split: {
            const Tensor& x = a.value;
            const std::size_t c = x.cols(), w = g.cols();
            Tensor dx(x.shape());
            for (std::size_t r = 0; r < x.rows(); ++r)
                std::copy_n(g.data().begin() + r * w, w, dx.values().begin() + r * c + node.offset);
            add_into(grads[ia], dx);
            return;
        }
        case OpKind::bce_logits: {
            const double label = node.param;
            Tensor d(g.shape());
            for (std::size_t i = 0; i < d.size(); ++i) {
                const double t = a.value[i];
                const double s = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                                          : std::exp(t) / (1.0 + std::exp(t));
                d[i] = g[i] * (s - label);
            }
            add_into(grads[ia], d);
            return;
        }
    }
    throw InternalError("backward: unhandled op kind");
}

double grad_check(const ScalarFunction& f, const Tensor& point, double h) {
    if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");

    Tape tape;
    Var x = tape.parameter(point);
    Var y = f(x);
    const Tensor analytic = tape.backward(y).of(x);

    auto evaluate = [&](const Tensor& at) {
        Tape probe;
        const double v = f(probe.constant(at)).value().item();
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value at probe point");
        return v;
    };

    double worst = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        probe[i] = point[i] + h;
        const double up = evaluate(probe);
        probe[i] = point[i] - h;
        const double down = evaluate(probe);
        probe[i] = point[i];
        const double numeric = (up - down) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace plad
