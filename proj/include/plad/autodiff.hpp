#pragma once

// Define-by-run reverse-mode differentiation. A Tape is built fresh for every
// forward pass; operations append nodes in creation order, so the node list is
// topologically sorted by construction and backward() is a single reverse sweep.

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "plad/tensor.hpp"

namespace plad {

enum class OpKind {
    leaf,
    matmul,     // (n,k) x (k,m)
    matmul_bt,  // (n,k) x (m,k)^T, the linear-layer product
    add,
    add_bias,   // (n,m) + (m) broadcast over rows
    hadamard,
    scale,
    leaky_relu,
    relu,
    sigmoid,
    exp,
    square,
    sum,
    mean,
    concat,     // along the last axis
    split,      // column slice along the last axis
    bce_logits, // elementwise stable binary cross-entropy against a fixed label
};

std::string_view op_name(OpKind kind);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Gradients of one backward sweep, indexed by node id.
class Gradients {
public:
    explicit Gradients(std::vector<std::optional<Tensor>> grads, const Tape& tape);

    // Zero tensor for nodes the loss does not depend on.
    Tensor of(Var v) const;

private:
    std::vector<std::optional<Tensor>> grads_;
    const Tape* tape_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var parameter(Tensor value);

    const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
    OpKind kind(Var v) const { return nodes_.at(v.id()).kind; }
    std::size_t size() const { return nodes_.size(); }

    Gradients backward(Var loss) const;

private:
    struct Node {
        OpKind kind = OpKind::leaf;
        std::size_t inputs[2] = {0, 0};
        std::size_t arity = 0;
        Tensor value;
        bool requires_grad = false;
        double param = 0.0;     // scale factor, leaky slope, or bce label
        std::size_t offset = 0; // split start column
    };

    Var record(OpKind kind, std::initializer_list<Var> inputs, Tensor value, double param = 0.0,
               std::size_t offset = 0);
    void accumulate_input_grads(const Node& node, const Tensor& grad,
                                std::vector<std::optional<Tensor>>& grads) const;

    std::vector<Node> nodes_;

    friend Var matmul(Var, Var);
    friend Var matmul_bt(Var, Var);
    friend Var add(Var, Var);
    friend Var add_bias(Var, Var);
    friend Var hadamard(Var, Var);
    friend Var scale(Var, double);
    friend Var leaky_relu(Var, double);
    friend Var relu(Var);
    friend Var sigmoid(Var);
    friend Var exp(Var);
    friend Var square(Var);
    friend Var sum(Var);
    friend Var mean(Var);
    friend Var concat(Var, Var);
    friend Var split(Var, std::size_t, std::size_t);
    friend Var bce_logits(Var, double);
};

Var matmul(Var a, Var b);
Var matmul_bt(Var a, Var b);
// Same shape, or either operand a scalar.
Var add(Var a, Var b);
Var add_bias(Var x, Var bias);
Var hadamard(Var a, Var b);
Var scale(Var x, double factor);
Var leaky_relu(Var x, double slope = 0.01);
Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var square(Var x);
Var sum(Var x);
Var mean(Var x);
Var concat(Var a, Var b);
Var split(Var x, std::size_t offset, std::size_t width);
// max(t,0) - t*label + log(1 + exp(-|t|)), elementwise.
Var bce_logits(Var logits, double label);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
using ScalarFunction = std::function<Var(Var)>;
double grad_check(const ScalarFunction& f, const Tensor& point, double h = 1e-6);

}  // namespace plad
