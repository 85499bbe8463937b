#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plad/autodiff.hpp"
#include "plad/tensor.hpp"

namespace plad {

enum class Activation { none, relu, leaky_relu };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct LinearLayer {
    Tensor weight;               // (out_dim, in_dim)
    std::optional<Tensor> bias;  // (out_dim)
    Activation activation = Activation::none;

    std::size_t in_dim() const { return weight.shape()[1]; }
    std::size_t out_dim() const { return weight.shape()[0]; }
};

// Layer k maps dims[k] -> dims[k+1] and is followed by activations[k].
struct MlpSpec {
    std::vector<std::size_t> dims;
    std::vector<Activation> activations;
    std::vector<bool> bias;

    std::size_t layer_count() const { return dims.empty() ? 0 : dims.size() - 1; }
    void validate() const;

    // Hidden layers share one activation; the final layer has none.
    static MlpSpec chain(std::vector<std::size_t> dims, Activation hidden, bool use_bias);
};

// Weights uniform in +-sqrt(6 / in_dim), biases zero.
std::vector<LinearLayer> init_params(const MlpSpec& spec, std::uint64_t seed);
LinearLayer init_linear(std::size_t in_dim, std::size_t out_dim, bool use_bias,
                        Activation activation, std::uint64_t seed);

struct BoundLinear {
    Var weight;
    std::optional<Var> bias;
    Activation activation = Activation::none;
    double leaky_slope = 0.01;

    // Affine map followed by the layer activation.
    Var operator()(Var x) const;
    Var affine(Var x) const;
};

// Places parameters on a tape and remembers them so that gradients come back
// in the same order the parameters were bound.
class Binder {
public:
    Binder(Tape& tape, bool trainable, double leaky_slope = 0.01)
        : tape_(tape), trainable_(trainable), leaky_slope_(leaky_slope) {}

    Tape& tape() { return tape_; }
    // Binds `v` in place of the parameter at `param`, e.g. to differentiate
    // with respect to one tensor.
    void substitute(const Tensor* param, Var v) { substitutes_.emplace_back(param, v); }
    BoundLinear bind(LinearLayer& layer);
    std::vector<BoundLinear> bind(std::vector<LinearLayer>& layers);

    const std::vector<Tensor*>& parameters() const { return params_; }
    std::vector<Tensor> gradients(const Gradients& grads) const;

private:
    Tape& tape_;
    bool trainable_;
    double leaky_slope_;
    std::vector<Tensor*> params_;
    std::vector<Var> vars_;
    std::vector<std::pair<const Tensor*, Var>> substitutes_;
};

// Applies each bound layer in turn.
Var mlp_forward(std::span<const BoundLinear> layers, Var x);

// Convenience evaluation without keeping the tape.
Tensor mlp_forward(std::span<const LinearLayer> layers, const Tensor& x, double leaky_slope = 0.01);

enum class OptimizerKind { sgd, adam };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.0;  // sgd only
};

class OptimizerState {
public:
    OptimizerState(OptimizerConfig config, std::span<Tensor* const> params);

    // Validates every gradient before touching any parameter.
    void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

    const OptimizerConfig& config() const { return config_; }
    std::uint64_t steps() const { return t_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    OptimizerConfig config_;
    std::vector<Tensor> m_;  // adam first moment, or sgd velocity
    std::vector<Tensor> v_;
    std::uint64_t t_ = 0;
};

}  // namespace plad
