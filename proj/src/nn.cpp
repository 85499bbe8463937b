#include "plad/nn.hpp"

#include <algorithm>
#include <cmath>

#include "plad/errors.hpp"
#include "plad/random.hpp"

namespace plad {

std::string_view activation_name(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
    }
    return "none";
}

Activation parse_activation(std::string_view name) {
    if (name == "none") return Activation::none;
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
    if (dims.size() < 2) throw ArgumentError("mlp spec needs at least two dims");
    for (std::size_t d : dims) {
        if (d == 0) throw ArgumentError("mlp dims must be >= 1");
    }
    if (activations.size() != layer_count() || bias.size() != layer_count()) {
        throw ArgumentError("mlp spec needs one activation and one bias flag per layer");
    }
}

MlpSpec MlpSpec::chain(std::vector<std::size_t> dims, Activation hidden, bool use_bias) {
    MlpSpec spec;
    spec.dims = std::move(dims);
    const std::size_t layers = spec.layer_count();
    spec.activations.assign(layers, hidden);
    if (layers > 0) spec.activations.back() = Activation::none;
    spec.bias.assign(layers, use_bias);
    return spec;
}

LinearLayer init_linear(std::size_t in_dim, std::size_t out_dim, bool use_bias,
                        Activation activation, std::uint64_t seed) {
    if (in_dim == 0 || out_dim == 0) throw ArgumentError("linear layer dims must be >= 1");
    Engine rng = make_engine({seed});
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w({out_dim, in_dim});
    for (double& v : w.values()) v = dist(rng);
    LinearLayer layer{std::move(w), std::nullopt, activation};
    if (use_bias) layer.bias = Tensor::zeros({out_dim});
    return layer;
}

std::vector<LinearLayer> init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<LinearLayer> layers;
    Engine seeds = make_engine({seed});
    for (std::size_t k = 0; k < spec.layer_count(); ++k) {
        layers.push_back(
            init_linear(spec.dims[k], spec.dims[k + 1], spec.bias[k], spec.activations[k], seeds()));
    }
    return layers;
}

Var BoundLinear::affine(Var x) const {
    Var y = matmul_bt(x, weight);
    return bias ? add_bias(y, *bias) : y;
}

Var BoundLinear::operator()(Var x) const {
    Var y = affine(x);
    switch (activation) {
        case Activation::none: return y;
        case Activation::relu: return relu(y);
        case Activation::leaky_relu: return leaky_relu(y, leaky_slope);
    }
    return y;
}

BoundLinear Binder::bind(LinearLayer& layer) {
    auto place = [&](Tensor& p) {
        Var v;
        auto sub = std::find_if(substitutes_.begin(), substitutes_.end(),
                                [&](const auto& s) { return s.first == &p; });
        if (sub != substitutes_.end()) {
            if (!sub->second.value().same_shape(p)) {
                throw DimensionError("substitute for " + shape_string(p.shape()) + " has shape " +
                                     shape_string(sub->second.value().shape()));
            }
            v = sub->second;
        } else {
            v = trainable_ ? tape_.parameter(p) : tape_.constant(p);
        }
        params_.push_back(&p);
        vars_.push_back(v);
        return v;
    };
    BoundLinear bound;
    bound.weight = place(layer.weight);
    if (layer.bias) bound.bias = place(*layer.bias);
    bound.activation = layer.activation;
    bound.leaky_slope = leaky_slope_;
    return bound;
}

std::vector<BoundLinear> Binder::bind(std::vector<LinearLayer>& layers) {
    std::vector<BoundLinear> out;
    out.reserve(layers.size());
    for (LinearLayer& l : layers) out.push_back(bind(l));
    return out;
}

std::vector<Tensor> Binder::gradients(const Gradients& grads) const {
    std::vector<Tensor> out;
    out.reserve(vars_.size());
    for (Var v : vars_) out.push_back(grads.of(v));
    return out;
}

Var mlp_forward(std::span<const BoundLinear> layers, Var x) {
    for (const BoundLinear& layer : layers) x = layer(x);
    return x;
}

Tensor mlp_forward(std::span<const LinearLayer> layers, const Tensor& x, double leaky_slope) {
    Tape tape;
    Binder binder(tape, false, leaky_slope);
    std::vector<LinearLayer> copy(layers.begin(), layers.end());
    auto bound = binder.bind(copy);
    return mlp_forward(bound, tape.constant(x)).value();
}

std::string_view optimizer_name(OptimizerKind k) {
    return k == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ArgumentError("unknown optimizer '" + std::string(name) + "'");
}

OptimizerState::OptimizerState(OptimizerConfig config, std::span<Tensor* const> params)
    : config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
    if (!(config_.beta1 > 0.0 && config_.beta1 < 1.0 && config_.beta2 > 0.0 &&
          config_.beta2 < 1.0)) {
        throw ArgumentError("adam betas must lie in (0, 1)");
    }
    for (Tensor* p : params) {
        m_.push_back(Tensor::zeros(p->shape()));
        v_.push_back(Tensor::zeros(p->shape()));
    }
}

void OptimizerState::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != m_.size() || grads.size() != params.size()) {
        throw ContractError("optimizer step: parameter/gradient count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(*params[i])) {
            throw DimensionError("optimizer step: gradient shape " +
                                 shape_string(grads[i].shape()) + " vs parameter " +
                                 shape_string(params[i]->shape()));
        }
        if (!grads[i].all_finite()) {
            throw NumericError("optimizer step: non-finite gradient for parameter " +
                               std::to_string(i));
        }
    }

    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerKind::sgd) {
        const double mu = config_.momentum;
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto p = params[i]->values();
            auto g = grads[i].values();
            if (mu == 0.0) {
                for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
            } else {
                auto vel = m_[i].values();
                for (std::size_t j = 0; j < p.size(); ++j) {
                    vel[j] = mu * vel[j] + g[j];
                    p[j] -= lr * vel[j];
                }
            }
        }
        ++t_;
        return;
    }

    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->values();
        auto g = grads[i].values();
        auto m = m_[i].values();
        auto v = v_[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

}  // namespace plad
