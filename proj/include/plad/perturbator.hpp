#pragma once

// Perturbation generators. Both variants map a batch (B, d) to a multiplicative
// perturbation alpha and an additive perturbation beta of the same shape; the
// perturbed sample is x * alpha + beta. Every hidden width equals d.

#include <cstdint>
#include <vector>

#include "plad/nn.hpp"

namespace plad {

struct PerturbationOutput {
    Var alpha;
    Var beta;
    Var mu;
    Var logvar;
    Var z;
};

struct PerturbationValues {
    Tensor alpha;
    Tensor beta;
    Tensor mu;
    Tensor logvar;
    Tensor z;
};

class VaePerturbator {
public:
    VaePerturbator() = default;
    VaePerturbator(LinearLayer encoder, LinearLayer mu_head, LinearLayer logvar_head,
                   LinearLayer decoder_hidden, LinearLayer decoder_out);

    static VaePerturbator create(std::size_t dim, Activation activation, std::uint64_t seed);

    std::size_t dim() const { return encoder_.in_dim(); }

    // Fixed serialization order: encoder, mu head, logvar head, decoder.
    std::vector<LinearLayer*> layers();
    std::vector<const LinearLayer*> layers() const;

    class Bound {
    public:
        // z = mu + exp(0.5 * logvar) * noise; (alpha, beta) split the decoder output.
        PerturbationOutput forward(Var x, Var noise) const;

    private:
        friend class VaePerturbator;
        BoundLinear encoder, mu_head, logvar_head, decoder_hidden, decoder_out;
        std::size_t dim = 0;
    };
    Bound bind(Binder& binder);

    PerturbationValues perturb(const Tensor& x, const Tensor& noise, double leaky_slope = 0.01) const;

private:
    LinearLayer encoder_, mu_head_, logvar_head_, decoder_hidden_, decoder_out_;
};

// Deterministic variant: the stochastic heads become one bottleneck map.
class AePerturbator {
public:
    AePerturbator() = default;
    AePerturbator(LinearLayer encoder, LinearLayer bottleneck, LinearLayer decoder_hidden,
                  LinearLayer decoder_out);

    static AePerturbator create(std::size_t dim, Activation activation, std::uint64_t seed);

    std::size_t dim() const { return encoder_.in_dim(); }
    std::vector<LinearLayer*> layers();
    std::vector<const LinearLayer*> layers() const;

    class Bound {
    public:
        // alpha, beta
        std::pair<Var, Var> forward(Var x) const;

    private:
        friend class AePerturbator;
        BoundLinear encoder, bottleneck, decoder_hidden, decoder_out;
        std::size_t dim = 0;
    };
    Bound bind(Binder& binder);

    std::pair<Tensor, Tensor> perturb(const Tensor& x, double leaky_slope = 0.01) const;

private:
    LinearLayer encoder_, bottleneck_, decoder_hidden_, decoder_out_;
};

// x * alpha + beta, no clamping.
Var apply_perturbation(Var x, Var alpha, Var beta);
Tensor apply_perturbation(const Tensor& x, const Tensor& alpha, const Tensor& beta);

// Batch mean of -0.5 * sum(1 + logvar - mu^2 - exp(logvar)).
Var kl_standard_normal(Var mu, Var logvar);
double kl_standard_normal(const Tensor& mu, const Tensor& logvar);

// Batch mean of ||alpha - 1||^2 + ||beta||^2.
Var reconstruction_penalty(Var alpha, Var beta);
double reconstruction_penalty(const Tensor& alpha, const Tensor& beta);

}  // namespace plad
