#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "plad/nn.hpp"

namespace plad {

// Binary classifier emitting one raw logit per sample. Label 1 is the
// perturbed/abnormal side, so larger scores mean more anomalous.
class ClassifierNet {
public:
    ClassifierNet() = default;
    explicit ClassifierNet(std::vector<LinearLayer> layers);

    static ClassifierNet create(const MlpSpec& spec, std::uint64_t seed);
    // d -> 20 -> 1 with relu and bias.
    static MlpSpec tabular_spec(std::size_t input_dim);
    // d -> 128 -> 64 -> 1 with leaky relu and no bias.
    static MlpSpec image_spec(std::size_t input_dim);

    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t embedding_dim() const;

    std::vector<LinearLayer>& layers() { return layers_; }
    const std::vector<LinearLayer>& layers() const { return layers_; }

    std::vector<BoundLinear> bind(Binder& binder) { return binder.bind(layers_); }

    Tensor logits(const Tensor& x, double leaky_slope = 0.01) const;
    std::vector<double> scores(const Tensor& x, double leaky_slope = 0.01) const;
    // Activations feeding the final layer, shape (n, embedding_dim).
    Tensor embeddings(const Tensor& x, double leaky_slope = 0.01) const;

private:
    std::vector<LinearLayer> layers_;
};

Var classifier_logit(std::span<const BoundLinear> net, Var x);

double sigmoid(double logit);
double anomaly_score(double logit);

// Stable form; label must be 0 or 1.
double binary_cross_entropy(int label, double logit);

struct ScoredSample {
    std::size_t index = 0;
    double score = 0.5;
    std::optional<int> true_label;
};

}  // namespace plad
