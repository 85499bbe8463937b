#include "plad/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "plad/errors.hpp"

namespace plad {

ClassifierNet::ClassifierNet(std::vector<LinearLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ArgumentError("classifier needs at least one layer");
    for (std::size_t k = 1; k < layers_.size(); ++k) {
        if (layers_[k].in_dim() != layers_[k - 1].out_dim()) {
            throw DimensionError("classifier layers do not chain at layer " + std::to_string(k));
        }
    }
    if (layers_.back().out_dim() != 1) {
        throw DimensionError("classifier must end in a single logit, got width " +
                             std::to_string(layers_.back().out_dim()));
    }
}

ClassifierNet ClassifierNet::create(const MlpSpec& spec, std::uint64_t seed) {
    return ClassifierNet(init_params(spec, seed));
}

MlpSpec ClassifierNet::tabular_spec(std::size_t input_dim) {
    return MlpSpec::chain({input_dim, 20, 1}, Activation::relu, true);
}

MlpSpec ClassifierNet::image_spec(std::size_t input_dim) {
    return MlpSpec::chain({input_dim, 128, 64, 1}, Activation::leaky_relu, false);
}

std::size_t ClassifierNet::embedding_dim() const { return layers_.back().in_dim(); }

Var classifier_logit(std::span<const BoundLinear> net, Var x) {
    const std::size_t want = net.front().weight.value().shape()[1];
    if (x.value().cols() != want) {
        throw DimensionError("classifier expects input width " + std::to_string(want) + ", got " +
                             shape_string(x.value().shape()));
    }
    return mlp_forward(net, x);
}

Tensor ClassifierNet::logits(const Tensor& x, double leaky_slope) const {
    if (x.cols() != input_dim()) {
        throw DimensionError("classifier expects input width " + std::to_string(input_dim()) +
                             ", got " + shape_string(x.shape()));
    }
    return mlp_forward(layers_, x, leaky_slope);
}

std::vector<double> ClassifierNet::scores(const Tensor& x, double leaky_slope) const {
    const Tensor l = logits(x, leaky_slope);
    std::vector<double> out(l.size());
    std::transform(l.values().begin(), l.values().end(), out.begin(), anomaly_score);
    return out;
}

Tensor ClassifierNet::embeddings(const Tensor& x, double leaky_slope) const {
    if (x.cols() != input_dim()) {
        throw DimensionError("classifier expects input width " + std::to_string(input_dim()) +
                             ", got " + shape_string(x.shape()));
    }
    if (layers_.size() == 1) return x;
    std::span<const LinearLayer> hidden(layers_.data(), layers_.size() - 1);
    return mlp_forward(hidden, x, leaky_slope);
}

double sigmoid(double logit) {
    if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

double anomaly_score(double logit) { return sigmoid(logit); }

double binary_cross_entropy(int label, double logit) {
    if (label != 0 && label != 1) {
        throw ContractError("binary_cross_entropy: label must be 0 or 1, got " +
                            std::to_string(label));
    }
    if (!std::isfinite(logit)) throw NumericError("binary_cross_entropy: non-finite logit");
    return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

}  // namespace plad
