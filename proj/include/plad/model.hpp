#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "plad/classifier.hpp"
#include "plad/perturbator.hpp"

namespace plad {

enum class PerturbatorMode { vae, ae, degradation };

std::string_view mode_name(PerturbatorMode m);
PerturbatorMode parse_mode(std::string_view name);

struct ArchitectureConfig {
    std::vector<std::size_t> classifier_hidden{20};
    Activation classifier_activation = Activation::relu;
    bool classifier_bias = true;
    Activation perturbator_activation = Activation::relu;
    double leaky_slope = 0.01;

    static ArchitectureConfig tabular();
    static ArchitectureConfig image();

    MlpSpec classifier_spec(std::size_t input_dim) const;
};

// Classifier parameters plus, unless degraded, one perturbator.
struct PladModel {
    ClassifierNet classifier;
    PerturbatorMode mode = PerturbatorMode::vae;
    std::optional<VaePerturbator> vae;
    std::optional<AePerturbator> ae;

    static PladModel create(std::size_t input_dim, const ArchitectureConfig& arch,
                            PerturbatorMode mode, std::uint64_t seed);

    std::size_t input_dim() const { return classifier.input_dim(); }
};

}  // namespace plad
