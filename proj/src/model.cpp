#include "plad/model.hpp"

#include <string>

#include "plad/errors.hpp"
#include "plad/random.hpp"

namespace plad {

std::string_view mode_name(PerturbatorMode m) {
    switch (m) {
        case PerturbatorMode::vae: return "vae";
        case PerturbatorMode::ae: return "ae";
        case PerturbatorMode::degradation: return "degradation";
    }
    return "vae";
}

PerturbatorMode parse_mode(std::string_view name) {
    if (name == "vae") return PerturbatorMode::vae;
    if (name == "ae") return PerturbatorMode::ae;
    if (name == "degradation") return PerturbatorMode::degradation;
    throw ArgumentError("unknown perturbator mode '" + std::string(name) + "'");
}

ArchitectureConfig ArchitectureConfig::tabular() { return {}; }

ArchitectureConfig ArchitectureConfig::image() {
    ArchitectureConfig a;
    a.classifier_hidden = {128, 64};
    a.classifier_activation = Activation::leaky_relu;
    a.classifier_bias = false;
    a.perturbator_activation = Activation::leaky_relu;
    return a;
}

MlpSpec ArchitectureConfig::classifier_spec(std::size_t input_dim) const {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), classifier_hidden.begin(), classifier_hidden.end());
    dims.push_back(1);
    return MlpSpec::chain(std::move(dims), classifier_activation, classifier_bias);
}

PladModel PladModel::create(std::size_t input_dim, const ArchitectureConfig& arch,
                            PerturbatorMode mode, std::uint64_t seed) {
    PladModel m;
    m.mode = mode;
    Engine classifier_seed = make_engine({seed, stream::classifier_init});
    m.classifier = ClassifierNet::create(arch.classifier_spec(input_dim), classifier_seed());
    Engine perturbator_seed = make_engine({seed, stream::perturbator_init});
    if (mode == PerturbatorMode::vae) {
        m.vae = VaePerturbator::create(input_dim, arch.perturbator_activation, perturbator_seed());
    } else if (mode == PerturbatorMode::ae) {
        m.ae = AePerturbator::create(input_dim, arch.perturbator_activation, perturbator_seed());
    }
    return m;
}

}  // namespace plad
