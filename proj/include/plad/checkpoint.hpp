#pragma once

// Binary parameter checkpoints, little-endian:
//
//   "PLAD"            4 bytes magic
//   version           u32 (= 1)
//   layer count       u32
//   per layer:
//     role            u32 (LayerRole)
//     activation      u32 (0 none, 1 relu, 2 leaky_relu)
//     out_dim         u32
//     in_dim          u32
//     has_bias        u32 (0 or 1)
//     weight          out_dim * in_dim f64, row-major
//     bias            out_dim f64, present iff has_bias
//
// Perturbator layers follow the classifier in the fixed order encoder,
// mu head, logvar head (or bottleneck), decoder.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "plad/model.hpp"
#include "plad/nn.hpp"

namespace plad {

enum class LayerRole : std::uint32_t {
    classifier = 0,
    encoder = 1,
    mu_head = 2,
    logvar_head = 3,
    bottleneck = 4,
    decoder = 5,
};

struct TaggedLayer {
    LayerRole role = LayerRole::classifier;
    LinearLayer layer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_layers(const std::filesystem::path& path, const std::vector<TaggedLayer>& layers);
std::vector<TaggedLayer> load_layers(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const PladModel& model);
PladModel load_checkpoint(const std::filesystem::path& path);

}  // namespace plad
