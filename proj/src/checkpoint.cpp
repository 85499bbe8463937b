#include "plad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "plad/errors.hpp"

namespace plad {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& os, std::span<const double> values) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
}

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open checkpoint " + path.string());
    }

    std::uint32_t u32(const char* what) {
        std::uint32_t v = 0;
        read(&v, sizeof v, what);
        return v;
    }

    void f64(std::span<double> out, const char* what) {
        read(out.data(), out.size() * sizeof(double), what);
    }

    void read(void* dst, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError(path_.string() + ": truncated checkpoint reading " + what +
                              " at byte offset " + std::to_string(offset_));
        }
        offset_ += n;
    }

    std::size_t offset() const { return offset_; }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::ifstream in_;
    std::filesystem::path path_;
    std::size_t offset_ = 0;
};

std::uint32_t activation_code(Activation a) {
    switch (a) {
        case Activation::none: return 0;
        case Activation::relu: return 1;
        case Activation::leaky_relu: return 2;
    }
    return 0;
}

Activation activation_from(std::uint32_t code, std::size_t offset) {
    switch (code) {
        case 0: return Activation::none;
        case 1: return Activation::relu;
        case 2: return Activation::leaky_relu;
        default:
            throw FormatError("checkpoint: bad activation code " + std::to_string(code) +
                              " at byte offset " + std::to_string(offset));
    }
}

}  // namespace

void save_layers(const std::filesystem::path& path, const std::vector<TaggedLayer>& layers) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + path.string());
    os.write("PLAD", 4);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(layers.size()));
    for (const TaggedLayer& t : layers) {
        put_u32(os, static_cast<std::uint32_t>(t.role));
        put_u32(os, activation_code(t.layer.activation));
        put_u32(os, static_cast<std::uint32_t>(t.layer.out_dim()));
        put_u32(os, static_cast<std::uint32_t>(t.layer.in_dim()));
        put_u32(os, t.layer.bias ? 1u : 0u);
        put_f64(os, t.layer.weight.values());
        if (t.layer.bias) put_f64(os, t.layer.bias->values());
    }
    if (!os) throw IoError("failed writing checkpoint " + path.string());
}

std::vector<TaggedLayer> load_layers(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, "PLAD", 4) != 0) {
        throw FormatError(path.string() + ": bad checkpoint magic at byte offset 0");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version) + " at byte offset 4");
    }
    const std::uint32_t count = r.u32("layer count");
    std::vector<TaggedLayer> layers;
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::size_t at = r.offset();
        const std::uint32_t role = r.u32("layer role");
        if (role > static_cast<std::uint32_t>(LayerRole::decoder)) {
            throw FormatError(path.string() + ": bad layer role " + std::to_string(role) +
                              " at byte offset " + std::to_string(at));
        }
        const Activation act = activation_from(r.u32("activation"), r.offset() - 4);
        const std::uint32_t out = r.u32("out_dim");
        const std::uint32_t in = r.u32("in_dim");
        const std::uint32_t has_bias = r.u32("bias flag");
        if (out == 0 || in == 0 || has_bias > 1) {
            throw FormatError(path.string() + ": bad layer header at byte offset " +
                              std::to_string(at));
        }
        TaggedLayer t{static_cast<LayerRole>(role), LinearLayer{Tensor({out, in}), std::nullopt, act}};
        r.f64(t.layer.weight.values(), "weights");
        if (has_bias) {
            t.layer.bias = Tensor({out});
            r.f64(t.layer.bias->values(), "bias");
        }
        layers.push_back(std::move(t));
    }
    if (!r.at_end()) {
        throw FormatError(path.string() + ": trailing bytes after byte offset " +
                          std::to_string(r.offset()));
    }
    return layers;
}

void save_checkpoint(const std::filesystem::path& path, const PladModel& model) {
    std::vector<TaggedLayer> layers;
    for (const LinearLayer& l : model.classifier.layers()) layers.push_back({LayerRole::classifier, l});
    if (model.vae) {
        const auto ls = model.vae->layers();
        const LayerRole roles[] = {LayerRole::encoder, LayerRole::mu_head, LayerRole::logvar_head,
                                   LayerRole::decoder, LayerRole::decoder};
        for (std::size_t i = 0; i < ls.size(); ++i) layers.push_back({roles[i], *ls[i]});
    }
    if (model.ae) {
        const auto ls = model.ae->layers();
        const LayerRole roles[] = {LayerRole::encoder, LayerRole::bottleneck, LayerRole::decoder,
                                   LayerRole::decoder};
        for (std::size_t i = 0; i < ls.size(); ++i) layers.push_back({roles[i], *ls[i]});
    }
    save_layers(path, layers);
}

PladModel load_checkpoint(const std::filesystem::path& path) {
    std::vector<TaggedLayer> layers = load_layers(path);
    std::vector<LinearLayer> classifier;
    std::vector<LinearLayer> rest;
    bool has_mu = false, has_bottleneck = false;
    for (TaggedLayer& t : layers) {
        if (t.role == LayerRole::classifier) {
            if (!rest.empty()) throw FormatError(path.string() + ": classifier layer after perturbator");
            classifier.push_back(std::move(t.layer));
            continue;
        }
        has_mu = has_mu || t.role == LayerRole::mu_head;
        has_bottleneck = has_bottleneck || t.role == LayerRole::bottleneck;
        rest.push_back(std::move(t.layer));
    }
    if (classifier.empty()) throw FormatError(path.string() + ": checkpoint has no classifier");

    PladModel m;
    try {
        m.classifier = ClassifierNet(std::move(classifier));
        if (rest.empty()) {
            m.mode = PerturbatorMode::degradation;
        } else if (has_mu && rest.size() == 5) {
            m.mode = PerturbatorMode::vae;
            m.vae = VaePerturbator(rest[0], rest[1], rest[2], rest[3], rest[4]);
        } else if (has_bottleneck && rest.size() == 4) {
            m.mode = PerturbatorMode::ae;
            m.ae = AePerturbator(rest[0], rest[1], rest[2], rest[3]);
        } else {
            throw FormatError(path.string() + ": unrecognized perturbator layout");
        }
    } catch (const DimensionError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (m.vae && m.vae->dim() != m.input_dim()) {
        throw FormatError(path.string() + ": perturbator width differs from classifier input");
    }
    if (m.ae && m.ae->dim() != m.input_dim()) {
        throw FormatError(path.string() + ": perturbator width differs from classifier input");
    }
    return m;
}

}  // namespace plad
