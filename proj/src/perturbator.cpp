#include "plad/perturbator.hpp"

#include "plad/errors.hpp"
#include "plad/random.hpp"

namespace plad {

namespace {

void require_width(const LinearLayer& layer, std::size_t in, std::size_t out, const char* name) {
    if (layer.in_dim() != in || layer.out_dim() != out) {
        throw DimensionError(std::string("perturbator ") + name + " must map " +
                             std::to_string(in) + " -> " + std::to_string(out) + ", got " +
                             shape_string(layer.weight.shape()));
    }
}

Var batch_scale(Var total, const Tensor& like) {
    return scale(total, 1.0 / static_cast<double>(like.rows()));
}

void require_dim(Var x, std::size_t d) {
    if (x.value().cols() != d) {
        throw DimensionError("perturbator expects input width " + std::to_string(d) + ", got " +
                             shape_string(x.value().shape()));
    }
}

}  // namespace

VaePerturbator::VaePerturbator(LinearLayer encoder, LinearLayer mu_head, LinearLayer logvar_head,
                               LinearLayer decoder_hidden, LinearLayer decoder_out)
    : encoder_(std::move(encoder)),
      mu_head_(std::move(mu_head)),
      logvar_head_(std::move(logvar_head)),
      decoder_hidden_(std::move(decoder_hidden)),
      decoder_out_(std::move(decoder_out)) {
    const std::size_t d = encoder_.in_dim();
    require_width(encoder_, d, d, "encoder");
    require_width(mu_head_, d, d, "mu head");
    require_width(logvar_head_, d, d, "logvar head");
    require_width(decoder_hidden_, d, d, "decoder hidden layer");
    require_width(decoder_out_, d, 2 * d, "decoder output layer");
    mu_head_.activation = Activation::none;
    logvar_head_.activation = Activation::none;
    decoder_out_.activation = Activation::none;
}

VaePerturbator VaePerturbator::create(std::size_t dim, Activation activation, std::uint64_t seed) {
    Engine seeds = make_engine({seed});
    auto enc = init_linear(dim, dim, true, activation, seeds());
    auto mu = init_linear(dim, dim, true, Activation::none, seeds());
    auto lv = init_linear(dim, dim, true, Activation::none, seeds());
    auto dh = init_linear(dim, dim, true, activation, seeds());
    auto dout = init_linear(dim, 2 * dim, true, Activation::none, seeds());
    return VaePerturbator(std::move(enc), std::move(mu), std::move(lv), std::move(dh),
                          std::move(dout));
}

std::vector<LinearLayer*> VaePerturbator::layers() {
    return {&encoder_, &mu_head_, &logvar_head_, &decoder_hidden_, &decoder_out_};
}

std::vector<const LinearLayer*> VaePerturbator::layers() const {
    return {&encoder_, &mu_head_, &logvar_head_, &decoder_hidden_, &decoder_out_};
}

VaePerturbator::Bound VaePerturbator::bind(Binder& binder) {
    Bound b;
    b.encoder = binder.bind(encoder_);
    b.mu_head = binder.bind(mu_head_);
    b.logvar_head = binder.bind(logvar_head_);
    b.decoder_hidden = binder.bind(decoder_hidden_);
    b.decoder_out = binder.bind(decoder_out_);
    b.dim = dim();
    return b;
}

PerturbationOutput VaePerturbator::Bound::forward(Var x, Var noise) const {
    require_dim(x, dim);
    if (noise.value().shape() != x.value().shape()) {
        throw ContractError("noise shape " + shape_string(noise.value().shape()) +
                            " does not match batch shape " + shape_string(x.value().shape()));
    }
    Var h = encoder(x);
    Var mu = mu_head(h);
    Var logvar = logvar_head(h);
    Var z = add(mu, hadamard(exp(scale(logvar, 0.5)), noise));
    Var out = decoder_out(decoder_hidden(z));
    return {split(out, 0, dim), split(out, dim, dim), mu, logvar, z};
}

PerturbationValues VaePerturbator::perturb(const Tensor& x, const Tensor& noise,
                                           double leaky_slope) const {
    Tape tape;
    Binder binder(tape, false, leaky_slope);
    VaePerturbator copy = *this;
    auto out = copy.bind(binder).forward(tape.constant(x), tape.constant(noise));
    return {out.alpha.value(), out.beta.value(), out.mu.value(), out.logvar.value(),
            out.z.value()};
}

AePerturbator::AePerturbator(LinearLayer encoder, LinearLayer bottleneck,
                             LinearLayer decoder_hidden, LinearLayer decoder_out)
    : encoder_(std::move(encoder)),
      bottleneck_(std::move(bottleneck)),
      decoder_hidden_(std::move(decoder_hidden)),
      decoder_out_(std::move(decoder_out)) {
    const std::size_t d = encoder_.in_dim();
    require_width(encoder_, d, d, "encoder");
    require_width(bottleneck_, d, d, "bottleneck");
    require_width(decoder_hidden_, d, d, "decoder hidden layer");
    require_width(decoder_out_, d, 2 * d, "decoder output layer");
    bottleneck_.activation = Activation::none;
    decoder_out_.activation = Activation::none;
}

AePerturbator AePerturbator::create(std::size_t dim, Activation activation, std::uint64_t seed) {
    Engine seeds = make_engine({seed});
    auto enc = init_linear(dim, dim, true, activation, seeds());
    auto mid = init_linear(dim, dim, true, Activation::none, seeds());
    auto dh = init_linear(dim, dim, true, activation, seeds());
    auto dout = init_linear(dim, 2 * dim, true, Activation::none, seeds());
    return AePerturbator(std::move(enc), std::move(mid), std::move(dh), std::move(dout));
}

std::vector<LinearLayer*> AePerturbator::layers() {
    return {&encoder_, &bottleneck_, &decoder_hidden_, &decoder_out_};
}

std::vector<const LinearLayer*> AePerturbator::layers() const {
    return {&encoder_, &bottleneck_, &decoder_hidden_, &decoder_out_};
}

AePerturbator::Bound AePerturbator::bind(Binder& binder) {
    Bound b;
    b.encoder = binder.bind(encoder_);
    b.bottleneck = binder.bind(bottleneck_);
    b.decoder_hidden = binder.bind(decoder_hidden_);
    b.decoder_out = binder.bind(decoder_out_);
    b.dim = dim();
    return b;
}

std::pair<Var, Var> AePerturbator::Bound::forward(Var x) const {
    require_dim(x, dim);
    Var out = decoder_out(decoder_hidden(bottleneck(encoder(x))));
    return {split(out, 0, dim), split(out, dim, dim)};
}

std::pair<Tensor, Tensor> AePerturbator::perturb(const Tensor& x, double leaky_slope) const {
    Tape tape;
    Binder binder(tape, false, leaky_slope);
    AePerturbator copy = *this;
    auto [alpha, beta] = copy.bind(binder).forward(tape.constant(x));
    return {alpha.value(), beta.value()};
}

Var apply_perturbation(Var x, Var alpha, Var beta) {
    if (x.value().shape() != alpha.value().shape() || x.value().shape() != beta.value().shape()) {
        throw DimensionError("apply_perturbation: shapes " + shape_string(x.value().shape()) + ", " +
                             shape_string(alpha.value().shape()) + ", " +
                             shape_string(beta.value().shape()) + " differ");
    }
    return add(hadamard(x, alpha), beta);
}

Tensor apply_perturbation(const Tensor& x, const Tensor& alpha, const Tensor& beta) {
    if (x.shape() != alpha.shape() || x.shape() != beta.shape()) {
        throw DimensionError("apply_perturbation: shapes " + shape_string(x.shape()) + ", " +
                             shape_string(alpha.shape()) + ", " + shape_string(beta.shape()) +
                             " differ");
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        // -0.0 + 0.0 is +0.0, so a zero shift is skipped to keep x * 1 + 0 bit-exact.
        out[i] = x[i] * alpha[i];
        if (beta[i] != 0.0) out[i] += beta[i];
    }
    return out;
}

Var kl_standard_normal(Var mu, Var logvar) {
    if (mu.value().shape() != logvar.value().shape()) {
        throw DimensionError("kl_standard_normal: mu " + shape_string(mu.value().shape()) +
                             " vs logvar " + shape_string(logvar.value().shape()));
    }
    Tape& t = mu.tape();
    // mu^2 + exp(logvar) - 1 - logvar, summed and halved.
    Var terms = add(add(square(mu), exp(logvar)), scale(add(logvar, t.constant(Tensor::scalar(1.0))), -1.0));
    return scale(batch_scale(sum(terms), mu.value()), 0.5);
}

double kl_standard_normal(const Tensor& mu, const Tensor& logvar) {
    Tape tape;
    return kl_standard_normal(tape.constant(mu), tape.constant(logvar)).value().item();
}

Var reconstruction_penalty(Var alpha, Var beta) {
    if (alpha.value().shape() != beta.value().shape()) {
        throw DimensionError("reconstruction_penalty: alpha " + shape_string(alpha.value().shape()) +
                             " vs beta " + shape_string(beta.value().shape()));
    }
    Tape& t = alpha.tape();
    Var off = add(alpha, t.constant(Tensor::scalar(-1.0)));
    return batch_scale(add(sum(square(off)), sum(square(beta))), alpha.value());
}

double reconstruction_penalty(const Tensor& alpha, const Tensor& beta) {
    Tape tape;
    return reconstruction_penalty(tape.constant(alpha), tape.constant(beta)).value().item();
}

}  // namespace plad
