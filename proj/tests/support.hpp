#pragma once

// Shared fixtures and oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "plad/autodiff.hpp"
#include "plad/tensor.hpp"
#include "plad/trainer.hpp"

namespace plad::testing {

inline Tensor uniform_tensor(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = u(rng);
    return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("plad_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// O(P*N) pair counting with ties worth one half.
inline double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

// Flags k = ceil(ratio * n) samples by repeatedly taking the highest remaining
// score, the lowest index among equal scores, then counts the confusion table.
inline double enumerated_f1(const std::vector<double>& scores, const std::vector<int>& labels,
                            double ratio) {
    const std::size_t n = scores.size();
    const auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
    std::vector<bool> flagged(n, false);
    for (std::size_t step = 0; step < std::min(k, n); ++step) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (flagged[i]) continue;
            if (best == n || scores[i] > scores[best]) best = i;
        }
        flagged[best] = true;
    }
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (flagged[i] && labels[i] == 1) ++tp;
        if (flagged[i] && labels[i] == 0) ++fp;
        if (!flagged[i] && labels[i] == 1) ++fn;
    }
    if (tp == 0) return 0.0;
    const double p = tp / static_cast<double>(tp + fp);
    const double r = tp / static_cast<double>(tp + fn);
    return 2.0 * p * r / (p + r);
}

// One differentiable op wrapped as a scalar function of a single input. The
// op output is contracted against a fixed random weighting so every element
// of the input gradient is exercised.
struct OpCase {
    std::string name;
    Shape input;
    std::function<Var(Var)> f;
};

inline Var contract(Var y, std::uint64_t seed) {
    const Tensor w = uniform_tensor(y.value().shape(), 1000 + seed, -1.0, 1.0);
    return sum(hadamard(y, y.tape().constant(w)));
}

inline std::vector<OpCase> op_cases() {
    const Tensor b34 = uniform_tensor({3, 4}, 11);
    const Tensor b45 = uniform_tensor({4, 5}, 12);
    const Tensor b54 = uniform_tensor({5, 4}, 13);
    const Tensor b4 = uniform_tensor({4}, 14);
    const Tensor b32 = uniform_tensor({3, 2}, 15);
    auto k = [](Var x, const Tensor& t) { return x.tape().constant(t); };
    return {
        {"matmul(x, B)", {3, 4}, [=](Var x) { return contract(matmul(x, k(x, b45)), 1); }},
        {"matmul(A, x)", {4, 5}, [=](Var x) { return contract(matmul(k(x, b34), x), 2); }},
        {"matmul_bt(x, B)", {3, 4}, [=](Var x) { return contract(matmul_bt(x, k(x, b54)), 3); }},
        {"matmul_bt(A, x)", {5, 4}, [=](Var x) { return contract(matmul_bt(k(x, b34), x), 4); }},
        {"add(x, B)", {3, 4}, [=](Var x) { return contract(add(x, k(x, b34)), 5); }},
        {"add(x, scalar)", {3, 4}, [=](Var x) { return contract(add(x, k(x, Tensor::scalar(0.7))), 6); }},
        {"add(scalar, B)", {1}, [=](Var x) { return contract(add(x, k(x, b34)), 7); }},
        {"add_bias(x, b)", {3, 4}, [=](Var x) { return contract(add_bias(x, k(x, b4)), 8); }},
        {"add_bias(A, x)", {4}, [=](Var x) { return contract(add_bias(k(x, b34), x), 9); }},
        {"hadamard", {3, 4}, [=](Var x) { return contract(hadamard(x, k(x, b34)), 10); }},
        {"hadamard(x, x)", {3, 4}, [=](Var x) { return contract(hadamard(x, x), 11); }},
        {"scale", {3, 4}, [=](Var x) { return contract(scale(x, -1.7), 12); }},
        {"leaky_relu", {3, 4}, [=](Var x) { return contract(leaky_relu(x, 0.01), 13); }},
        {"relu", {3, 4}, [=](Var x) { return contract(relu(x), 14); }},
        {"sigmoid", {3, 4}, [=](Var x) { return contract(sigmoid(x), 15); }},
        {"exp", {3, 4}, [=](Var x) { return contract(exp(x), 16); }},
        {"square", {3, 4}, [=](Var x) { return contract(square(x), 17); }},
        {"sum", {3, 4}, [=](Var x) { return sum(square(x)); }},
        {"mean", {3, 4}, [=](Var x) { return mean(hadamard(x, exp(x))); }},
        {"concat(x, B)", {3, 4}, [=](Var x) { return contract(concat(x, k(x, b32)), 18); }},
        {"concat(A, x)", {3, 2}, [=](Var x) { return contract(concat(k(x, b34), x), 19); }},
        {"split", {3, 4}, [=](Var x) { return contract(split(x, 1, 2), 20); }},
        {"bce_logits label 0", {3, 4}, [=](Var x) { return contract(bce_logits(x, 0.0), 21); }},
        {"bce_logits label 1", {3, 4}, [=](Var x) { return contract(bce_logits(x, 1.0), 22); }},
    };
}

// The full training loss as a function of one tensor: either the batch or a
// single parameter tensor of a small tabular model.
struct LossCase {
    std::string name;
    std::function<Tensor(PladModel&)> point;
    std::function<const Tensor*(PladModel&)> param;  // null: differentiate w.r.t. the batch
};

inline std::vector<LossCase> loss_cases() {
    auto layer = [](std::size_t k) {
        return [k](PladModel& m) -> const Tensor* { return &m.vae->layers()[k]->weight; };
    };
    auto point_of = [](auto getter) {
        return [getter](PladModel& m) { return *getter(m); };
    };
    auto cls0 = [](PladModel& m) -> const Tensor* { return &m.classifier.layers()[0].weight; };
    auto cls1b = [](PladModel& m) -> const Tensor* { return &*m.classifier.layers()[1].bias; };
    return {
        {"batch", nullptr, nullptr},
        {"classifier weight", point_of(cls0), cls0},
        {"classifier output bias", point_of(cls1b), cls1b},
        {"encoder weight", point_of(layer(0)), layer(0)},
        {"mu head weight", point_of(layer(1)), layer(1)},
        {"logvar head weight", point_of(layer(2)), layer(2)},
        {"decoder hidden weight", point_of(layer(3)), layer(3)},
        {"decoder output weight", point_of(layer(4)), layer(4)},
    };
}

// Worst relative error of the loss gradient over every loss case for one
// random point (batch, noise and model drawn from `seed`).
inline double loss_gradient_error(std::uint64_t seed, double lambda = 2.0) {
    constexpr std::size_t n = 4, d = 3;
    const Tensor batch = uniform_tensor({n, d}, 500 + seed);
    const Tensor noise = uniform_tensor({n, d}, 600 + seed, -1.0, 1.0);
    ArchitectureConfig arch = ArchitectureConfig::tabular();
    arch.classifier_hidden = {5};
    arch.perturbator_activation = Activation::leaky_relu;
    arch.classifier_activation = Activation::leaky_relu;
    PladModel model = PladModel::create(d, arch, PerturbatorMode::vae, seed);
    // Keep the perturbation small so exp(logvar) stays well conditioned.
    for (LinearLayer* l : model.vae->layers()) {
        for (double& w : l->weight.values()) w *= 0.3;
    }

    double worst = 0.0;
    for (const LossCase& c : loss_cases()) {
        const Tensor* target = c.param ? c.param(model) : nullptr;
        const Tensor point = c.point ? c.point(model) : batch;
        auto f = [&](Var x) {
            Tape& tape = x.tape();
            Binder binder(tape, false, arch.leaky_slope);
            if (target) binder.substitute(target, x);
            BoundModel bound = bind_model(model, binder);
            Var input = target ? tape.constant(batch) : x;
            return plad_batch_loss(bound, input, lambda, tape.constant(noise)).total;
        };
        worst = std::max(worst, grad_check(f, point, 1e-6));
    }
    return worst;
}

}  // namespace plad::testing
