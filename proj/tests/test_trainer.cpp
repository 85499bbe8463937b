#include <doctest.h>

#include <cmath>

#include "plad/config.hpp"
#include "plad/errors.hpp"
#include "plad/trainer.hpp"
#include "support.hpp"

using namespace plad;
using plad::testing::uniform_tensor;

namespace {

double recombined(const LossBreakdown& l, double lambda) {
    return l.bce_normal + l.bce_perturbed + l.kl + lambda * l.recon;
}

struct BlobSetup {
    TrainingConfig training;
    ArchitectureConfig arch;
    OneClassSplit split;
};

BlobSetup blobs() {
    const ExperimentConfig c = preset_config("synthetic-blobs");
    SyntheticSpec spec;
    spec.kind = c.dataset.synthetic;
    spec.n = c.dataset.synthetic_n;
    spec.noise = c.dataset.synthetic_noise;
    spec.seed = c.dataset.synthetic_seed;
    return {c.training, c.model,
            tabular_ad_split(gen_synthetic_2d(spec), c.dataset.train_fraction, c.dataset.split_seed)};
}

std::vector<Tensor> parameters_of(PladModel& m) {
    Tape tape;
    Binder binder(tape, false);
    bind_model(m, binder);
    std::vector<Tensor> out;
    for (const Tensor* p : binder.parameters()) out.push_back(*p);
    return out;
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("identity perturbator and zero classifier give 2 ln 2") {
        PladModel m = PladModel::create(3, ArchitectureConfig::tabular(), PerturbatorMode::vae, 0);
        for (LinearLayer& l : m.classifier.layers()) {
            for (double& w : l.weight.values()) w = 0.0;
        }
        for (LinearLayer* l : m.vae->layers()) {
            for (double& w : l->weight.values()) w = 0.0;
            for (double& b : l->bias->values()) b = 0.0;
        }
        for (std::size_t j = 0; j < 3; ++j) m.vae->layers()[4]->bias->values()[j] = 1.0;
        const Tensor x = uniform_tensor({5, 3}, 1);
        const LossBreakdown l = plad_batch_loss(m, x, 7.0, uniform_tensor({5, 3}, 2));
        CHECK(l.total == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
        CHECK(l.total == doctest::Approx(1.386294).epsilon(1e-6));
        CHECK(l.kl == 0.0);
        CHECK(l.recon == 0.0);
    }

    TEST_CASE("lambda zero and the decomposition identity") {
        PladModel m = PladModel::create(4, ArchitectureConfig::tabular(), PerturbatorMode::vae, 5);
        const Tensor x = uniform_tensor({6, 4}, 3, 0.0, 1.0);
        const Tensor noise = uniform_tensor({6, 4}, 4, -1.0, 1.0);
        const LossBreakdown zero = plad_batch_loss(m, x, 0.0, noise);
        CHECK(zero.total == zero.bce_normal + zero.bce_perturbed + zero.kl);
        CHECK(zero.recon > 0.0);
        for (double lambda : {0.1, 3.0, 100.0}) {
            const LossBreakdown l = plad_batch_loss(m, x, lambda, noise);
            CHECK(std::abs(l.total - recombined(l, lambda)) <= 1e-10);
        }
    }

    TEST_CASE("degradation ignores lambda and ae has no kl") {
        PladModel d = PladModel::create(4, ArchitectureConfig::tabular(), PerturbatorMode::degradation, 1);
        const Tensor x = uniform_tensor({6, 4}, 3);
        const Tensor s = Tensor::scalar(0.0);
        const LossBreakdown a = plad_batch_loss(d, x, 0.0, s);
        const LossBreakdown b = plad_batch_loss(d, x, 50.0, s);
        CHECK(a.total == b.total);
        CHECK(a.total == a.bce_normal);
        CHECK(a.bce_perturbed == 0.0);

        PladModel ae = PladModel::create(4, ArchitectureConfig::tabular(), PerturbatorMode::ae, 1);
        const LossBreakdown c = plad_batch_loss(ae, x, 2.0, s);
        CHECK(c.kl == 0.0);
        CHECK(c.bce_perturbed > 0.0);
        CHECK(std::abs(c.total - recombined(c, 2.0)) <= 1e-10);
    }

    TEST_CASE("gradients reach classifier and perturbator") {
        PladModel m = PladModel::create(3, ArchitectureConfig::tabular(), PerturbatorMode::vae, 2);
        Tape tape;
        Binder binder(tape, true);
        BoundModel bound = bind_model(m, binder);
        BatchLoss loss = plad_batch_loss(bound, tape.constant(uniform_tensor({4, 3}, 1, 0.0, 1.0)),
                                         1.0, tape.constant(uniform_tensor({4, 3}, 2)));
        const auto grads = binder.gradients(tape.backward(loss.total));
        REQUIRE(grads.size() == 4 + 10);
        auto norm = [](const Tensor& t) {
            double s = 0.0;
            for (double v : t.values()) s += v * v;
            return s;
        };
        CHECK(norm(grads[0]) > 0.0);   // classifier input weight
        CHECK(norm(grads[4]) > 0.0);   // encoder
        CHECK(norm(grads[8]) > 0.0);   // logvar head
        CHECK(norm(grads[12]) > 0.0);  // decoder output
    }

    TEST_CASE("end-to-end loss gradient") {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            CHECK(plad::testing::loss_gradient_error(seed) < 1e-4);
        }
    }

    TEST_CASE("same seed reruns are bit identical") {
        BlobSetup s = blobs();
        s.training.epochs = 5;
        const TrainResult a = train_run(s.training, s.arch, s.split.train);
        const TrainResult b = train_run(s.training, s.arch, s.split.train);
        REQUIRE(a.epochs.size() == 5);
        for (std::size_t e = 0; e < 5; ++e) {
            CHECK(a.epochs[e].loss.total == b.epochs[e].loss.total);
            CHECK(a.epochs[e].loss.kl == b.epochs[e].loss.kl);
        }
        PladModel ma = a.model, mb = b.model;
        CHECK(parameters_of(ma) == parameters_of(mb));
    }

    TEST_CASE("batch order changes parameters, identity holds every epoch") {
        BlobSetup s = blobs();
        s.training.epochs = 5;
        TrainingConfig other = s.training;
        other.shuffle_seed = 99;
        TrainResult a = train_run(s.training, s.arch, s.split.train);
        TrainResult b = train_run(other, s.arch, s.split.train);
        CHECK_FALSE(parameters_of(a.model) == parameters_of(b.model));
        for (const auto* r : {&a, &b}) {
            for (const EpochStats& e : r->epochs) {
                CHECK(std::abs(e.loss.total - recombined(e.loss, s.training.lambda)) <= 1e-10);
            }
        }
    }

    TEST_CASE("epoch callback sees every epoch") {
        BlobSetup s = blobs();
        s.training.epochs = 3;
        std::vector<std::size_t> seen;
        train_run(s.training, s.arch, s.split.train, [&](const EpochStats& e) { seen.push_back(e.epoch); });
        CHECK(seen == std::vector<std::size_t>{0, 1, 2});
    }

    TEST_CASE("loss mostly decreases over the first epochs on blobs") {
        BlobSetup s = blobs();
        s.training.epochs = 11;
        const TrainResult r = train_run(s.training, s.arch, s.split.train);
        int down = 0;
        for (std::size_t e = 1; e < r.epochs.size(); ++e) {
            if (r.epochs[e].loss.total <= r.epochs[e - 1].loss.total) ++down;
        }
        CHECK(down >= 8);
    }

    TEST_CASE("blobs are detected at lambda 5") {
        BlobSetup s = blobs();
        s.training.lambda = 5.0;
        s.training.epochs = 100;
        s.training.seed = 0;
        const TrainResult r = train_run(s.training, s.arch, s.split.train);
        const RunMetrics m = evaluate_model(r.model, s.split, 0.5, s.arch.leaky_slope);
        MESSAGE("blob AUC at lambda 5: " << m.auc);
        CHECK(m.auc > 0.8);
    }

    TEST_CASE("degradation model on blobs") {
        BlobSetup s = blobs();
        s.training.mode = PerturbatorMode::degradation;
        s.training.epochs = 100;
        s.training.seed = 0;
        const TrainResult r = train_run(s.training, s.arch, s.split.train);
        const RunMetrics m = evaluate_model(r.model, s.split, 0.5, s.arch.leaky_slope);
        MESSAGE("degradation blob AUC: " << m.auc);
        CHECK(m.auc >= 0.35);
        CHECK(m.auc <= 0.65);
    }

    TEST_CASE("divergence names the component") {
        BlobSetup s = blobs();
        s.training.optimizer = OptimizerKind::sgd;
        s.training.learning_rate = 1e300;
        s.training.epochs = 20;
        try {
            train_run(s.training, s.arch, s.split.train);
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK_FALSE(e.component().empty());
            CHECK(std::string(e.what()).find("diverged") != std::string::npos);
        }
        s.training.runs = 3;
        CHECK_THROWS_AS(multi_run_protocol(s.training, s.arch, s.split), NumericError);
    }

    TEST_CASE("multi-run protocol") {
        BlobSetup s = blobs();
        s.training.epochs = 3;
        s.training.runs = 1;
        s.training.seed = 10;
        const MultiRunResult one = multi_run_protocol(s.training, s.arch, s.split);
        CHECK(one.auc.std == 0.0);
        CHECK(one.runs.at(0).seed == 10);
        CHECK(one.f1_ratio == doctest::Approx(0.5));

        s.training.runs = 3;
        const MultiRunResult three = multi_run_protocol(s.training, s.arch, s.split, {0.25, false, 2});
        REQUIRE(three.runs.size() == 3);
        CHECK(three.runs[2].seed == 12);
        CHECK(three.runs[0].metrics.auc == one.runs[0].metrics.auc);
        CHECK(three.f1_ratio == 0.25);
        CHECK(three.auc.values.size() == 3);
        const MeanStd check = aggregate_runs(three.auc.values);
        CHECK(std::abs(check.mean - three.auc.mean) <= 1e-12);
        // Thread count does not change results.
        const MultiRunResult serial = multi_run_protocol(s.training, s.arch, s.split, {0.25, false, 1});
        CHECK(serial.auc.values == three.auc.values);
    }

    TEST_CASE("lambda sweep shape") {
        BlobSetup s = blobs();
        s.training.epochs = 2;
        s.training.runs = 2;
        const auto rows = lambda_sweep(s.training, s.arch, s.split, default_lambda_grid());
        CHECK(rows.size() == default_lambda_grid().size() + 1);
        int degradation = 0;
        for (const SweepRow& r : rows) degradation += !r.lambda.has_value();
        CHECK(degradation == 1);
        CHECK_FALSE(rows.back().lambda.has_value());
        CHECK(rows.back().label() == "degradation");
        CHECK(rows.front().label() == "0.1");
        CHECK(lambda_sweep(s.training, s.arch, s.split, {1.0}).size() == 2);
        CHECK_THROWS_AS(lambda_sweep(s.training, s.arch, s.split, {}), ArgumentError);
    }

    TEST_CASE("config validation") {
        TrainingConfig c;
        c.lambda = -1;
        CHECK_THROWS_AS(c.validate(), ArgumentError);
        c = TrainingConfig{};
        c.epochs = 0;
        CHECK_THROWS_AS(c.validate(), ArgumentError);
        c = TrainingConfig{};
        c.runs = 0;
        CHECK_THROWS_AS(c.validate(), ArgumentError);
    }

    TEST_CASE("epoch log line") {
        std::ostringstream os;
        EpochStats s{3, {1.5, 0.5, 0.25, 0.125, 0.0625}};
        write_epoch_line(os, s);
        CHECK(os.str() == "3\t1.5\t0.5\t0.25\t0.125\t0.0625\n");
    }
}
