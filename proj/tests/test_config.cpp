#include <doctest.h>

#include <fstream>
#include <sstream>

#include "plad/config.hpp"
#include "plad/errors.hpp"
#include "support.hpp"

using namespace plad;
using plad::testing::TempDir;

namespace {

int line_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

void touch(const std::filesystem::path& p) { std::ofstream(p) << "1,0\n"; }

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults plus one path are valid") {
        TempDir dir("cfg");
        touch(dir / "d.csv");
        const ExperimentConfig c = parse_config_text("[dataset]\npaths = d.csv\n", dir.path());
        CHECK(c.dataset.paths.at(0) == dir / "d.csv");
        CHECK_NOTHROW(c.validate());
        CHECK(c.training.runs == 5);
        CHECK(c.training.epochs == 100);
        CHECK(c.model.classifier_hidden == std::vector<std::size_t>{20});
        CHECK(c.eval.lambdas == default_lambda_grid());

        const ExperimentConfig empty = parse_config_text("", dir.path());
        CHECK_THROWS_AS(empty.validate(), ConfigError);
    }

    TEST_CASE("tabular presets") {
        const ExperimentConfig t = preset_config("thyroid");
        CHECK(t.training.lambda == 3.0);
        CHECK(t.training.optimizer == OptimizerKind::adam);
        CHECK(t.training.learning_rate == 0.001);
        CHECK(t.training.batch_size == 200);
        CHECK(t.training.epochs == 100);
        CHECK(t.training.runs == 5);
        CHECK(t.model.classifier_hidden == std::vector<std::size_t>{20});
        CHECK(t.dataset.split == SplitKind::tabular);
        const ExperimentConfig a = preset_config("arrhythmia");
        CHECK(a.training.lambda == 2.0);
        CHECK(a.training.learning_rate == 0.001);
    }

    TEST_CASE("image presets") {
        const ExperimentConfig tr = preset_config("fmnist-trouser");
        CHECK(tr.dataset.normal_class == 1);
        CHECK(tr.training.lambda == 5.0);
        CHECK(tr.training.optimizer == OptimizerKind::sgd);
        CHECK(tr.training.learning_rate == 0.005);
        CHECK(tr.dataset.split == SplitKind::one_class);
        CHECK(tr.model.classifier_hidden == std::vector<std::size_t>{128, 64});
        CHECK_FALSE(tr.model.classifier_bias);
        CHECK(preset_config("fmnist-sneaker").training.lambda == 15.0);
        CHECK(preset_config("fmnist-sneaker").training.learning_rate == 0.002);
        CHECK(preset_config("fmnist-ankle-boot").dataset.normal_class == 9);
        const ExperimentConfig frog = preset_config("cifar10-frog");
        CHECK(frog.training.optimizer == OptimizerKind::adam);
        CHECK(frog.training.learning_rate == 0.0001);
        CHECK(frog.dataset.format == SourceKind::cifar_binary);
        CHECK(preset_config("cifar10-bird").training.lambda == 50.0);
        CHECK(preset_config("fmnist-multiclass").dataset.split == SplitKind::multiclass);
        CHECK(preset_names().size() == 25);
        CHECK_THROWS_AS(preset_config("mnist"), ConfigError);
    }

    TEST_CASE("errors report the offending line") {
        CHECK(line_of([] { parse_config_text("[training]\nlambda = 1\nlamda = 2\n"); }) == 3);
        CHECK(line_of([] { parse_config_text("[training]\n\nepochs = many\n"); }) == 3);
        CHECK(line_of([] { parse_config_text("# comment\n[bogus]\n"); }) == 2);
        CHECK(line_of([] { parse_config_text("lambda = 1\n"); }) == 1);
        CHECK(line_of([] { parse_config_text("[training]\nseed\n"); }) == 2);
        CHECK(line_of([] { parse_config_text("[training]\nepochs = -3\n"); }) == 2);
        CHECK(line_of([] { parse_config_text("[dataset]\nnormalize = maybe\n"); }) == 2);
        CHECK(line_of([] { parse_config_text("preset = nothing\n"); }) == 1);
    }

    TEST_CASE("validation points at the line that set the value") {
        TempDir dir("cfg_val");
        const ExperimentConfig c =
            parse_config_text("[dataset]\npaths = missing.csv\n[training]\nruns = 0\n", dir.path());
        CHECK(line_of([&] { c.validate(); }) == 2);
        touch(dir / "missing.csv");
        CHECK(line_of([&] { c.validate(); }) == 4);
        const ExperimentConfig img =
            parse_config_text("[dataset]\nformat = idx_images\npaths = a, b\n", dir.path());
        CHECK_THROWS_AS(img.validate(), ConfigError);
    }

    TEST_CASE("preset in file and on the command line") {
        const ExperimentConfig f = parse_config_text("preset = synthetic-ring\n[training]\nruns = 2\n");
        CHECK(f.dataset.synthetic == SyntheticKind::ring);
        CHECK(f.training.runs == 2);
        CHECK(f.training.epochs == 200);
        const ExperimentConfig cli =
            parse_config_text("preset = synthetic-ring\n", {}, std::string("synthetic-blobs"));
        CHECK(cli.dataset.synthetic == SyntheticKind::two_blobs);
        CHECK_NOTHROW(f.validate());
    }

    TEST_CASE("overrides") {
        ExperimentConfig c = preset_config("thyroid");
        apply_override(c, "training.lambda=0.5");
        apply_override(c, "eval.lambdas=1, 2,4");
        apply_override(c, "eval.f1_ratio=0.1");
        apply_override(c, "model.mode=ae");
        CHECK(c.training.lambda == 0.5);
        CHECK(c.eval.lambdas == std::vector<double>{1, 2, 4});
        CHECK(c.eval.f1_ratio == 0.1);
        CHECK(c.training.mode == PerturbatorMode::ae);
        apply_override(c, "eval.f1_ratio=auto");
        CHECK_FALSE(c.eval.f1_ratio.has_value());
        CHECK_THROWS_AS(apply_override(c, "lambda=1"), ConfigError);
        CHECK_THROWS_AS(apply_override(c, "training.nope=1"), ConfigError);
        CHECK_THROWS_AS(apply_override(c, "training.epochs=x"), ConfigError);
        CHECK(c.origin.at("training.lambda") == 0);

        TempDir dir("cfg_ovr");
        {
            std::ofstream os(dir / "c.cfg");
            os << "preset = synthetic-blobs\n[training]\nseed = 4\n";
        }
        const ExperimentConfig p = parse_config(dir / "c.cfg", {"training.seed=9"});
        CHECK(p.training.seed == 9);
        CHECK_THROWS_AS(parse_config(dir / "none.cfg", {}), ConfigError);
    }

    TEST_CASE("written configs parse back to the same values") {
        TempDir dir("cfg_rt");
        touch(dir / "d.csv");
        ExperimentConfig c = preset_config("arrhythmia");
        c.dataset.paths = {dir / "d.csv"};
        c.training.learning_rate = 0.1 + 0.2;
        c.eval.f1_ratio = 1.0 / 7.0;
        c.model.classifier_hidden = {7, 3};
        c.eval.output_dir = dir / "out";
        std::ostringstream os;
        write_config(os, c);
        const std::string text = os.str();
        const ExperimentConfig r = parse_config_text(text + "\n[results]\nauc = whatever\nnot a pair\n");
        std::ostringstream again;
        write_config(again, r);
        CHECK(again.str() == text);
        CHECK(r.training.learning_rate == c.training.learning_rate);
        CHECK(r.eval.f1_ratio == c.eval.f1_ratio);
        CHECK(r.dataset.paths == c.dataset.paths);
        CHECK(r.preset == "arrhythmia");
    }
}
