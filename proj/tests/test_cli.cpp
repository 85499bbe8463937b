#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "plad/errors.hpp"
#include "plad/experiment.hpp"
#include "support.hpp"

using namespace plad;
using plad::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

// Value of `key = value` inside the [results] section.
std::string result_value(const std::filesystem::path& manifest, const std::string& key) {
    std::istringstream in(slurp(manifest));
    bool inside = false;
    for (std::string line; std::getline(in, line);) {
        if (line == "[results]") inside = true;
        else if (inside && line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
    }
    return {};
}

int run_cli(const std::string& args, const TempDir& dir) {
    const std::string cmd = std::string(PLAD_CLI_PATH) + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig blobs(const TempDir& dir) {
    ExperimentConfig c = preset_config("synthetic-blobs");
    c.eval.output_dir = dir / "out";
    return c;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("train on blobs, then rerun from the manifest") {
        TempDir dir("cli_train");
        ExperimentConfig c = blobs(dir);
        std::ostringstream out, err;
        const auto start = std::chrono::steady_clock::now();
        CHECK(run_command(Verb::train, c, out, err) == exit_code::ok);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        CHECK(seconds < 60.0);
        CHECK(err.str().empty());
        CHECK(out.str().find("auc\t") != std::string::npos);
        const auto manifest = dir / "out" / "manifest.cfg";
        REQUIRE(std::filesystem::exists(manifest));
        for (int r = 0; r < 5; ++r) {
            CHECK(std::filesystem::exists(dir / "out" / ("run" + std::to_string(r) + ".ckpt")));
            CHECK(count_lines(dir / "out" / ("run" + std::to_string(r) + ".log")) == 101);
        }
        CHECK(result_value(manifest, "run4_seed") == "4");
        CHECK_FALSE(result_value(manifest, "auc_mean").empty());

        ExperimentConfig again = parse_config(manifest, {"eval.output_dir=" + (dir / "again").string()});
        CHECK_NOTHROW(again.validate());
        std::ostringstream out2, err2;
        CHECK(run_command(Verb::train, again, out2, err2) == exit_code::ok);
        const auto manifest2 = dir / "again" / "manifest.cfg";
        for (const char* key : {"auc_mean", "auc_std", "f1_mean", "run0_auc", "run3_f1"}) {
            CAPTURE(key);
            CHECK(result_value(manifest2, key) == result_value(manifest, key));
        }
        CHECK(slurp(dir / "again" / "run2.log") == slurp(dir / "out" / "run2.log"));

        // eval and export on a saved checkpoint.
        ExperimentConfig ev = c;
        ev.eval.checkpoint = dir / "out" / "run0.ckpt";
        ev.eval.output_dir = dir / "eval";
        ev.eval.embeddings_path = dir / "eval" / "emb.csv";
        std::ostringstream o3, e3;
        CHECK(run_command(Verb::eval, ev, o3, e3) == exit_code::ok);
        CHECK(o3.str().find("auc\t" + result_value(manifest, "run0_auc")) != std::string::npos);
        std::ostringstream o4, e4;
        CHECK(run_command(Verb::export_scores, ev, o4, e4) == exit_code::ok);
        CHECK(count_lines(dir / "eval" / "scores.csv") == 201);  // 100 normals + 100 anomalies
        CHECK(count_lines(dir / "eval" / "emb.csv") == 201);

        // A checkpoint trained on 2 features cannot score 3.
        {
            std::ofstream csv(dir / "wide.csv");
            for (int i = 0; i < 20; ++i) csv << i << "," << i * 2 << "," << i % 3 << "," << (i < 4) << "\n";
        }
        ExperimentConfig wide = ev;
        wide.dataset.format = SourceKind::tabular_csv;
        wide.dataset.paths = {dir / "wide.csv"};
        std::ostringstream o5, e5;
        CHECK(run_command(Verb::eval, wide, o5, e5) == exit_code::data);
        CHECK(e5.str().find("error=data exit=2") == 0);

        std::ofstream cfg(dir / "wide.cfg");
        write_config(cfg, wide);
        cfg.close();
        CHECK(run_cli("eval -c " + (dir / "wide.cfg").string(), dir) == exit_code::data);
    }

    TEST_CASE("sweep writes one row per lambda plus degradation") {
        TempDir dir("cli_sweep");
        ExperimentConfig c = blobs(dir);
        c.training.epochs = 3;
        c.training.runs = 2;
        c.eval.lambdas = {0.5, 5, 50};
        std::ostringstream out, err;
        CHECK(run_command(Verb::sweep, c, out, err) == exit_code::ok);
        CHECK(count_lines(dir / "out" / "sweep.tsv") == 1 + 4);
        CHECK(out.str().find("degradation\t") != std::string::npos);
        CHECK(run_cli("sweep -p synthetic-blobs -s training.epochs=2 -s training.runs=1 -s eval.lambdas=1,2 -o " +
                          (dir / "bin").string(),
                      dir) == exit_code::ok);
        CHECK(count_lines(dir / "bin" / "sweep.tsv") == 1 + 3);
    }

    TEST_CASE("synth writes a loadable fixture") {
        TempDir dir("cli_synth");
        ExperimentConfig c = preset_config("synthetic-ring");
        c.eval.output_dir = dir.path();
        std::ostringstream out, err;
        CHECK(run_command(Verb::synth, c, out, err) == exit_code::ok);
        const Dataset d = load_tabular_csv(dir / "synthetic-ring.csv", false);
        CHECK(d.size() == 300);
        CHECK(d.features == gen_synthetic_2d({SyntheticKind::ring, 100, 0.1, 0}).features);
        CHECK(Manifest::read(dir / "synthetic-ring.manifest").get("seed") == "0");
        ExperimentConfig csv = c;
        csv.dataset.format = SourceKind::tabular_csv;
        csv.dataset.paths = {dir / "synthetic-ring.csv"};
        std::ostringstream o2, e2;
        CHECK(run_command(Verb::synth, csv, o2, e2) == exit_code::config);
    }

    TEST_CASE("exit codes from the binary") {
        TempDir dir("cli_exit");
        CHECK(run_cli("presets", dir) == 0);
        CHECK(slurp(dir / "stdout.txt").find("fmnist-trouser\n") != std::string::npos);
        CHECK(run_cli("train -p synthetic-blobs -s training.nope=1", dir) == exit_code::config);
        CHECK(slurp(dir / "stderr.txt").find("error=config exit=1") == 0);
        CHECK(run_cli("train --bogus", dir) == exit_code::config);
        {
            std::ofstream cfg(dir / "bad.cfg");
            cfg << "[training]\nepochs = 5\nlr = 3\n";
        }
        CHECK(run_cli("train -c " + (dir / "bad.cfg").string(), dir) == exit_code::config);
        CHECK(slurp(dir / "stderr.txt").find("line=3") != std::string::npos);
        CHECK(run_cli("train -s dataset.paths=" + (dir / "absent.csv").string(), dir) == exit_code::config);
        CHECK(run_cli("train -p synthetic-blobs -s training.optimizer=sgd -s training.learning_rate=1e300 "
                      "-s training.epochs=5 -s training.runs=2 -o " + (dir / "div").string(),
                      dir) == exit_code::divergence);
        CHECK(slurp(dir / "stderr.txt").find("error=divergence exit=3") == 0);
        {
            std::ofstream junk(dir / "junk.csv");
            junk << "1,2,0\n3\n";
        }
        CHECK(run_cli("train -s dataset.paths=" + (dir / "junk.csv").string(), dir) == exit_code::data);
    }

    TEST_CASE("failure descriptions") {
        std::string line;
        auto code = [&](auto e) { return describe_failure(std::make_exception_ptr(e), line); };
        CHECK(code(ConfigError("x", 7)) == 1);
        CHECK(line.find("line=7") != std::string::npos);
        CHECK(code(FormatError("f")) == 2);
        CHECK(code(IoError("f")) == 2);
        CHECK(code(DimensionError("f")) == 2);
        CHECK(code(DivergenceError("kl", "nan")) == 3);
        CHECK(code(NumericError("n")) == 3);
        CHECK(code(std::logic_error("?")) == 4);
        CHECK(code(FormatError("say \"hi\"")) == 2);
        CHECK(line.find("\\\"hi\\\"") != std::string::npos);
        CHECK(parse_verb("export") == Verb::export_scores);
        CHECK(verb_name(Verb::sweep) == "sweep");
    }
}
