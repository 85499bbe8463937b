#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "plad/errors.hpp"
#include "plad/eval.hpp"
#include "support.hpp"

using namespace plad;
using plad::testing::brute_force_auc;
using plad::testing::enumerated_f1;

namespace {

// Scores on a coarse grid so ties are common; both classes always present.
void random_instance(std::mt19937_64& rng, std::size_t n, std::vector<double>& scores,
                     std::vector<int>& labels) {
    std::uniform_int_distribution<int> level(0, 6);
    std::bernoulli_distribution coin(0.35);
    scores.assign(n, 0.0);
    labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = 0.25 * level(rng);
        labels[i] = coin(rng) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_SUITE("eval") {
    TEST_CASE("auc examples") {
        const std::vector<int> l{0, 0, 1, 1};
        CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, l) == 1.0);
        CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, l) == 0.5);
        CHECK(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, l) == 0.75);
        CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, l) == 0.0);
    }

    TEST_CASE("auc against brute force with ties") {
        std::mt19937_64 rng(2024);
        std::vector<double> s;
        std::vector<int> l;
        for (int k = 0; k < 200; ++k) {
            random_instance(rng, 5 + static_cast<std::size_t>(k % 40), s, l);
            CHECK(std::abs(roc_auc(s, l) - brute_force_auc(s, l)) <= 1e-12);
        }
    }

    TEST_CASE("auc invariances") {
        std::mt19937_64 rng(7);
        std::vector<double> s;
        std::vector<int> l;
        for (int k = 0; k < 50; ++k) {
            random_instance(rng, 30, s, l);
            std::vector<double> warped, negated;
            for (double v : s) {
                warped.push_back(std::exp(3 * v) - 5);
                negated.push_back(-v);
            }
            CHECK(roc_auc(warped, l) == doctest::Approx(roc_auc(s, l)).epsilon(1e-15));
            CHECK(roc_auc(s, l) + roc_auc(negated, l) == doctest::Approx(1.0).epsilon(1e-15));
        }
    }

    TEST_CASE("auc errors") {
        const std::vector<double> s{0.1, 0.2};
        CHECK_THROWS_AS(roc_auc(s, std::vector<int>{0, 0}), MetricError);
        CHECK_THROWS_AS(roc_auc(s, std::vector<int>{1, 1}), MetricError);
        CHECK_THROWS_AS(roc_auc(s, std::vector<int>{0}), MetricError);
        CHECK_THROWS_AS(roc_auc(s, std::vector<int>{0, 2}), MetricError);
        CHECK_THROWS_AS(roc_auc(std::vector<double>{NAN, 0.2}, std::vector<int>{0, 1}), MetricError);
    }

    TEST_CASE("f1 example") {
        // Top 2 are indices 3 and 2: one hit, one miss.
        const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
        const std::vector<int> l{0, 1, 0, 1};
        CHECK(f1_at_contamination(s, l, 0.5) == doctest::Approx(0.5));
    }

    TEST_CASE("f1 against an enumerated oracle") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> ratio(0.05, 1.0);
        std::vector<double> s;
        std::vector<int> l;
        for (int k = 0; k < 50; ++k) {
            const std::size_t n = 2 + static_cast<std::size_t>(k % 29);
            random_instance(rng, n, s, l);
            const double r = ratio(rng);
            CAPTURE(n);
            CAPTURE(r);
            CHECK(std::abs(f1_at_contamination(s, l, r) - enumerated_f1(s, l, r)) <= 1e-12);
            const auto idx = top_ratio_indices(s, r);
            CHECK(idx.size() == static_cast<std::size_t>(std::ceil(r * static_cast<double>(n))));
        }
    }

    TEST_CASE("f1 tie break prefers lower indices") {
        const std::vector<double> s{1.0, 1.0, 1.0, 0.0};
        CHECK(top_ratio_indices(s, 0.5) == std::vector<std::size_t>{0, 1});
        CHECK(f1_at_contamination(s, std::vector<int>{0, 0, 1, 1}, 0.5) == 0.0);
        CHECK(f1_at_contamination(s, std::vector<int>{1, 1, 0, 0}, 0.5) == 1.0);
    }

    TEST_CASE("f1 errors") {
        const std::vector<double> s{0.1, 0.2};
        const std::vector<int> l{0, 1};
        CHECK_THROWS_AS(f1_at_contamination(s, l, 0.0), ArgumentError);
        CHECK_THROWS_AS(f1_at_contamination(s, l, 1.5), ArgumentError);
        CHECK_THROWS_AS(f1_at_contamination(s, l, NAN), ArgumentError);
        CHECK_THROWS_AS(f1_at_contamination(s, std::vector<int>{0, 0}, 0.5), MetricError);
        CHECK(anomaly_fraction(std::vector<int>{0, 1, 1, 0}) == 0.5);
    }

    TEST_CASE("aggregation and formatting") {
        const std::vector<double> v{70, 72, 74, 76, 78};
        const MeanStd m = aggregate_runs(v);
        CHECK(m.mean == 74.0);
        CHECK(m.std == doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));
        CHECK(m.std == doctest::Approx(3.1623).epsilon(1e-4));
        CHECK(aggregate_runs(std::vector<double>{0.9}).std == 0.0);
        CHECK(format_mean_std(76.6, 0.6) == "76.6 ± 0.6");
        CHECK(format_mean_std(76.649, 0.04) == "76.6 ± 0.0");
        const EvalReport r = EvalReport::from_values("f1", {0.766, 0.766});
        CHECK(r.format() == "76.6 ± 0.0");
        CHECK_THROWS_AS(aggregate_runs(std::vector<double>{}), ArgumentError);
    }

    TEST_CASE("format_double round trips") {
        for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0}) {
            CHECK(std::stod(format_double(v)) == v);
        }
        CHECK(format_double(5) == "5");
    }

    TEST_CASE("score export") {
        plad::testing::TempDir dir("export");
        const std::vector<double> s{0.1, 1.0 / 3.0, 0.999999999999, 0.0, 0.5, 0.25, 0.75};
        const std::vector<int> l{0, 1, 0, 1, 0, 0, 1};
        CHECK(export_scores(dir / "s.csv", s, l) == 7);
        const auto lines = read_lines(dir / "s.csv");
        REQUIRE(lines.size() == 8);
        CHECK(lines[0] == "index,score,label");
        for (std::size_t i = 0; i < 7; ++i) {
            const auto a = lines[i + 1].find(',');
            const auto b = lines[i + 1].rfind(',');
            CHECK(std::stoul(lines[i + 1].substr(0, a)) == i);
            CHECK(std::stod(lines[i + 1].substr(a + 1, b - a - 1)) == s[i]);
            CHECK(std::stoi(lines[i + 1].substr(b + 1)) == l[i]);
        }
        CHECK_THROWS_AS(export_scores(dir / "nope" / "s.csv", s, l), IoError);
    }

    TEST_CASE("model exports") {
        plad::testing::TempDir dir("export_net");
        const ClassifierNet net = ClassifierNet::create(ClassifierNet::tabular_spec(3), 4);
        const Tensor x = plad::testing::uniform_tensor({7, 3}, 1);
        const std::vector<int> l{0, 1, 0, 1, 0, 0, 1};
        CHECK(export_scores(dir / "s.csv", net, x, l) == 7);
        const auto lines = read_lines(dir / "s.csv");
        const auto scores = net.scores(x);
        const auto& row = lines[3];
        const auto a = row.find(','), b = row.rfind(',');
        CHECK(std::stod(row.substr(a + 1, b - a - 1)) == scores[2]);

        CHECK(export_embeddings(dir / "e.csv", net, x, l) == 7);
        const auto emb = read_lines(dir / "e.csv");
        REQUIRE(emb.size() == 8);
        CHECK(std::count(emb[1].begin(), emb[1].end(), ',') == 21);  // index, 20 values, label
        CHECK(emb[0].rfind("index,e_1,", 0) == 0);
        CHECK_THROWS_AS(export_embeddings(dir / "nope" / "e.csv", net, x, l), IoError);
    }
}
