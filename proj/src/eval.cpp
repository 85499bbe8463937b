#include "plad/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "plad/errors.hpp"

namespace plad {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw MetricError("scores and labels differ in length (" + std::to_string(scores.size()) +
                          " vs " + std::to_string(labels.size()) + ")");
    }
    std::size_t pos = 0, neg = 0;
    for (int l : labels) {
        if (l == 1) ++pos;
        else if (l == 0) ++neg;
        else throw MetricError("labels must be 0 or 1, got " + std::to_string(l));
    }
    if (pos == 0 || neg == 0) throw MetricError("both classes must be present");
    for (double s : scores) {
        if (std::isnan(s)) throw MetricError("NaN score");
    }
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of midranks of the positives.
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += midrank;
                ++pos;
            }
        }
        i = j;
    }
    const double np = static_cast<double>(pos);
    const double nn = static_cast<double>(n - pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<std::size_t> top_ratio_indices(std::span<const double> scores, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ArgumentError("contamination ratio must lie in (0, 1], got " + std::to_string(ratio));
    }
    const std::size_t n = scores.size();
    auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
    k = std::min(k, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    return order;
}

double f1_at_contamination(std::span<const double> scores, std::span<const int> labels,
                           double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ArgumentError("contamination ratio must lie in (0, 1], got " + std::to_string(ratio));
    }
    check_inputs(scores, labels);
    const auto flagged = top_ratio_indices(scores, ratio);
    std::size_t tp = 0;
    for (std::size_t i : flagged) tp += labels[i] == 1;
    const std::size_t fp = flagged.size() - tp;
    const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t fn = positives - tp;
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

double anomaly_fraction(std::span<const int> labels) {
    if (labels.empty()) throw MetricError("no labels");
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    return static_cast<double>(pos) / static_cast<double>(labels.size());
}

MeanStd aggregate_runs(std::span<const double> values) {
    if (values.empty()) throw ArgumentError("aggregate_runs: no values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

std::string format_mean_std(double mean, double std, int precision) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(precision);
    os << mean << " ± " << std;
    return os.str();
}

EvalReport EvalReport::from_values(std::string metric, std::vector<double> values) {
    EvalReport r;
    r.metric = std::move(metric);
    r.values = std::move(values);
    if (!r.values.empty()) {
        const MeanStd s = aggregate_runs(r.values);
        r.mean = s.mean;
        r.std = s.std;
    }
    return r;
}

std::string EvalReport::format() const { return format_mean_std(100.0 * mean, 100.0 * std); }

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw InternalError("format_double failed");
    return std::string(buf, end);
}

std::size_t export_scores(const std::filesystem::path& path, std::span<const double> scores,
                          std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ArgumentError("export_scores: length mismatch");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << "index,score,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        os << i << ',' << format_double(scores[i]) << ',' << labels[i] << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
    return scores.size();
}

std::size_t export_scores(const std::filesystem::path& path, const ClassifierNet& net,
                          const Tensor& features, std::span<const int> labels, double leaky_slope) {
    const auto scores = net.scores(features, leaky_slope);
    return export_scores(path, scores, labels);
}

std::size_t export_embeddings(const std::filesystem::path& path, const ClassifierNet& net,
                              const Tensor& features, std::span<const int> labels,
                              double leaky_slope) {
    if (features.rows() != labels.size()) throw ArgumentError("export_embeddings: length mismatch");
    const Tensor e = net.embeddings(features, leaky_slope);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << "index";
    for (std::size_t j = 0; j < e.cols(); ++j) os << ",e_" << (j + 1);
    os << ",label\n";
    for (std::size_t i = 0; i < e.rows(); ++i) {
        os << i;
        for (double v : e.row(i)) os << ',' << format_double(v);
        os << ',' << labels[i] << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
    return e.rows();
}

}  // namespace plad
