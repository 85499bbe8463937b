#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "plad/classifier.hpp"
#include "plad/tensor.hpp"

namespace plad {

// Mann-Whitney AUC with midrank ties: P(score_pos > score_neg) + 0.5 P(equal).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Flags the top ceil(ratio * n) scores (descending score, then ascending
// index) as anomalies and returns the F1 of that labelling.
double f1_at_contamination(std::span<const double> scores, std::span<const int> labels,
                           double ratio);

// Indices flagged by f1_at_contamination, in flag order.
std::vector<std::size_t> top_ratio_indices(std::span<const double> scores, double ratio);

double anomaly_fraction(std::span<const int> labels);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

// Sample standard deviation (n - 1); zero for a single value.
MeanStd aggregate_runs(std::span<const double> values);

// "76.6 ± 0.6"
std::string format_mean_std(double mean, double std, int precision = 1);

struct EvalReport {
    std::string metric;  // "auc" or "f1"
    std::vector<double> values;
    double mean = 0.0;
    double std = 0.0;

    static EvalReport from_values(std::string metric, std::vector<double> values);
    // Values are fractions; rendered as percentages.
    std::string format() const;
};

// index,score,label per row; returns the number of data rows.
std::size_t export_scores(const std::filesystem::path& path, std::span<const double> scores,
                          std::span<const int> labels);
std::size_t export_scores(const std::filesystem::path& path, const ClassifierNet& net,
                          const Tensor& features, std::span<const int> labels,
                          double leaky_slope = 0.01);

// index,e_1..e_k,label with the classifier's penultimate activations.
std::size_t export_embeddings(const std::filesystem::path& path, const ClassifierNet& net,
                              const Tensor& features, std::span<const int> labels,
                              double leaky_slope = 0.01);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace plad
