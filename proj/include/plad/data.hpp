#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plad/tensor.hpp"

namespace plad {

enum class DatasetKind { tabular, image };

struct ImageDims {
    std::size_t channels = 1;
    std::size_t height = 0;
    std::size_t width = 0;
};

struct DatasetMeta {
    std::string name;
    DatasetKind kind = DatasetKind::tabular;
    std::optional<ImageDims> image;
};

struct Dataset {
    Tensor features;  // (n, d)
    std::vector<int> labels;
    DatasetMeta meta;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
    void validate() const;
};

struct OneClassSplit {
    Tensor train;
    Tensor test_features;
    std::vector<int> test_labels;  // 0 normal, 1 abnormal
};

enum class DataFormat { tabular_csv, idx_images, cifar_binary };

std::string_view format_name(DataFormat f);
DataFormat parse_format(std::string_view name);

// tabular_csv: paths = {csv}; idx_images: {images, labels}; cifar_binary: one
// or more batch files concatenated in order.
Dataset load_dataset(DataFormat format, const std::vector<std::filesystem::path>& paths,
                     bool csv_header = false);

// Feature columns followed by an integer label column.
Dataset load_tabular_csv(const std::filesystem::path& path, bool has_header);
// Big-endian IDX; pixels scaled by 1/255 and flattened row-major.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// 3073-byte records: label byte then 3 planes of 32x32.
Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths);

void write_tabular_csv(const std::filesystem::path& path, const Dataset& data, bool header = false);
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Dataset& data);
void write_cifar_binary(const std::filesystem::path& path, const Dataset& data);

struct Normalized {
    Tensor train;
    std::vector<Tensor> others;
    std::vector<double> minimum;
    std::vector<double> maximum;
};

// Per-feature min-max from train, applied to every matrix; constant
// features map to 0. No clamping.
Normalized normalize_features(const Tensor& train, const std::vector<Tensor>& others);

// Train keeps only normal_class from the train set; the whole test set is
// relabelled 0 for normal_class and 1 otherwise.
OneClassSplit one_class_split(const Dataset& train, const Dataset& test, int normal_class);

// A random train_fraction of the normals trains; the rest of the normals plus
// every anomaly form the test set. Labels must be 0/1.
OneClassSplit tabular_ad_split(const Dataset& data, double train_fraction, std::uint64_t seed);

struct MulticlassBenchmark {
    OneClassSplit split;
    std::vector<std::size_t> train_indices;
    std::vector<std::pair<std::size_t, std::size_t>> anomaly_pairs;  // test indices
};

// Normal training data drawn across all classes; anomalies are pixel means of
// random test pairs appended (label 1) to the whole test split (label 0).
MulticlassBenchmark synthesize_multiclass_benchmark(const Dataset& train, const Dataset& test,
                                                    std::size_t n_train, std::size_t n_anom,
                                                    std::uint64_t seed);

enum class SyntheticKind { two_blobs, ring };

std::string_view synthetic_name(SyntheticKind k);
SyntheticKind parse_synthetic(std::string_view name);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::two_blobs;
    std::size_t n = 100;
    double noise = 0.5;
    std::uint64_t seed = 0;
};

// 2n normals (label 0) followed by n anomalies (label 1). With the default
// half split, n normals train and the remaining n face n anomalies.
//   two_blobs: normals ~ N((0,0), s^2 I), anomalies ~ N((4,4), s^2 I)
//   ring: normals at radius 1 + s*N(0,1); anomalies half at the centre
//         ~ N(0, s^2 I), half at radius 3 + s*N(0,1)
Dataset gen_synthetic_2d(const SyntheticSpec& spec);

// key: value lines.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> entries;

    void set(std::string key, std::string value);
    std::optional<std::string> get(std::string_view key) const;
    void write(const std::filesystem::path& path) const;
    static Manifest read(const std::filesystem::path& path);
};

}  // namespace plad
