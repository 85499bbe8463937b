#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "plad/data.hpp"
#include "plad/model.hpp"
#include "plad/trainer.hpp"

namespace plad {

// Where the samples come from. `synthetic` generates a 2D fixture in memory.
enum class SourceKind { tabular_csv, idx_images, cifar_binary, synthetic };

// tabular: random fraction of the normals trains; one_class: one image class
// is normal; multiclass: all classes are normal and anomalies are pair means.
enum class SplitKind { tabular, one_class, multiclass };

std::string_view source_name(SourceKind k);
std::string_view split_name(SplitKind k);

struct DatasetSection {
    std::string name = "unnamed";
    SourceKind format = SourceKind::tabular_csv;
    std::vector<std::filesystem::path> paths;       // csv, or train images+labels, or train batches
    std::vector<std::filesystem::path> test_paths;  // image formats only
    bool csv_header = false;
    SplitKind split = SplitKind::tabular;
    double train_fraction = 0.5;
    int normal_class = 0;
    std::uint64_t split_seed = 0;
    bool normalize = true;
    std::size_t n_train = 10000;
    std::size_t n_anom = 10000;
    SyntheticKind synthetic = SyntheticKind::two_blobs;
    std::size_t synthetic_n = 100;
    double synthetic_noise = 0.5;
    std::uint64_t synthetic_seed = 0;
};

struct EvalSection {
    std::string metric = "both";        // auc, f1 or both
    std::optional<double> f1_ratio;     // unset: test anomaly fraction
    std::vector<double> lambdas = default_lambda_grid();
    std::filesystem::path output_dir = "plad_out";
    std::filesystem::path checkpoint;   // eval and export
    std::filesystem::path scores_path;  // export; default output_dir/scores.csv
    std::filesystem::path embeddings_path;
};

struct ExperimentConfig {
    std::string preset;
    DatasetSection dataset;
    ArchitectureConfig model;
    TrainingConfig training;
    EvalSection eval;

    // Line on which each key was last set; 0 for presets and overrides.
    std::map<std::string, int> origin;

    // Paths present and readable, values in range.
    void validate() const;
};

std::vector<std::string> preset_names();
// Throws ConfigError for unknown names.
ExperimentConfig preset_config(std::string_view name);

// Sectioned `key = value` text; `#` starts a comment. A top-level `preset`
// key seeds the defaults. [results] is output-only and skipped. Relative paths
// resolve against `base_dir`.
ExperimentConfig parse_config_text(std::string_view text,
                                   const std::filesystem::path& base_dir = {},
                                   std::optional<std::string> preset = {});

// Reads the file, then applies `section.key=value` overrides in order.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::string>& overrides,
                              std::optional<std::string> preset = {});

void apply_override(ExperimentConfig& config, std::string_view assignment);

// Every key with its resolved value; parses back to the same config.
void write_config(std::ostream& os, const ExperimentConfig& config);

}  // namespace plad
