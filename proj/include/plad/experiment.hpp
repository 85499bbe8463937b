#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <string_view>

#include "plad/config.hpp"

namespace plad {

enum class Verb { train, eval, sweep, synth, export_scores };

std::string_view verb_name(Verb v);
Verb parse_verb(std::string_view name);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 1;
inline constexpr int data = 2;
inline constexpr int divergence = 3;
inline constexpr int internal = 4;
}  // namespace exit_code

struct PreparedData {
    OneClassSplit split;
    Manifest notes;  // name, split kind, seeds, counts
};

// Loads or generates the dataset and applies the configured split.
PreparedData prepare_data(const ExperimentConfig& config);

// Runs a verb, writing artifacts under eval.output_dir. Throws on failure.
void run_verb(Verb verb, const ExperimentConfig& config, std::ostream& out);

// Exit code for an in-flight exception, with a one-line reason such as
//   error=data exit=2 message="..."
int describe_failure(std::exception_ptr error, std::string& line);

// run_verb with failures mapped to exit codes and reported on `err`.
int run_command(Verb verb, const ExperimentConfig& config, std::ostream& out, std::ostream& err);

}  // namespace plad
