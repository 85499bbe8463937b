#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "plad/data.hpp"
#include "plad/errors.hpp"
#include "plad/eval.hpp"
#include "plad/model.hpp"

namespace plad {

struct TrainingConfig {
    double lambda = 1.0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 200;
    std::uint64_t seed = 0;
    std::size_t runs = 5;
    PerturbatorMode mode = PerturbatorMode::vae;
    double sgd_momentum = 0.0;
    std::optional<std::uint64_t> shuffle_seed;  // batch order only; defaults to seed

    void validate() const;
    OptimizerConfig optimizer_config() const;
};

struct LossBreakdown {
    double total = 0.0;
    double bce_normal = 0.0;
    double bce_perturbed = 0.0;
    double kl = 0.0;
    double recon = 0.0;
};

struct EpochStats {
    std::size_t epoch = 0;
    LossBreakdown loss;  // sample-weighted means over the epoch
};

// A loss component became non-finite.
class DivergenceError : public NumericError {
public:
    DivergenceError(std::string component, const std::string& detail)
        : NumericError(component + " diverged: " + detail), component_(std::move(component)) {}
    const std::string& component() const { return component_; }

private:
    std::string component_;
};

struct BoundModel {
    PerturbatorMode mode = PerturbatorMode::vae;
    std::vector<BoundLinear> classifier;
    std::optional<VaePerturbator::Bound> vae;
    std::optional<AePerturbator::Bound> ae;
};

BoundModel bind_model(PladModel& model, Binder& binder);

struct BatchLoss {
    Var total;
    LossBreakdown parts;
};

// mean BCE(0, f(x)) + mean BCE(1, f(x*alpha+beta)) + KL + lambda * recon.
// Degradation mode keeps only the first term; AE mode has no KL. `noise` is
// ignored outside VAE mode.
BatchLoss plad_batch_loss(const BoundModel& model, Var batch, double lambda, Var noise);

// Evaluates the loss on a scratch tape.
LossBreakdown plad_batch_loss(PladModel& model, const Tensor& batch, double lambda,
                              const Tensor& noise, double leaky_slope = 0.01);

using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainResult {
    PladModel model;
    std::vector<EpochStats> epochs;
};

// One run seeded by config.seed: per-epoch shuffles, one optimizer step per
// mini-batch, fresh noise every step.
TrainResult train_run(const TrainingConfig& config, const ArchitectureConfig& arch,
                      const Tensor& data, const EpochCallback& on_epoch = {});

// Logits on the test features, then AUC and contamination F1.
struct RunMetrics {
    double auc = 0.0;
    double f1 = 0.0;
};
RunMetrics evaluate_model(const PladModel& model, const OneClassSplit& split, double f1_ratio,
                          double leaky_slope = 0.01);

struct RunRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool aborted = false;
    std::string reason;
    RunMetrics metrics;
    std::optional<PladModel> model;
    std::vector<EpochStats> epochs;
};

struct MultiRunResult {
    std::vector<RunRecord> runs;
    EvalReport auc;
    EvalReport f1;
    double f1_ratio = 0.0;
};

struct ProtocolOptions {
    std::optional<double> f1_ratio;  // default: anomaly fraction of the test labels
    bool keep_models = false;
    std::size_t threads = 0;         // 0: from PLAD_THREADS or hardware
};

// Runs with seeds seed, seed+1, ...; aborted runs are excluded, and fewer than
// min(2, runs) survivors is an error.
MultiRunResult multi_run_protocol(const TrainingConfig& config, const ArchitectureConfig& arch,
                                  const OneClassSplit& split, const ProtocolOptions& options = {});

struct SweepRow {
    std::optional<double> lambda;  // empty for the degradation baseline
    MultiRunResult result;
    std::string label() const;
};

std::vector<double> default_lambda_grid();

// One row per lambda plus one degradation row, last.
std::vector<SweepRow> lambda_sweep(const TrainingConfig& config, const ArchitectureConfig& arch,
                                   const OneClassSplit& split, const std::vector<double>& lambdas,
                                   const ProtocolOptions& options = {});

// epoch, total, bce_n, bce_p, kl, recon
void write_epoch_line(std::ostream& os, const EpochStats& stats);

std::size_t worker_threads();

}  // namespace plad
