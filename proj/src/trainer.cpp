#include "plad/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <thread>

#include "plad/random.hpp"

namespace plad {

namespace {

template <typename F>
Var guarded(const char* component, F&& f) {
    try {
        return f();
    } catch (const DivergenceError&) {
        throw;
    } catch (const NumericError& e) {
        throw DivergenceError(component, e.what());
    }
}

void add_scaled(LossBreakdown& acc, const LossBreakdown& x, double w) {
    acc.total += w * x.total;
    acc.bce_normal += w * x.bce_normal;
    acc.bce_perturbed += w * x.bce_perturbed;
    acc.kl += w * x.kl;
    acc.recon += w * x.recon;
}

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    threads = std::min(threads, n);
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct Cell {
    TrainingConfig config;
    std::size_t group = 0;
    std::size_t run = 0;
};

std::vector<RunRecord> run_cells(const std::vector<Cell>& cells, const ArchitectureConfig& arch,
                                 const OneClassSplit& split, double f1_ratio,
                                 const ProtocolOptions& options) {
    std::vector<RunRecord> records(cells.size());
    const std::size_t threads = options.threads ? options.threads : worker_threads();
    parallel_for(cells.size(), threads, [&](std::size_t i) {
        RunRecord& rec = records[i];
        rec.index = cells[i].run;
        rec.seed = cells[i].config.seed;
        try {
            TrainResult r = train_run(cells[i].config, arch, split.train);
            rec.metrics = evaluate_model(r.model, split, f1_ratio, arch.leaky_slope);
            rec.epochs = std::move(r.epochs);
            if (options.keep_models) rec.model = std::move(r.model);
        } catch (const NumericError& e) {
            rec.aborted = true;
            rec.reason = e.what();
        }
    });
    return records;
}

MultiRunResult summarize(std::vector<RunRecord> records, std::size_t requested, double f1_ratio) {
    MultiRunResult out;
    out.f1_ratio = f1_ratio;
    std::vector<double> aucs, f1s;
    for (const RunRecord& r : records) {
        if (r.aborted) continue;
        aucs.push_back(r.metrics.auc);
        f1s.push_back(r.metrics.f1);
    }
    const std::size_t needed = std::min<std::size_t>(2, requested);
    if (aucs.size() < needed) {
        std::string why = "only " + std::to_string(aucs.size()) + " of " +
                          std::to_string(requested) + " runs survived";
        for (const RunRecord& r : records) {
            if (r.aborted) why += "; run " + std::to_string(r.index) + ": " + r.reason;
        }
        throw NumericError(why);
    }
    out.runs = std::move(records);
    out.auc = EvalReport::from_values("auc", std::move(aucs));
    out.f1 = EvalReport::from_values("f1", std::move(f1s));
    return out;
}

std::vector<Cell> protocol_cells(const TrainingConfig& config, std::size_t group) {
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < config.runs; ++r) {
        Cell c{config, group, r};
        c.config.seed = config.seed + r;
        cells.push_back(c);
    }
    return cells;
}

}  // namespace

void TrainingConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be >= 0");
    if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (runs < 1) throw ArgumentError("runs must be >= 1");
    if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ArgumentError("sgd_momentum must lie in [0, 1)");
}

OptimizerConfig TrainingConfig::optimizer_config() const {
    OptimizerConfig c;
    c.kind = optimizer;
    c.learning_rate = learning_rate;
    c.momentum = sgd_momentum;
    return c;
}

BoundModel bind_model(PladModel& model, Binder& binder) {
    BoundModel b;
    b.mode = model.mode;
    b.classifier = model.classifier.bind(binder);
    if (model.mode == PerturbatorMode::vae) {
        if (!model.vae) throw ContractError("vae mode without a vae perturbator");
        b.vae = model.vae->bind(binder);
    } else if (model.mode == PerturbatorMode::ae) {
        if (!model.ae) throw ContractError("ae mode without an ae perturbator");
        b.ae = model.ae->bind(binder);
    }
    return b;
}

BatchLoss plad_batch_loss(const BoundModel& model, Var batch, double lambda, Var noise) {
    if (batch.value().rank() != 2) {
        throw DimensionError("batch must be (n, d), got " + shape_string(batch.value().shape()));
    }
    BatchLoss out;
    Var bce_n = guarded("bce_normal", [&] {
        return mean(bce_logits(classifier_logit(model.classifier, batch), 0.0));
    });
    out.parts.bce_normal = bce_n.value().item();
    if (model.mode == PerturbatorMode::degradation) {
        out.total = bce_n;
        out.parts.total = out.parts.bce_normal;
        return out;
    }

    Var alpha, beta;
    std::optional<Var> kl;
    if (model.mode == PerturbatorMode::vae) {
        PerturbationOutput p;
        guarded("perturbator", [&] {
            p = model.vae->forward(batch, noise);
            return p.alpha;
        });
        alpha = p.alpha;
        beta = p.beta;
        kl = guarded("kl", [&] { return kl_standard_normal(p.mu, p.logvar); });
    } else {
        guarded("perturbator", [&] {
            std::tie(alpha, beta) = model.ae->forward(batch);
            return alpha;
        });
    }
    Var bce_p = guarded("bce_perturbed", [&] {
        Var perturbed = apply_perturbation(batch, alpha, beta);
        return mean(bce_logits(classifier_logit(model.classifier, perturbed), 1.0));
    });
    Var recon = guarded("recon", [&] { return reconstruction_penalty(alpha, beta); });

    out.total = guarded("total", [&] {
        Var t = add(bce_n, bce_p);
        if (kl) t = add(t, *kl);
        return add(t, scale(recon, lambda));
    });
    out.parts.bce_perturbed = bce_p.value().item();
    out.parts.kl = kl ? kl->value().item() : 0.0;
    out.parts.recon = recon.value().item();
    out.parts.total = out.total.value().item();
    return out;
}

LossBreakdown plad_batch_loss(PladModel& model, const Tensor& batch, double lambda,
                              const Tensor& noise, double leaky_slope) {
    Tape tape;
    Binder binder(tape, false, leaky_slope);
    BoundModel bound = bind_model(model, binder);
    return plad_batch_loss(bound, tape.constant(batch), lambda, tape.constant(noise)).parts;
}

TrainResult train_run(const TrainingConfig& config, const ArchitectureConfig& arch,
                      const Tensor& data, const EpochCallback& on_epoch) {
    config.validate();
    if (data.rank() != 2 || !data.all_finite()) {
        throw ArgumentError("training data must be a finite (n, d) matrix");
    }
    const std::size_t n = data.rows();
    const std::size_t d = data.cols();

    TrainResult result{PladModel::create(d, arch, config.mode, config.seed), {}};
    PladModel& model = result.model;

    std::vector<Tensor*> params;
    {
        Tape probe;
        Binder b(probe, false);
        bind_model(model, b);
        params = b.parameters();
    }
    OptimizerState opt(config.optimizer_config(), params);

    Engine noise_rng = make_engine({config.seed, stream::noise});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Engine shuffle_rng = make_engine({config.shuffle_seed.value_or(config.seed), stream::shuffle, epoch});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        LossBreakdown acc;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            std::span<const std::size_t> idx(order.data() + start, stop - start);
            const Tensor batch = data.rows_subset(idx);

            Tensor noise = Tensor::scalar(0.0);
            if (config.mode == PerturbatorMode::vae) {
                noise = Tensor({idx.size(), d});
                for (double& v : noise.values()) v = gauss(noise_rng);
            }

            Tape tape;
            Binder binder(tape, true, arch.leaky_slope);
            BoundModel bound = bind_model(model, binder);
            BatchLoss loss = plad_batch_loss(bound, tape.constant(batch), config.lambda,
                                             tape.constant(std::move(noise)));
            const std::vector<Tensor> grads = binder.gradients(tape.backward(loss.total));
            try {
                opt.step(binder.parameters(), grads);
            } catch (const NumericError& e) {
                throw DivergenceError("gradient", e.what());
            }
            for (const Tensor* p : binder.parameters()) {
                if (!p->all_finite()) {
                    throw DivergenceError("gradient", "parameters overflowed at epoch " +
                                                          std::to_string(epoch));
                }
            }
            add_scaled(acc, loss.parts, static_cast<double>(idx.size()));
        }
        EpochStats stats{epoch, {}};
        add_scaled(stats.loss, acc, 1.0 / static_cast<double>(n));
        result.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

RunMetrics evaluate_model(const PladModel& model, const OneClassSplit& split, double f1_ratio,
                          double leaky_slope) {
    const Tensor logits = model.classifier.logits(split.test_features, leaky_slope);
    RunMetrics m;
    m.auc = roc_auc(logits.values(), split.test_labels);
    m.f1 = f1_at_contamination(logits.values(), split.test_labels, f1_ratio);
    return m;
}

MultiRunResult multi_run_protocol(const TrainingConfig& config, const ArchitectureConfig& arch,
                                  const OneClassSplit& split, const ProtocolOptions& options) {
    config.validate();
    const double ratio = options.f1_ratio.value_or(anomaly_fraction(split.test_labels));
    return summarize(run_cells(protocol_cells(config, 0), arch, split, ratio, options), config.runs,
                     ratio);
}

std::string SweepRow::label() const {
    return lambda ? format_double(*lambda) : std::string("degradation");
}

std::vector<double> default_lambda_grid() { return {0.1, 0.5, 1, 5, 10, 20, 50, 100}; }

std::vector<SweepRow> lambda_sweep(const TrainingConfig& config, const ArchitectureConfig& arch,
                                   const OneClassSplit& split, const std::vector<double>& lambdas,
                                   const ProtocolOptions& options) {
    if (lambdas.empty()) throw ArgumentError("lambda grid is empty");
    config.validate();
    const double ratio = options.f1_ratio.value_or(anomaly_fraction(split.test_labels));

    std::vector<Cell> cells;
    for (std::size_t g = 0; g < lambdas.size(); ++g) {
        TrainingConfig c = config;
        c.lambda = lambdas[g];
        if (c.mode == PerturbatorMode::degradation) c.mode = PerturbatorMode::vae;
        auto part = protocol_cells(c, g);
        cells.insert(cells.end(), part.begin(), part.end());
    }
    TrainingConfig base = config;
    base.mode = PerturbatorMode::degradation;
    auto part = protocol_cells(base, lambdas.size());
    cells.insert(cells.end(), part.begin(), part.end());

    std::vector<RunRecord> records = run_cells(cells, arch, split, ratio, options);

    std::vector<SweepRow> rows;
    for (std::size_t g = 0; g <= lambdas.size(); ++g) {
        std::vector<RunRecord> group;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].group == g) group.push_back(std::move(records[i]));
        }
        SweepRow row;
        if (g < lambdas.size()) row.lambda = lambdas[g];
        row.result = summarize(std::move(group), config.runs, ratio);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_epoch_line(std::ostream& os, const EpochStats& s) {
    os << s.epoch << '\t' << format_double(s.loss.total) << '\t' << format_double(s.loss.bce_normal)
       << '\t' << format_double(s.loss.bce_perturbed) << '\t' << format_double(s.loss.kl) << '\t'
       << format_double(s.loss.recon) << '\n';
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("PLAD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace plad
