#include "plad/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "plad/checkpoint.hpp"
#include "plad/errors.hpp"

namespace plad {

namespace fs = std::filesystem;

namespace {

Dataset load_source(const ExperimentConfig& c, const std::vector<fs::path>& paths) {
    switch (c.dataset.format) {
        case SourceKind::tabular_csv: return load_tabular_csv(paths.at(0), c.dataset.csv_header);
        case SourceKind::idx_images: return load_idx(paths.at(0), paths.at(1));
        case SourceKind::cifar_binary: return load_cifar_binary(paths);
        case SourceKind::synthetic: break;
    }
    SyntheticSpec spec;
    spec.kind = c.dataset.synthetic;
    spec.n = c.dataset.synthetic_n;
    spec.noise = c.dataset.synthetic_noise;
    spec.seed = c.dataset.synthetic_seed;
    return gen_synthetic_2d(spec);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

void write_results(std::ostream& os, const Manifest& results) {
    os << "\n[results]\n";
    for (const auto& [k, v] : results.entries) os << k << " = " << v << "\n";
}

void write_manifest(const fs::path& path, const ExperimentConfig& c, const Manifest& notes,
                    const Manifest& results) {
    std::ofstream os = open_out(path);
    write_config(os, c);
    Manifest all = notes;
    for (const auto& [k, v] : results.entries) all.set(k, v);
    write_results(os, all);
    if (!os) throw IoError("failed writing " + path.string());
}

void record_summary(Manifest& m, const std::string& prefix, const MultiRunResult& r) {
    m.set(prefix + "f1_ratio", format_double(r.f1_ratio));
    m.set(prefix + "auc_mean", format_double(r.auc.mean));
    m.set(prefix + "auc_std", format_double(r.auc.std));
    m.set(prefix + "f1_mean", format_double(r.f1.mean));
    m.set(prefix + "f1_std", format_double(r.f1.std));
    for (const RunRecord& run : r.runs) {
        const std::string key = prefix + "run" + std::to_string(run.index) + "_";
        m.set(key + "seed", std::to_string(run.seed));
        if (run.aborted) {
            m.set(key + "aborted", run.reason);
        } else {
            m.set(key + "auc", format_double(run.metrics.auc));
            m.set(key + "f1", format_double(run.metrics.f1));
        }
    }
}

void print_summary(std::ostream& out, const std::string& metric, const MultiRunResult& r) {
    if (metric != "f1") out << "auc\t" << r.auc.format() << "\n";
    if (metric != "auc") out << "f1\t" << r.f1.format() << "\n";
}

fs::path require_checkpoint(const ExperimentConfig& c) {
    if (c.eval.checkpoint.empty()) {
        auto it = c.origin.find("eval.checkpoint");
        throw ConfigError("eval.checkpoint: required for this verb",
                          it == c.origin.end() ? 0 : it->second);
    }
    return c.eval.checkpoint;
}

PladModel load_matching(const ExperimentConfig& c, const OneClassSplit& split) {
    PladModel model = load_checkpoint(require_checkpoint(c));
    if (model.input_dim() != split.test_features.cols()) {
        throw DimensionError("checkpoint expects input width " + std::to_string(model.input_dim()) +
                             " but the dataset has width " +
                             std::to_string(split.test_features.cols()));
    }
    return model;
}

void verb_train(const ExperimentConfig& c, std::ostream& out) {
    const PreparedData data = prepare_data(c);
    const fs::path dir = c.eval.output_dir;
    fs::create_directories(dir);

    ProtocolOptions options;
    options.f1_ratio = c.eval.f1_ratio;
    options.keep_models = true;
    const auto start = std::chrono::steady_clock::now();
    const MultiRunResult result = multi_run_protocol(c.training, c.model, data.split, options);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (const RunRecord& run : result.runs) {
        const std::string stem = "run" + std::to_string(run.index);
        std::ofstream log = open_out(dir / (stem + ".log"));
        for (const EpochStats& e : run.epochs) write_epoch_line(log, e);
        if (run.aborted) {
            log << "aborted\t" << run.reason << "\n";
            out << stem << "\tseed " << run.seed << "\taborted: " << run.reason << "\n";
            continue;
        }
        log << "metrics\tauc=" << format_double(run.metrics.auc)
            << "\tf1=" << format_double(run.metrics.f1) << "\n";
        if (run.model) save_checkpoint(dir / (stem + ".ckpt"), *run.model);
        out << stem << "\tseed " << run.seed << "\tauc " << format_double(run.metrics.auc)
            << "\tf1 " << format_double(run.metrics.f1) << "\n";
    }
    print_summary(out, c.eval.metric, result);

    Manifest results;
    record_summary(results, "", result);
    results.set("seconds", format_double(seconds));
    write_manifest(dir / "manifest.cfg", c, data.notes, results);
}

void verb_eval(const ExperimentConfig& c, std::ostream& out) {
    const PreparedData data = prepare_data(c);
    const PladModel model = load_matching(c, data.split);
    const double ratio = c.eval.f1_ratio.value_or(anomaly_fraction(data.split.test_labels));
    const RunMetrics m = evaluate_model(model, data.split, ratio, c.model.leaky_slope);
    if (c.eval.metric != "f1") out << "auc\t" << format_double(m.auc) << "\n";
    if (c.eval.metric != "auc") out << "f1\t" << format_double(m.f1) << "\n";

    fs::create_directories(c.eval.output_dir);
    Manifest results;
    results.set("checkpoint", c.eval.checkpoint.string());
    results.set("f1_ratio", format_double(ratio));
    results.set("auc", format_double(m.auc));
    results.set("f1", format_double(m.f1));
    write_manifest(c.eval.output_dir / "eval_manifest.cfg", c, data.notes, results);
}

void verb_sweep(const ExperimentConfig& c, std::ostream& out) {
    const PreparedData data = prepare_data(c);
    const fs::path dir = c.eval.output_dir;
    fs::create_directories(dir);

    ProtocolOptions options;
    options.f1_ratio = c.eval.f1_ratio;
    const auto rows = lambda_sweep(c.training, c.model, data.split, c.eval.lambdas, options);

    std::ofstream table = open_out(dir / "sweep.tsv");
    table << "lambda\tauc_mean\tauc_std\tf1_mean\tf1_std\n";
    out << "lambda\tauc\tf1\n";
    Manifest results;
    for (const SweepRow& row : rows) {
        const auto& r = row.result;
        table << row.label() << '\t' << format_double(r.auc.mean) << '\t' << format_double(r.auc.std)
              << '\t' << format_double(r.f1.mean) << '\t' << format_double(r.f1.std) << '\n';
        out << row.label() << '\t' << r.auc.format() << '\t' << r.f1.format() << '\n';
        record_summary(results, "lambda_" + row.label() + "_", r);
    }
    results.set("rows", std::to_string(rows.size()));
    write_manifest(dir / "manifest.cfg", c, data.notes, results);
}

void verb_synth(const ExperimentConfig& c, std::ostream& out) {
    const fs::path dir = c.eval.output_dir;
    if (c.dataset.format == SourceKind::synthetic) {
        fs::create_directories(dir);
        const Dataset d = load_source(c, {});
        const fs::path csv = dir / (c.dataset.name + ".csv");
        write_tabular_csv(csv, d);
        Manifest m;
        m.set("name", c.dataset.name);
        m.set("kind", std::string(synthetic_name(c.dataset.synthetic)));
        m.set("n", std::to_string(c.dataset.synthetic_n));
        m.set("noise", format_double(c.dataset.synthetic_noise));
        m.set("seed", std::to_string(c.dataset.synthetic_seed));
        m.set("samples", std::to_string(d.size()));
        m.set("anomalies", std::to_string(std::count(d.labels.begin(), d.labels.end(), 1)));
        m.set("file", csv.string());
        m.write(dir / (c.dataset.name + ".manifest"));
        out << "wrote " << csv.string() << " (" << d.size() << " rows)\n";
        return;
    }
    if (c.dataset.split != SplitKind::multiclass) {
        throw ConfigError("synth needs dataset.format = synthetic or dataset.split = multiclass");
    }
    c.validate();
    const Dataset train = load_source(c, c.dataset.paths);
    const Dataset test = load_source(c, c.dataset.test_paths);
    const MulticlassBenchmark b = synthesize_multiclass_benchmark(train, test, c.dataset.n_train,
                                                                  c.dataset.n_anom,
                                                                  c.dataset.split_seed);
    fs::create_directories(dir);
    {
        std::ofstream os = open_out(dir / "benchmark_train_indices.csv");
        os << "train_index\n";
        for (std::size_t i : b.train_indices) os << i << '\n';
    }
    {
        std::ofstream os = open_out(dir / "benchmark_anomaly_pairs.csv");
        os << "test_index_a,test_index_b\n";
        for (auto [i, j] : b.anomaly_pairs) os << i << ',' << j << '\n';
    }
    Manifest m;
    m.set("dataset", c.dataset.name);
    m.set("split_kind", "multiclass");
    m.set("split_seed", std::to_string(c.dataset.split_seed));
    m.set("source_train_samples", std::to_string(train.size()));
    m.set("source_test_samples", std::to_string(test.size()));
    m.set("train_samples", std::to_string(b.train_indices.size()));
    m.set("anomalies", std::to_string(b.anomaly_pairs.size()));
    m.set("test_samples", std::to_string(b.split.test_labels.size()));
    m.write(dir / "benchmark.manifest");
    out << "wrote benchmark with " << b.train_indices.size() << " training samples and "
        << b.anomaly_pairs.size() << " anomalies to " << dir.string() << "\n";
}

void verb_export(const ExperimentConfig& c, std::ostream& out) {
    const PreparedData data = prepare_data(c);
    const PladModel model = load_matching(c, data.split);
    fs::create_directories(c.eval.output_dir);
    const fs::path scores =
        c.eval.scores_path.empty() ? c.eval.output_dir / "scores.csv" : c.eval.scores_path;
    const std::size_t n = export_scores(scores, model.classifier, data.split.test_features,
                                        data.split.test_labels, c.model.leaky_slope);
    out << "wrote " << n << " scores to " << scores.string() << "\n";
    if (!c.eval.embeddings_path.empty()) {
        const std::size_t k = export_embeddings(c.eval.embeddings_path, model.classifier,
                                                data.split.test_features, data.split.test_labels,
                                                c.model.leaky_slope);
        out << "wrote " << k << " embeddings to " << c.eval.embeddings_path.string() << "\n";
    }
}

std::string one_line(std::string s) {
    std::string out;
    for (char ch : s) {
        if (ch == '\n' || ch == '\r' || ch == '\t') out += ' ';
        else if (ch == '"' || ch == '\\') {
            out += '\\';
            out += ch;
        } else out += ch;
    }
    return out;
}

}  // namespace

std::string_view verb_name(Verb v) {
    switch (v) {
        case Verb::train: return "train";
        case Verb::eval: return "eval";
        case Verb::sweep: return "sweep";
        case Verb::synth: return "synth";
        case Verb::export_scores: return "export";
    }
    return "train";
}

Verb parse_verb(std::string_view name) {
    for (Verb v : {Verb::train, Verb::eval, Verb::sweep, Verb::synth, Verb::export_scores}) {
        if (verb_name(v) == name) return v;
    }
    throw ArgumentError("unknown verb '" + std::string(name) + "'");
}

PreparedData prepare_data(const ExperimentConfig& c) {
    c.validate();
    const DatasetSection& d = c.dataset;
    PreparedData p;
    try {
        if (d.split == SplitKind::tabular) {
            p.split = tabular_ad_split(load_source(c, d.paths), d.train_fraction, d.split_seed);
        } else {
            const Dataset train = load_source(c, d.paths);
            const Dataset test = load_source(c, d.test_paths);
            if (d.split == SplitKind::one_class) {
                p.split = one_class_split(train, test, d.normal_class);
            } else {
                p.split = synthesize_multiclass_benchmark(train, test, d.n_train, d.n_anom,
                                                          d.split_seed)
                              .split;
            }
        }
    } catch (const NumericError& e) {
        throw FormatError(e.what());
    }
    if (d.normalize) {
        Normalized n = normalize_features(p.split.train, {p.split.test_features});
        p.split.train = std::move(n.train);
        p.split.test_features = std::move(n.others.front());
    }
    const auto anomalies = std::count(p.split.test_labels.begin(), p.split.test_labels.end(), 1);
    p.notes.set("dataset", d.name);
    p.notes.set("split_kind", std::string(split_name(d.split)));
    p.notes.set("split_seed", std::to_string(d.split_seed));
    p.notes.set("dim", std::to_string(p.split.train.cols()));
    p.notes.set("train_samples", std::to_string(p.split.train.rows()));
    p.notes.set("test_samples", std::to_string(p.split.test_labels.size()));
    p.notes.set("test_anomalies", std::to_string(anomalies));
    return p;
}

void run_verb(Verb verb, const ExperimentConfig& config, std::ostream& out) {
    switch (verb) {
        case Verb::train: return verb_train(config, out);
        case Verb::eval: return verb_eval(config, out);
        case Verb::sweep: return verb_sweep(config, out);
        case Verb::synth: return verb_synth(config, out);
        case Verb::export_scores: return verb_export(config, out);
    }
}

int describe_failure(std::exception_ptr error, std::string& line) {
    int code = exit_code::internal;
    std::string kind = "internal";
    std::string message;
    int config_line = 0;
    try {
        std::rethrow_exception(error);
    } catch (const ConfigError& e) {
        code = exit_code::config;
        kind = "config";
        message = e.what();
        config_line = e.line();
    } catch (const FormatError& e) {
        code = exit_code::data, kind = "data", message = e.what();
    } catch (const IoError& e) {
        code = exit_code::data, kind = "data", message = e.what();
    } catch (const DimensionError& e) {
        code = exit_code::data, kind = "data", message = e.what();
    } catch (const MetricError& e) {
        code = exit_code::data, kind = "data", message = e.what();
    } catch (const ArgumentError& e) {
        code = exit_code::data, kind = "data", message = e.what();
    } catch (const fs::filesystem_error& e) {
        code = exit_code::data, kind = "data", message = e.what();
    } catch (const NumericError& e) {
        code = exit_code::divergence, kind = "divergence", message = e.what();
    } catch (const std::exception& e) {
        message = e.what();
    } catch (...) {
        message = "unknown exception";
    }
    line = "error=" + kind + " exit=" + std::to_string(code);
    if (config_line > 0) line += " line=" + std::to_string(config_line);
    line += " message=\"" + one_line(message) + "\"";
    return code;
}

int run_command(Verb verb, const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    try {
        run_verb(verb, config, out);
        return exit_code::ok;
    } catch (...) {
        std::string line;
        const int code = describe_failure(std::current_exception(), line);
        err << line << std::endl;
        return code;
    }
}

}  // namespace plad
