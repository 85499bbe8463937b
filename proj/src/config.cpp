#include "plad/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "plad/errors.hpp"
#include "plad/eval.hpp"

namespace plad {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    s = trim(s);
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(unquote(s.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double to_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ArgumentError("expected a number, got '" + std::string(s) + "'");
    }
    return v;
}

std::uint64_t to_uint(std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ArgumentError("expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return v;
}

int to_int(std::string_view s) {
    s = trim(s);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ArgumentError("expected an integer, got '" + std::string(s) + "'");
    }
    return v;
}

bool to_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ArgumentError("expected true or false, got '" + std::string(s) + "'");
}

fs::path to_path(std::string_view s, const fs::path& base) {
    fs::path p = unquote(s);
    if (p.empty()) return p;
    if (p.is_relative()) p = base.empty() ? fs::absolute(p) : base / p;
    return p.lexically_normal();
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
    }
    return out;
}

std::string paths_string(const std::vector<fs::path>& ps) {
    std::vector<std::string> s;
    for (const auto& p : ps) s.push_back(p.string());
    return join(s);
}

SourceKind parse_source(std::string_view name) {
    if (name == "tabular_csv") return SourceKind::tabular_csv;
    if (name == "idx_images") return SourceKind::idx_images;
    if (name == "cifar_binary") return SourceKind::cifar_binary;
    if (name == "synthetic") return SourceKind::synthetic;
    throw ArgumentError("unknown format '" + std::string(name) + "'");
}

SplitKind parse_split(std::string_view name) {
    if (name == "tabular") return SplitKind::tabular;
    if (name == "one_class") return SplitKind::one_class;
    if (name == "multiclass") return SplitKind::multiclass;
    throw ArgumentError("unknown split '" + std::string(name) + "'");
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(ExperimentConfig&, std::string_view, const fs::path&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define PLAD_FIELD(SEC, KEY, SETTER, GETTER)                                                  \
    Field {                                                                                   \
        SEC, KEY,                                                                             \
            [](ExperimentConfig& c, std::string_view v, const fs::path& base) {               \
                (void)base;                                                                   \
                SETTER;                                                                       \
            },                                                                                \
            [](const ExperimentConfig& c) -> std::string { return GETTER; }                   \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        PLAD_FIELD("dataset", "name", c.dataset.name = unquote(v), c.dataset.name),
        PLAD_FIELD("dataset", "format", c.dataset.format = parse_source(trim(v)),
                   std::string(source_name(c.dataset.format))),
        PLAD_FIELD("dataset", "paths",
                   {
                       c.dataset.paths.clear();
                       for (const auto& s : split_list(v)) c.dataset.paths.push_back(to_path(s, base));
                   },
                   paths_string(c.dataset.paths)),
        PLAD_FIELD("dataset", "test_paths",
                   {
                       c.dataset.test_paths.clear();
                       for (const auto& s : split_list(v))
                           c.dataset.test_paths.push_back(to_path(s, base));
                   },
                   paths_string(c.dataset.test_paths)),
        PLAD_FIELD("dataset", "csv_header", c.dataset.csv_header = to_bool(v),
                   c.dataset.csv_header ? "true" : "false"),
        PLAD_FIELD("dataset", "split", c.dataset.split = parse_split(trim(v)),
                   std::string(split_name(c.dataset.split))),
        PLAD_FIELD("dataset", "train_fraction", c.dataset.train_fraction = to_double(v),
                   format_double(c.dataset.train_fraction)),
        PLAD_FIELD("dataset", "normal_class", c.dataset.normal_class = to_int(v),
                   std::to_string(c.dataset.normal_class)),
        PLAD_FIELD("dataset", "split_seed", c.dataset.split_seed = to_uint(v),
                   std::to_string(c.dataset.split_seed)),
        PLAD_FIELD("dataset", "normalize", c.dataset.normalize = to_bool(v),
                   c.dataset.normalize ? "true" : "false"),
        PLAD_FIELD("dataset", "n_train", c.dataset.n_train = to_uint(v),
                   std::to_string(c.dataset.n_train)),
        PLAD_FIELD("dataset", "n_anom", c.dataset.n_anom = to_uint(v),
                   std::to_string(c.dataset.n_anom)),
        PLAD_FIELD("dataset", "synthetic", c.dataset.synthetic = parse_synthetic(trim(v)),
                   std::string(synthetic_name(c.dataset.synthetic))),
        PLAD_FIELD("dataset", "synthetic_n", c.dataset.synthetic_n = to_uint(v),
                   std::to_string(c.dataset.synthetic_n)),
        PLAD_FIELD("dataset", "synthetic_noise", c.dataset.synthetic_noise = to_double(v),
                   format_double(c.dataset.synthetic_noise)),
        PLAD_FIELD("dataset", "synthetic_seed", c.dataset.synthetic_seed = to_uint(v),
                   std::to_string(c.dataset.synthetic_seed)),

        PLAD_FIELD("model", "mode", c.training.mode = parse_mode(trim(v)),
                   std::string(mode_name(c.training.mode))),
        PLAD_FIELD("model", "classifier_hidden",
                   {
                       c.model.classifier_hidden.clear();
                       for (const auto& s : split_list(v))
                           c.model.classifier_hidden.push_back(to_uint(s));
                   },
                   [&] {
                       std::vector<std::string> s;
                       for (auto h : c.model.classifier_hidden) s.push_back(std::to_string(h));
                       return join(s);
                   }()),
        PLAD_FIELD("model", "classifier_activation",
                   c.model.classifier_activation = parse_activation(trim(v)),
                   std::string(activation_name(c.model.classifier_activation))),
        PLAD_FIELD("model", "classifier_bias", c.model.classifier_bias = to_bool(v),
                   c.model.classifier_bias ? "true" : "false"),
        PLAD_FIELD("model", "perturbator_activation",
                   c.model.perturbator_activation = parse_activation(trim(v)),
                   std::string(activation_name(c.model.perturbator_activation))),
        PLAD_FIELD("model", "leaky_slope", c.model.leaky_slope = to_double(v),
                   format_double(c.model.leaky_slope)),

        PLAD_FIELD("training", "lambda", c.training.lambda = to_double(v),
                   format_double(c.training.lambda)),
        PLAD_FIELD("training", "optimizer", c.training.optimizer = parse_optimizer(trim(v)),
                   std::string(optimizer_name(c.training.optimizer))),
        PLAD_FIELD("training", "learning_rate", c.training.learning_rate = to_double(v),
                   format_double(c.training.learning_rate)),
        PLAD_FIELD("training", "sgd_momentum", c.training.sgd_momentum = to_double(v),
                   format_double(c.training.sgd_momentum)),
        PLAD_FIELD("training", "epochs", c.training.epochs = to_uint(v),
                   std::to_string(c.training.epochs)),
        PLAD_FIELD("training", "batch_size", c.training.batch_size = to_uint(v),
                   std::to_string(c.training.batch_size)),
        PLAD_FIELD("training", "seed", c.training.seed = to_uint(v),
                   std::to_string(c.training.seed)),
        PLAD_FIELD("training", "runs", c.training.runs = to_uint(v),
                   std::to_string(c.training.runs)),

        PLAD_FIELD("eval", "metric", c.eval.metric = unquote(v), c.eval.metric),
        PLAD_FIELD("eval", "f1_ratio",
                   {
                       const auto s = trim(v);
                       if (s == "auto") c.eval.f1_ratio.reset();
                       else c.eval.f1_ratio = to_double(s);
                   },
                   c.eval.f1_ratio ? format_double(*c.eval.f1_ratio) : "auto"),
        PLAD_FIELD("eval", "lambdas",
                   {
                       c.eval.lambdas.clear();
                       for (const auto& s : split_list(v)) c.eval.lambdas.push_back(to_double(s));
                   },
                   [&] {
                       std::vector<std::string> s;
                       for (double l : c.eval.lambdas) s.push_back(format_double(l));
                       return join(s);
                   }()),
        PLAD_FIELD("eval", "output_dir", c.eval.output_dir = to_path(v, base),
                   c.eval.output_dir.string()),
        PLAD_FIELD("eval", "checkpoint", c.eval.checkpoint = to_path(v, base),
                   c.eval.checkpoint.string()),
        PLAD_FIELD("eval", "scores_path", c.eval.scores_path = to_path(v, base),
                   c.eval.scores_path.string()),
        PLAD_FIELD("eval", "embeddings_path", c.eval.embeddings_path = to_path(v, base),
                   c.eval.embeddings_path.string()),
    };
    return table;
}

#undef PLAD_FIELD

const Field* find_field(std::string_view section, std::string_view key) {
    for (const Field& f : fields()) {
        if (section == f.section && key == f.key) return &f;
    }
    return nullptr;
}

void assign(ExperimentConfig& c, std::string_view section, std::string_view key,
            std::string_view value, const fs::path& base, int line, const std::string& where) {
    const Field* f = find_field(section, key);
    if (!f) {
        throw ConfigError(where + "unknown key '" + std::string(key) + "' in [" +
                              std::string(section) + "]",
                          line);
    }
    try {
        f->set(c, value, base);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + std::string(section) + "." + std::string(key) + ": " + e.what(),
                          line);
    }
    c.origin[std::string(section) + "." + std::string(key)] = line;
}

struct ImagePreset {
    const char* name;
    double lambda;
    OptimizerKind optimizer;
    double lr;
};

constexpr std::array<ImagePreset, 10> fmnist_presets{{
    {"tshirt", 5, OptimizerKind::sgd, 0.001},
    {"trouser", 5, OptimizerKind::sgd, 0.005},
    {"pullover", 3, OptimizerKind::sgd, 0.005},
    {"dress", 3, OptimizerKind::sgd, 0.005},
    {"coat", 5, OptimizerKind::sgd, 0.005},
    {"sandal", 5, OptimizerKind::sgd, 0.005},
    {"shirt", 5, OptimizerKind::sgd, 0.005},
    {"sneaker", 15, OptimizerKind::sgd, 0.002},
    {"bag", 5, OptimizerKind::sgd, 0.001},
    {"ankle-boot", 5, OptimizerKind::sgd, 0.005},
}};

constexpr std::array<ImagePreset, 10> cifar_presets{{
    {"airplane", 10, OptimizerKind::sgd, 0.005},
    {"automobile", 5, OptimizerKind::sgd, 0.005},
    {"bird", 50, OptimizerKind::sgd, 0.005},
    {"cat", 5, OptimizerKind::sgd, 0.005},
    {"deer", 5, OptimizerKind::sgd, 0.005},
    {"dog", 10, OptimizerKind::sgd, 0.005},
    {"frog", 10, OptimizerKind::adam, 0.0001},
    {"horse", 5, OptimizerKind::sgd, 0.005},
    {"ship", 20, OptimizerKind::adam, 0.0001},
    {"truck", 5, OptimizerKind::sgd, 0.001},
}};

ExperimentConfig tabular_preset(const char* name, double lambda) {
    ExperimentConfig c;
    c.preset = name;
    c.dataset.name = name;
    c.training.lambda = lambda;
    c.training.optimizer = OptimizerKind::adam;
    c.training.learning_rate = 0.001;
    c.training.batch_size = 200;
    return c;
}

ExperimentConfig image_preset(const std::string& name, SourceKind format, int cls,
                              const ImagePreset& p) {
    ExperimentConfig c;
    c.preset = name;
    c.dataset.name = name;
    c.dataset.format = format;
    c.dataset.split = SplitKind::one_class;
    c.dataset.normal_class = cls;
    c.dataset.normalize = false;
    c.model = ArchitectureConfig::image();
    c.training.lambda = p.lambda;
    c.training.optimizer = p.optimizer;
    c.training.learning_rate = p.lr;
    c.training.batch_size = 128;
    return c;
}

ExperimentConfig synthetic_preset(const char* name, SyntheticKind kind) {
    ExperimentConfig c;
    c.preset = name;
    c.dataset.name = name;
    c.dataset.format = SourceKind::synthetic;
    c.dataset.synthetic = kind;
    c.dataset.normalize = false;
    c.model.classifier_hidden = {64, 64};
    c.training.lambda = 5;
    c.training.optimizer = OptimizerKind::adam;
    c.training.learning_rate = 0.01;
    c.training.batch_size = 32;
    if (kind == SyntheticKind::ring) {
        c.dataset.synthetic_noise = 0.1;
        c.training.epochs = 200;
    }
    return c;
}

}  // namespace

std::string_view source_name(SourceKind k) {
    switch (k) {
        case SourceKind::tabular_csv: return "tabular_csv";
        case SourceKind::idx_images: return "idx_images";
        case SourceKind::cifar_binary: return "cifar_binary";
        case SourceKind::synthetic: return "synthetic";
    }
    return "tabular_csv";
}

std::string_view split_name(SplitKind k) {
    switch (k) {
        case SplitKind::tabular: return "tabular";
        case SplitKind::one_class: return "one_class";
        case SplitKind::multiclass: return "multiclass";
    }
    return "tabular";
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names{"thyroid", "arrhythmia", "synthetic-blobs", "synthetic-ring",
                                   "fmnist-multiclass"};
    for (const auto& p : fmnist_presets) names.push_back(std::string("fmnist-") + p.name);
    for (const auto& p : cifar_presets) names.push_back(std::string("cifar10-") + p.name);
    return names;
}

ExperimentConfig preset_config(std::string_view name) {
    if (name == "thyroid") return tabular_preset("thyroid", 3);
    if (name == "arrhythmia") return tabular_preset("arrhythmia", 2);
    if (name == "synthetic-blobs") return synthetic_preset("synthetic-blobs", SyntheticKind::two_blobs);
    if (name == "synthetic-ring") return synthetic_preset("synthetic-ring", SyntheticKind::ring);
    if (name == "fmnist-multiclass") {
        ExperimentConfig c = image_preset("fmnist-multiclass", SourceKind::idx_images, 0,
                                          {"multiclass", 5, OptimizerKind::adam, 0.001});
        c.dataset.split = SplitKind::multiclass;
        return c;
    }
    for (std::size_t i = 0; i < fmnist_presets.size(); ++i) {
        if (name == std::string("fmnist-") + fmnist_presets[i].name) {
            return image_preset(std::string(name), SourceKind::idx_images, static_cast<int>(i),
                                fmnist_presets[i]);
        }
    }
    for (std::size_t i = 0; i < cifar_presets.size(); ++i) {
        if (name == std::string("cifar10-") + cifar_presets[i].name) {
            return image_preset(std::string(name), SourceKind::cifar_binary, static_cast<int>(i),
                                cifar_presets[i]);
        }
    }
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
    auto fail = [&](const std::string& key, const std::string& msg) {
        auto it = origin.find(key);
        throw ConfigError(key + ": " + msg, it == origin.end() ? 0 : it->second);
    };
    const DatasetSection& d = dataset;
    if (d.format != SourceKind::synthetic) {
        if (d.paths.empty()) fail("dataset.paths", "required for format " + std::string(source_name(d.format)));
        const bool image = d.format != SourceKind::tabular_csv;
        if (d.format == SourceKind::tabular_csv && d.paths.size() != 1) fail("dataset.paths", "expected one csv file");
        if (d.format == SourceKind::idx_images && d.paths.size() != 2) fail("dataset.paths", "expected images and labels files");
        if (image) {
            if (d.split == SplitKind::tabular) fail("dataset.split", "image formats need one_class or multiclass");
            if (d.test_paths.empty()) fail("dataset.test_paths", "required for image formats");
            if (d.format == SourceKind::idx_images && d.test_paths.size() != 2) fail("dataset.test_paths", "expected images and labels files");
        } else if (d.split != SplitKind::tabular) {
            fail("dataset.split", "tabular_csv supports only the tabular split");
        }
        for (const auto& p : d.paths) {
            if (!fs::is_regular_file(p)) fail("dataset.paths", "no such file " + p.string());
        }
        for (const auto& p : d.test_paths) {
            if (!fs::is_regular_file(p)) fail("dataset.test_paths", "no such file " + p.string());
        }
    } else {
        if (d.split != SplitKind::tabular) fail("dataset.split", "synthetic data supports only the tabular split");
        if (d.synthetic_n < 10) fail("dataset.synthetic_n", "must be >= 10");
        if (!(d.synthetic_noise > 0.0)) fail("dataset.synthetic_noise", "must be positive");
    }
    if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0)) fail("dataset.train_fraction", "must lie in (0, 1)");
    if (d.normal_class < 0) fail("dataset.normal_class", "must be >= 0");
    if (d.n_train < 1) fail("dataset.n_train", "must be >= 1");
    if (d.n_anom < 1) fail("dataset.n_anom", "must be >= 1");

    for (std::size_t h : model.classifier_hidden) {
        if (h == 0) fail("model.classifier_hidden", "widths must be positive");
    }
    if (!(model.leaky_slope >= 0.0 && model.leaky_slope < 1.0)) fail("model.leaky_slope", "must lie in [0, 1)");

    const TrainingConfig& t = training;
    if (!(t.lambda >= 0.0) || !std::isfinite(t.lambda)) fail("training.lambda", "must be >= 0");
    if (!(t.learning_rate > 0.0)) fail("training.learning_rate", "must be positive");
    if (!(t.sgd_momentum >= 0.0 && t.sgd_momentum < 1.0)) fail("training.sgd_momentum", "must lie in [0, 1)");
    if (t.epochs < 1) fail("training.epochs", "must be >= 1");
    if (t.batch_size < 1) fail("training.batch_size", "must be >= 1");
    if (t.runs < 1) fail("training.runs", "must be >= 1");

    if (eval.metric != "auc" && eval.metric != "f1" && eval.metric != "both") {
        fail("eval.metric", "expected auc, f1 or both");
    }
    if (eval.f1_ratio && !(*eval.f1_ratio > 0.0 && *eval.f1_ratio <= 1.0)) fail("eval.f1_ratio", "must lie in (0, 1]");
    if (eval.lambdas.empty()) fail("eval.lambdas", "must not be empty");
    for (double l : eval.lambdas) {
        if (!(l >= 0.0) || !std::isfinite(l)) fail("eval.lambdas", "values must be >= 0");
    }
}

ExperimentConfig parse_config_text(std::string_view text, const fs::path& base_dir,
                                   std::optional<std::string> preset) {
    struct Line {
        int number;
        std::string section;
        std::string key;
        std::string value;
    };
    std::vector<Line> lines;
    std::optional<std::string> file_preset;
    int file_preset_line = 0;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        std::string_view s = raw;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("malformed section header", number);
            section = std::string(trim(s.substr(1, s.size() - 2)));
            if (section != "dataset" && section != "model" && section != "training" &&
                section != "eval" && section != "results") {
                throw ConfigError("unknown section [" + section + "]", number);
            }
            continue;
        }
        if (section == "results") continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key = value", number);
        const std::string key(trim(s.substr(0, eq)));
        const std::string_view value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", number);
        if (section.empty()) {
            if (key != "preset") throw ConfigError("key '" + key + "' outside any section", number);
            file_preset = unquote(value);
            file_preset_line = number;
            continue;
        }
        lines.push_back({number, section, key, std::string(value)});
    }

    ExperimentConfig config;
    const auto chosen = preset ? preset : file_preset;
    if (chosen && !chosen->empty()) {
        try {
            config = preset_config(*chosen);
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), preset ? 0 : file_preset_line);
        }
    }
    for (const Line& l : lines) assign(config, l.section, l.key, l.value, base_dir, l.number, "");
    return config;
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
    const std::string where = "override '" + std::string(assignment) + "': ";
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
        throw ConfigError(where + "expected section.key=value");
    }
    const auto section = trim(assignment.substr(0, dot));
    const auto key = trim(assignment.substr(dot + 1, eq - dot - 1));
    if (section != "dataset" && section != "model" && section != "training" && section != "eval") {
        throw ConfigError(where + "unknown section [" + std::string(section) + "]");
    }
    assign(config, section, key, assignment.substr(eq + 1), fs::current_path(), 0, where);
}

ExperimentConfig parse_config(const std::optional<fs::path>& path,
                              const std::vector<std::string>& overrides,
                              std::optional<std::string> preset) {
    ExperimentConfig config;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot read config " + path->string());
        std::stringstream buf;
        buf << in.rdbuf();
        config = parse_config_text(buf.str(), fs::absolute(*path).parent_path(), preset);
    } else if (preset) {
        config = preset_config(*preset);
    }
    for (const auto& o : overrides) apply_override(config, o);
    return config;
}

void write_config(std::ostream& os, const ExperimentConfig& config) {
    if (!config.preset.empty()) os << "preset = " << config.preset << "\n";
    std::string section;
    for (const Field& f : fields()) {
        if (section != f.section) {
            section = f.section;
            os << "\n[" << section << "]\n";
        }
        os << f.key << " = " << f.get(config) << "\n";
    }
}

}  // namespace plad
