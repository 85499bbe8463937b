#include "plad/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "plad/errors.hpp"
#include "plad/eval.hpp"
#include "plad/random.hpp"

namespace plad {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at,
                        const std::filesystem::path& path) {
    if (at + 4 > b.size()) {
        throw FormatError(path.string() + ": truncated header at byte offset " + std::to_string(at));
    }
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back(static_cast<unsigned char>(v >> 24));
    b.push_back(static_cast<unsigned char>(v >> 16));
    b.push_back(static_cast<unsigned char>(v >> 8));
    b.push_back(static_cast<unsigned char>(v));
}

unsigned char to_byte(double v) {
    const double scaled = std::round(v * 255.0);
    if (!(scaled >= 0.0 && scaled <= 255.0)) {
        throw ArgumentError("pixel value " + format_double(v) + " outside [0, 1]");
    }
    return static_cast<unsigned char>(scaled);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

void Dataset::validate() const {
    if (labels.empty()) throw ArgumentError("dataset '" + meta.name + "' is empty");
    if (features.rows() != labels.size() || features.rank() != 2) {
        throw DimensionError("dataset '" + meta.name + "': " + std::to_string(labels.size()) +
                             " labels for features of shape " + shape_string(features.shape()));
    }
    if (!features.all_finite()) throw NumericError("dataset '" + meta.name + "' has non-finite features");
}

std::string_view format_name(DataFormat f) {
    switch (f) {
        case DataFormat::tabular_csv: return "tabular_csv";
        case DataFormat::idx_images: return "idx_images";
        case DataFormat::cifar_binary: return "cifar_binary";
    }
    return "tabular_csv";
}

DataFormat parse_format(std::string_view name) {
    if (name == "tabular_csv") return DataFormat::tabular_csv;
    if (name == "idx_images") return DataFormat::idx_images;
    if (name == "cifar_binary") return DataFormat::cifar_binary;
    throw ArgumentError("unknown data format '" + std::string(name) + "'");
}

Dataset load_dataset(DataFormat format, const std::vector<std::filesystem::path>& paths,
                     bool csv_header) {
    switch (format) {
        case DataFormat::tabular_csv:
            if (paths.size() != 1) throw ArgumentError("tabular_csv takes exactly one path");
            return load_tabular_csv(paths[0], csv_header);
        case DataFormat::idx_images:
            if (paths.size() != 2) throw ArgumentError("idx_images takes an images and a labels path");
            return load_idx(paths[0], paths[1]);
        case DataFormat::cifar_binary:
            if (paths.empty()) throw ArgumentError("cifar_binary needs at least one batch file");
            return load_cifar_binary(paths);
    }
    throw ArgumentError("unsupported data format");
}

Dataset load_tabular_csv(const std::filesystem::path& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t width = 0;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (has_header && line_no == 1) continue;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() < 2) fail("need at least one feature and a label column");
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            fail("ragged row: " + std::to_string(cells.size()) + " columns, expected " +
                 std::to_string(width));
        }
        for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
            double v = 0.0;
            const auto cell = cells[c];
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) {
                fail("bad number '" + std::string(cell) + "' in column " + std::to_string(c + 1));
            }
            values.push_back(v);
        }
        const auto cell = cells.back();
        int label = 0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
        if (ec != std::errc() || p != cell.data() + cell.size()) {
            double d = 0.0;
            auto [q, ec2] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
            if (ec2 != std::errc() || q != cell.data() + cell.size() || d != std::floor(d)) {
                fail("bad integer label '" + std::string(cell) + "'");
            }
            label = static_cast<int>(d);
        }
        labels.push_back(label);
    }
    if (labels.empty()) throw FormatError(path.string() + ": no data rows");
    Dataset ds{Tensor({labels.size(), width - 1}, std::move(values)), std::move(labels),
               {path.stem().string(), DatasetKind::tabular, std::nullopt}};
    return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto ib = read_bytes(images);
    const std::uint32_t magic = read_be32(ib, 0, images);
    if (magic != kIdxImagesMagic) {
        throw FormatError(images.string() + ": bad IDX image magic at byte offset 0");
    }
    const std::size_t n = read_be32(ib, 4, images);
    const std::size_t rows = read_be32(ib, 8, images);
    const std::size_t cols = read_be32(ib, 12, images);
    if (n == 0 || rows == 0 || cols == 0) {
        throw FormatError(images.string() + ": zero dimension in IDX header at byte offset 4");
    }
    const std::size_t d = rows * cols;
    if (ib.size() < 16 + n * d) {
        throw FormatError(images.string() + ": truncated image record " +
                          std::to_string((ib.size() - 16) / d) + " at byte offset " +
                          std::to_string(ib.size()));
    }
    if (ib.size() > 16 + n * d) {
        throw FormatError(images.string() + ": trailing bytes at byte offset " +
                          std::to_string(16 + n * d));
    }

    const auto lb = read_bytes(labels);
    if (read_be32(lb, 0, labels) != kIdxLabelsMagic) {
        throw FormatError(labels.string() + ": bad IDX label magic at byte offset 0");
    }
    const std::size_t nl = read_be32(lb, 4, labels);
    if (nl != n) {
        throw FormatError(labels.string() + ": " + std::to_string(nl) + " labels for " +
                          std::to_string(n) + " images at byte offset 4");
    }
    if (lb.size() != 8 + n) {
        throw FormatError(labels.string() + ": expected " + std::to_string(8 + n) +
                          " bytes, file ends at byte offset " + std::to_string(lb.size()));
    }

    Tensor features({n, d});
    auto out = features.values();
    for (std::size_t i = 0; i < n * d; ++i) out[i] = static_cast<double>(ib[16 + i]) / 255.0;
    std::vector<int> lab(n);
    for (std::size_t i = 0; i < n; ++i) lab[i] = lb[8 + i];
    return Dataset{std::move(features), std::move(lab),
                   {images.stem().string(), DatasetKind::image, ImageDims{1, rows, cols}}};
}

Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths) {
    std::vector<double> values;
    std::vector<int> labels;
    for (const auto& path : paths) {
        const auto b = read_bytes(path);
        if (b.empty() || b.size() % kCifarRecord != 0) {
            throw FormatError(path.string() + ": truncated record " +
                              std::to_string(b.size() / kCifarRecord) + " at byte offset " +
                              std::to_string(b.size() / kCifarRecord * kCifarRecord));
        }
        for (std::size_t at = 0; at < b.size(); at += kCifarRecord) {
            if (b[at] > 9) {
                throw FormatError(path.string() + ": label " + std::to_string(b[at]) +
                                  " outside 0-9 at byte offset " + std::to_string(at));
            }
            labels.push_back(b[at]);
            for (std::size_t k = 1; k < kCifarRecord; ++k) {
                values.push_back(static_cast<double>(b[at + k]) / 255.0);
            }
        }
    }
    const std::size_t n = labels.size();
    return Dataset{Tensor({n, kCifarPixels}, std::move(values)), std::move(labels),
                   {paths.front().stem().string(), DatasetKind::image,
                    ImageDims{3, kCifarSide, kCifarSide}}};
}

void write_tabular_csv(const std::filesystem::path& path, const Dataset& data, bool header) {
    data.validate();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    if (header) {
        for (std::size_t j = 0; j < data.dim(); ++j) os << 'x' << (j + 1) << ',';
        os << "label\n";
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) os << format_double(v) << ',';
        os << data.labels[i] << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Dataset& data) {
    data.validate();
    std::size_t rows = 0, cols = 0;
    if (data.meta.image && data.meta.image->channels == 1 &&
        data.meta.image->height * data.meta.image->width == data.dim()) {
        rows = data.meta.image->height;
        cols = data.meta.image->width;
    } else {
        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(data.dim())));
        if (side * side != data.dim()) {
            throw ArgumentError("write_idx needs square single-channel images, got width " +
                                std::to_string(data.dim()));
        }
        rows = cols = side;
    }
    std::vector<unsigned char> ib;
    ib.reserve(16 + data.features.size());
    put_be32(ib, kIdxImagesMagic);
    put_be32(ib, static_cast<std::uint32_t>(data.size()));
    put_be32(ib, static_cast<std::uint32_t>(rows));
    put_be32(ib, static_cast<std::uint32_t>(cols));
    for (double v : data.features.values()) ib.push_back(to_byte(v));
    write_bytes(images, ib);

    std::vector<unsigned char> lb;
    put_be32(lb, kIdxLabelsMagic);
    put_be32(lb, static_cast<std::uint32_t>(data.size()));
    for (int l : data.labels) {
        if (l < 0 || l > 255) throw ArgumentError("IDX labels must fit a byte");
        lb.push_back(static_cast<unsigned char>(l));
    }
    write_bytes(labels, lb);
}

void write_cifar_binary(const std::filesystem::path& path, const Dataset& data) {
    data.validate();
    if (data.dim() != kCifarPixels) {
        throw ArgumentError("CIFAR records need 3072 values, got " + std::to_string(data.dim()));
    }
    std::vector<unsigned char> b;
    b.reserve(data.size() * kCifarRecord);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] < 0 || data.labels[i] > 9) throw ArgumentError("CIFAR labels must be 0-9");
        b.push_back(static_cast<unsigned char>(data.labels[i]));
        for (double v : data.features.row(i)) b.push_back(to_byte(v));
    }
    write_bytes(path, b);
}

Normalized normalize_features(const Tensor& train, const std::vector<Tensor>& others) {
    const std::size_t d = train.cols();
    Normalized out;
    out.minimum.assign(d, 0.0);
    out.maximum.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = train.at(0, j), hi = lo;
        for (std::size_t i = 1; i < train.rows(); ++i) {
            lo = std::min(lo, train.at(i, j));
            hi = std::max(hi, train.at(i, j));
        }
        out.minimum[j] = lo;
        out.maximum[j] = hi;
    }
    auto apply = [&](const Tensor& m) {
        if (m.cols() != d) {
            throw DimensionError("normalize_features: width " + std::to_string(m.cols()) +
                                 " differs from train width " + std::to_string(d));
        }
        Tensor r = m;
        for (std::size_t i = 0; i < r.rows(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double range = out.maximum[j] - out.minimum[j];
                r.at(i, j) = range > 0.0 ? (m.at(i, j) - out.minimum[j]) / range : 0.0;
            }
        }
        return r;
    };
    out.train = apply(train);
    for (const Tensor& m : others) out.others.push_back(apply(m));
    return out;
}

OneClassSplit one_class_split(const Dataset& train, const Dataset& test, int normal_class) {
    train.validate();
    test.validate();
    if (train.dim() != test.dim()) {
        throw DimensionError("train width " + std::to_string(train.dim()) + " vs test width " +
                             std::to_string(test.dim()));
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train.labels[i] == normal_class) keep.push_back(i);
    }
    if (keep.empty()) {
        throw ArgumentError("normal class " + std::to_string(normal_class) +
                            " does not occur in the training labels");
    }
    OneClassSplit s{train.features.rows_subset(keep), test.features, {}};
    s.test_labels.reserve(test.size());
    for (int l : test.labels) s.test_labels.push_back(l == normal_class ? 0 : 1);
    return s;
}

OneClassSplit tabular_ad_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    data.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ArgumentError("train_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> normals, anomalies;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] == 0) normals.push_back(i);
        else if (data.labels[i] == 1) anomalies.push_back(i);
        else throw ArgumentError("tabular split needs 0/1 labels, got " + std::to_string(data.labels[i]));
    }
    if (normals.size() < 2) throw ArgumentError("tabular split needs at least 2 normal samples");

    Engine rng = make_engine({seed, stream::split});
    std::vector<std::size_t> shuffled = normals;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(normals.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, normals.size() - 1);

    std::vector<std::size_t> train_idx(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_idx(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    std::sort(train_idx.begin(), train_idx.end());
    test_idx.insert(test_idx.end(), anomalies.begin(), anomalies.end());
    std::sort(test_idx.begin(), test_idx.end());

    OneClassSplit s{data.features.rows_subset(train_idx), data.features.rows_subset(test_idx), {}};
    for (std::size_t i : test_idx) s.test_labels.push_back(data.labels[i]);
    return s;
}

MulticlassBenchmark synthesize_multiclass_benchmark(const Dataset& train, const Dataset& test,
                                                    std::size_t n_train, std::size_t n_anom,
                                                    std::uint64_t seed) {
    train.validate();
    test.validate();
    if (n_anom == 0) throw ArgumentError("n_anom must be positive");
    if (n_train == 0 || n_train > train.size()) {
        throw ArgumentError("n_train must lie in [1, " + std::to_string(train.size()) + "]");
    }
    if (test.size() < 2) throw ArgumentError("pairwise anomalies need at least 2 test samples");
    if (train.dim() != test.dim()) throw DimensionError("train and test widths differ");

    MulticlassBenchmark b;
    Engine pick = make_engine({seed, stream::split});
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), pick);
    b.train_indices.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(b.train_indices.begin(), b.train_indices.end());
    b.split.train = train.features.rows_subset(b.train_indices);

    Engine pairs = make_engine({seed, stream::pairs});
    std::uniform_int_distribution<std::size_t> first(0, test.size() - 1);
    std::uniform_int_distribution<std::size_t> second(0, test.size() - 2);
    const std::size_t d = test.dim();
    std::vector<double> values(test.features.data());
    values.reserve((test.size() + n_anom) * d);
    for (std::size_t k = 0; k < n_anom; ++k) {
        const std::size_t i = first(pairs);
        std::size_t j = second(pairs);
        if (j >= i) ++j;
        b.anomaly_pairs.emplace_back(i, j);
        auto a = test.features.row(i);
        auto c = test.features.row(j);
        for (std::size_t t = 0; t < d; ++t) values.push_back(0.5 * (a[t] + c[t]));
    }
    b.split.test_features = Tensor({test.size() + n_anom, d}, std::move(values));
    b.split.test_labels.assign(test.size(), 0);
    b.split.test_labels.resize(test.size() + n_anom, 1);
    return b;
}

std::string_view synthetic_name(SyntheticKind k) {
    return k == SyntheticKind::ring ? "ring" : "two_blobs";
}

SyntheticKind parse_synthetic(std::string_view name) {
    if (name == "two_blobs") return SyntheticKind::two_blobs;
    if (name == "ring") return SyntheticKind::ring;
    throw ArgumentError("unknown synthetic kind '" + std::string(name) + "'");
}

Dataset gen_synthetic_2d(const SyntheticSpec& spec) {
    if (spec.n < 10) throw ArgumentError("synthetic n must be >= 10");
    if (!(spec.noise >= 0.0)) throw ArgumentError("synthetic noise must be >= 0");
    Engine rng = make_engine({spec.seed, stream::synthetic});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    const double s = spec.noise;

    std::vector<double> v;
    std::vector<int> labels;
    auto push = [&](double x, double y, int label) {
        v.push_back(x);
        v.push_back(y);
        labels.push_back(label);
    };
    auto polar = [&](double radius, int label) {
        const double a = angle(rng);
        const double r = radius + s * gauss(rng);
        push(r * std::cos(a), r * std::sin(a), label);
    };

    for (std::size_t i = 0; i < 2 * spec.n; ++i) {
        if (spec.kind == SyntheticKind::two_blobs) {
            const double x = s * gauss(rng);
            push(x, s * gauss(rng), 0);
        } else {
            polar(1.0, 0);
        }
    }
    for (std::size_t i = 0; i < spec.n; ++i) {
        if (spec.kind == SyntheticKind::two_blobs) {
            const double x = 4.0 + s * gauss(rng);
            push(x, 4.0 + s * gauss(rng), 1);
        } else if (i % 2 == 0) {
            const double x = s * gauss(rng);
            push(x, s * gauss(rng), 1);
        } else {
            polar(3.0, 1);
        }
    }
    const std::size_t n = labels.size();
    return Dataset{Tensor({n, 2}, std::move(v)), std::move(labels),
                   {std::string(synthetic_name(spec.kind)), DatasetKind::tabular, std::nullopt}};
}

void Manifest::set(std::string key, std::string value) {
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> Manifest::get(std::string_view key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return v;
    }
    return std::nullopt;
}

void Manifest::write(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    for (const auto& [k, v] : entries) os << k << ": " << v << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

Manifest Manifest::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Manifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto colon = line.find(": ");
        if (colon == std::string::npos) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'key: value'");
        }
        m.entries.emplace_back(line.substr(0, colon), std::string(trim(std::string_view(line).substr(colon + 2))));
    }
    return m;
}

}  // namespace plad
