#include "plad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plad/errors.hpp"

namespace plad {

namespace {

std::size_t element_count(const Shape& shape) {
    if (shape.empty() || shape.size() > 2) {
        throw DimensionError("tensor rank must be 1 or 2, got shape " + shape_string(shape));
    }
    std::size_t n = 1;
    for (std::size_t extent : shape) {
        if (extent == 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
        }
        n *= extent;
    }
    return n;
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor() : shape_{1}, values_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    values_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (element_count(shape_) != values_.size()) {
        throw DimensionError("tensor shape " + shape_string(shape_) + " needs " +
                             std::to_string(element_count(shape_)) + " values, got " +
                             std::to_string(values_.size()));
    }
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::filled(Shape shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
    return vector(std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

double Tensor::item() const {
    if (values_.size() != 1) {
        throw DimensionError("item() on non-scalar tensor of shape " + shape_string(shape_));
    }
    return values_[0];
}

std::span<const double> Tensor::row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
}

Tensor Tensor::rows_subset(std::span<const std::size_t> indices) const {
    const std::size_t c = cols();
    std::vector<double> out;
    out.reserve(indices.size() * c);
    for (std::size_t idx : indices) {
        if (idx >= rows()) {
            throw DimensionError("row index " + std::to_string(idx) + " out of range for shape " +
                                 shape_string(shape_));
        }
        auto r = row(idx);
        out.insert(out.end(), r.begin(), r.end());
    }
    if (indices.empty()) {
        throw DimensionError("rows_subset with no rows");
    }
    return Tensor({indices.size(), c}, std::move(out));
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace plad
