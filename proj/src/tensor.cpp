#include "eeo/tensor.hpp"

#include <cmath>
#include <sstream>

#include "eeo/errors.hpp"

namespace eeo {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(Shape shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

int Tensor::dim(int i) const {
    if (i < 0 || i >= rank()) {
        throw ShapeError("dim index " + std::to_string(i) + " out of range for " + shape_str(shape_));
    }
    return shape_[static_cast<std::size_t>(i)];
}

float& Tensor::at4(int n, int c, int h, int w) {
    const int C = shape_[1], H = shape_[2], W = shape_[3];
    return data_[static_cast<std::size_t>(((n * C + c) * H + h) * W + w)];
}

float Tensor::at4(int n, int c, int h, int w) const {
    const int C = shape_[1], H = shape_[2], W = shape_[3];
    return data_[static_cast<std::size_t>(((n * C + c) * H + h) * W + w)];
}

float& Tensor::at2(int r, int c) { return data_[static_cast<std::size_t>(r * shape_[1] + c)]; }
float Tensor::at2(int r, int c) const { return data_[static_cast<std::size_t>(r * shape_[1] + c)]; }

void Tensor::fill(float v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (float x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Tensor::require_finite(const char* what) const {
    if (!all_finite()) {
        throw ValueError(std::string(what) + " contains non-finite values");
    }
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (t.shape() != expected) {
        throw ShapeError(std::string(what) + ": expected shape " + shape_str(expected) +
                         ", got " + shape_str(t.shape()));
    }
}

} // namespace eeo
