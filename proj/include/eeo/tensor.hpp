#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eeo {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major f32 array; the universal value type for activations,
/// weights and offload payloads.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor full(Shape shape, float value);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& vec() { return data_; }
    const std::vector<float>& vec() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    /// 4-d accessor for [N,C,H,W] tensors.
    float& at4(int n, int c, int h, int w);
    float at4(int n, int c, int h, int w) const;
    /// 2-d accessor for [N,K] tensors.
    float& at2(int r, int c);
    float at2(int r, int c) const;

    void fill(float v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    /// Throws ValueError if any element is NaN/Inf; `what` names the tensor in the message.
    void require_finite(const char* what) const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Shape shape_;
    std::vector<float> data_;
};

/// Throws ShapeError naming `what`, expected and actual when shapes differ.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

} // namespace eeo
