#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace sadepth {

/// Dense row-major tensor of doubles. Value semantics; shape {1} is a scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, double fill);
    Tensor(std::vector<int64_t> shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Multi-index access, slow path for tests and small tensors.
    double& at(std::initializer_list<int64_t> idx);
    double at(std::initializer_list<int64_t> idx) const;

    /// Single value of a scalar (numel must be 1).
    double item() const;

    /// Same data, new shape; element counts must agree.
    Tensor reshaped(std::vector<int64_t> new_shape) const;

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;
    static std::string shape_str(const std::vector<int64_t>& shape);
    static int64_t shape_numel(const std::vector<int64_t>& shape);

private:
    int64_t flat_index(std::initializer_list<int64_t> idx) const;

    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

} // namespace sadepth
