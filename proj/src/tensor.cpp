#include "sadepth/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sadepth {

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
        throw std::invalid_argument("Tensor: value count " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

int64_t Tensor::shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
        n *= d;
    }
    return n;
}

int64_t Tensor::flat_index(std::initializer_list<int64_t> idx) const {
    if (static_cast<int64_t>(idx.size()) != ndim()) {
        throw std::invalid_argument("Tensor::at: rank mismatch");
    }
    int64_t flat = 0;
    size_t k = 0;
    for (int64_t i : idx) {
        flat = flat * shape_[k] + i;
        ++k;
    }
    return flat;
}

double& Tensor::at(std::initializer_list<int64_t> idx) { return data_[static_cast<size_t>(flat_index(idx))]; }
double Tensor::at(std::initializer_list<int64_t> idx) const { return data_[static_cast<size_t>(flat_index(idx))]; }

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item: numel != 1");
    return data_[0];
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw std::invalid_argument("Tensor::reshaped: numel mismatch " + shape_str(shape_) + " -> " +
                                    shape_str(new_shape));
    }
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

} // namespace sadepth
