#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "meltpool/common.hpp"

namespace meltpool {

// Dense N-d array of doubles, row-major (last axis fastest), with an optional
// gradient buffer of the same length.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(numel_of(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw DimensionError("Tensor: data length " + std::to_string(data_.size()) +
                                 " does not match shape product " +
                                 std::to_string(numel_of(shape_)));
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool has_grad() const { return !grad_.empty(); }

    std::vector<double>& grad() {
        if (grad_.empty()) grad_.assign(data_.size(), 0.0);
        return grad_;
    }
    const std::vector<double>& grad() const {
        if (grad_.size() != data_.size())
            throw StateError("Tensor: gradient buffer not allocated");
        return grad_;
    }

    void zero_grad() { grad_.assign(data_.size(), 0.0); }
    void drop_grad() { grad_.clear(); }

    // Reinterpret under a new shape with identical element count.
    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        if (numel_of(new_shape) != data_.size())
            throw DimensionError("Tensor::reshaped: element count mismatch");
        Tensor t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    double min() const;
    double max() const;
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Throws DimensionError naming `what` unless the two shapes agree.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace meltpool
