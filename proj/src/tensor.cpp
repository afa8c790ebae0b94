#include "meltpool/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace meltpool {

double Tensor::min() const {
    if (data_.empty()) throw StateError("Tensor::min on empty tensor");
    return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const {
    if (data_.empty()) throw StateError("Tensor::max on empty tensor");
    return *std::max_element(data_.begin(), data_.end());
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.same_shape(b)) return;
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    std::size_t axis = 0;
    for (; axis < std::min(sa.size(), sb.size()); ++axis)
        if (sa[axis] != sb[axis]) break;
    throw DimensionError(std::string(what) + ": shape mismatch at axis " +
                         std::to_string(axis) + ", " + shape_str(sa) + " vs " + shape_str(sb));
}

}  // namespace meltpool
