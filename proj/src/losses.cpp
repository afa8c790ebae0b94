#include "meltpool/losses.hpp"

#include <cmath>

namespace meltpool {

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    const std::size_t n = pred.numel();
    LossResult r;
    r.grad = Tensor(pred.shape());
    double acc = 0.0;
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
        r.grad[i] = scale * d;
    }
    r.value = acc / static_cast<double>(n);
    return r;
}

LossResult bce_loss(const Tensor& pred, const Tensor& target, double eps) {
    require_same_shape(pred, target, "bce_loss");
    const std::size_t n = pred.numel();
    LossResult r;
    r.grad = Tensor(pred.shape());
    double acc = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double p = pred[i];
        if (p < eps) p = eps;
        if (p > 1.0 - eps) p = 1.0 - eps;
        const double t = target[i];
        acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        // Gradient through the clamp is zero outside [eps, 1-eps].
        if (pred[i] >= eps && pred[i] <= 1.0 - eps)
            r.grad[i] = inv_n * (p - t) / (p * (1.0 - p));
    }
    r.value = acc * inv_n;
    return r;
}

MaskedLossResult masked_mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask) {
    require_same_shape(pred, target, "masked_mse_loss");
    require_same_shape(pred, mask, "masked_mse_loss(mask)");
    const std::size_t n = pred.numel();
    MaskedLossResult r;
    r.grad = Tensor(pred.shape());
    std::size_t live = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i] == 0.0) ++live;
    if (live == 0) {
        r.all_masked = true;
        return r;
    }
    double acc = 0.0;
    const double scale = 2.0 / static_cast<double>(live);
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] != 0.0) continue;
        const double d = pred[i] - target[i];
        acc += d * d;
        r.grad[i] = scale * d;
    }
    r.value = acc / static_cast<double>(live);
    return r;
}

}  // namespace meltpool
