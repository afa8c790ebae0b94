#pragma once

#include "meltpool/tensor.hpp"

namespace meltpool {

// Scalar loss value plus d(loss)/d(pred).
struct LossResult {
    double value = 0.0;
    Tensor grad;
};

// Mean over all elements of (pred - target)^2.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

// Mean of -[t*ln(p) + (1-t)*ln(1-p)]; pred clamped to [eps, 1-eps].
LossResult bce_loss(const Tensor& pred, const Tensor& target, double eps = 1e-7);

// MSE averaged only over voxels where mask == 0; masked voxels carry exactly
// zero gradient. A fully-masked sample yields value 0 and all_masked = true.
struct MaskedLossResult : LossResult {
    bool all_masked = false;
};
MaskedLossResult masked_mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask);

}  // namespace meltpool
