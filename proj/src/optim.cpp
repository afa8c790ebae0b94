#include "meltpool/optim.hpp"

#include <cmath>
#include <limits>

namespace meltpool {

void Adam::step(std::vector<ParamRef>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].tensor->numel(), 0.0);
            v_[i].assign(params[i].tensor->numel(), 0.0);
        }
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(opts_.beta1, t);
    const double bc2 = 1.0 - std::pow(opts_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].tensor;
        const auto& g = p.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (std::isnan(g[k]))
                throw NumericError("Adam::step: NaN gradient in parameter " + params[i].name);
            m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g[k];
            v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= lr_ * mhat / (std::sqrt(vhat) + opts_.epsilon);
        }
    }
}

bool PlateauScheduler::step(double epoch_avg_loss, Adam& optimizer) {
    if (epoch_avg_loss < best_loss_) {
        best_loss_ = epoch_avg_loss;
        bad_epochs_ = 0;
        return false;
    }
    ++bad_epochs_;
    if (bad_epochs_ <= opts_.patience) return false;
    bad_epochs_ = 0;
    const double lr = std::max(optimizer.learning_rate() * opts_.factor, opts_.minimum_lr);
    optimizer.set_learning_rate(lr);
    return true;
}

}  // namespace meltpool
