#pragma once

#include <cstdint>
#include <vector>

#include "meltpool/network.hpp"

namespace meltpool {

// Adam with bias correction. Moment buffers are keyed by parameter order and
// allocated on the first step.
class Adam {
public:
    struct Options {
        double learning_rate = 2e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    Adam() : Adam(Options()) {}
    explicit Adam(Options opts) : opts_(opts), lr_(opts.learning_rate) {}

    // Applies one update from the accumulated gradients. Throws NumericError
    // naming the parameter if any gradient is NaN.
    void step(std::vector<ParamRef>& params);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    std::uint64_t step_count() const { return step_count_; }

private:
    Options opts_;
    double lr_;
    std::uint64_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Reduce-on-plateau: a "bad" epoch is one whose mean loss is not a strict
// improvement on the best seen; when the bad-epoch counter exceeds patience
// the learning rate is multiplied by factor (floored at minimum_lr) and the
// counter resets.
class PlateauScheduler {
public:
    struct Options {
        double factor = 0.2;
        int patience = 3;
        double minimum_lr = 1e-7;
    };

    PlateauScheduler() : PlateauScheduler(Options()) {}
    explicit PlateauScheduler(Options opts) : opts_(opts) {}

    // Call once per epoch with the epoch-mean training loss. Returns true if
    // the learning rate was reduced this epoch.
    bool step(double epoch_avg_loss, Adam& optimizer);

    double best_loss() const { return best_loss_; }
    int epochs_since_improvement() const { return bad_epochs_; }
    const Options& options() const { return opts_; }

private:
    Options opts_;
    double best_loss_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

}  // namespace meltpool
