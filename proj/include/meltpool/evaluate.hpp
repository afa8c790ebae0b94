#pragma once

#include "meltpool/metrics.hpp"
#include "meltpool/surrogate.hpp"

namespace meltpool {

// Composite-vs-truth metrics for every record of the chosen split(s), in
// sorted (case, frame) order. Work is split across `workers` threads with a
// deterministic merge.
std::vector<MetricsRecord> evaluate_dataset(const Dataset& dataset, const Checkpoint& mt,
                                            const Checkpoint& m, bool include_train = true,
                                            bool include_val = true, unsigned workers = 1);

}  // namespace meltpool
