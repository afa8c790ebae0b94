#pragma once

#include <array>
#include <functional>
#include <string>

#include <json.hpp>

#include "meltpool/checkpoint.hpp"
#include "meltpool/dataset.hpp"
#include "meltpool/optim.hpp"

namespace meltpool {

enum class Role { T, M, MT };
const char* role_name(Role r);
Role role_from_name(const std::string& s);

// Everything needed to build, train and later run one of the three networks.
// Coarse dims doubled `stages` times must equal the dataset crop window.
struct SurrogateConfig {
    std::array<std::size_t, 3> coarse = {4, 2, 2};
    std::size_t c0 = 128;        // channels of the first spatial feature map
    std::size_t stages = 4;      // upsample+conv blocks, channels halving
    double leaky_slope = 0.01;
    std::size_t batch_size = 4;
    std::size_t max_epochs = 300;
    std::uint64_t seed = 0;
    double learning_rate = 2e-4;
    double sched_factor = 0.2;
    int sched_patience = 3;
    double min_lr = 1e-7;
    double early_stop_loss = 0.0;        // 0 disables the loss-target stop
    bool masker_mse = false;             // masker loss: BCE (default) or MSE
    bool warm_start_masker = true;       // M-CNN starts from the T weights
    bool train_with_predicted_masks = false;

    // Dataset-derived context, copied from the manifest at training time.
    NormalizationSpec norm;
    RangePair power_range, velocity_range, time_range;
    CropSpec crop;
    GridGeometry grid;
    double t_ambient = 293.0;
    std::string material = "ti64";

    void validate() const;
    void adopt_manifest(const DatasetManifest& m);

    nlohmann::json to_json() const;
    static SurrogateConfig from_json(const nlohmann::json& j);
};

// FC stem -> reshape to the coarse grid -> stages x [upsample, conv, leaky]
// -> 1-channel conv -> valved leaky (T/MT) or sigmoid (M).
NetworkSpec build_network(const SurrogateConfig& config, Role role);

struct EpochStat {
    std::size_t epoch;
    double mean_loss;
    double learning_rate;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStat> history;
};

using EpochCallback = std::function<void(const EpochStat&)>;

TrainResult train_tcnn(const Dataset& dataset, const SurrogateConfig& config,
                       const EpochCallback& on_epoch = {});
TrainResult train_mcnn(const Dataset& dataset, const SurrogateConfig& config,
                       const Checkpoint& pretrained_t, const EpochCallback& on_epoch = {});
TrainResult train_mtcnn(const Dataset& dataset, const SurrogateConfig& config,
                        const Checkpoint& mask_source, const EpochCallback& on_epoch = {});

// Single forward pass for one process point; output [1, 1, lx, ly, lz].
Tensor forward_point(Network& net, const SurrogateConfig& config, const ProcessPoint& p,
                     Mode mode);

// Normalized composite: M-CNN mask (threshold 0.5) forces exact 0, MT-CNN
// output elsewhere.
Tensor predict_composite(const ProcessPoint& p, const Checkpoint& mt, const Checkpoint& m);

struct InferenceResult {
    Tensor field_kelvin;           // [1, 1, lx, ly, lz]
    std::uint32_t crop_offset[3] = {0, 0, 0};
    NormalizationSpec norm;
    bool out_of_range = false;     // process point outside training ranges
};

InferenceResult infer_field(double power_w, double velocity_mm_s, double time_us,
                            const Checkpoint& mt, const Checkpoint& m);

SurrogateConfig config_of_checkpoint(const Checkpoint& c);

}  // namespace meltpool
