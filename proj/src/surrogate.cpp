#include "meltpool/surrogate.hpp"

#include <cmath>
#include <iostream>

#include "meltpool/losses.hpp"
#include "meltpool/rng.hpp"

namespace meltpool {

using nlohmann::json;

const char* role_name(Role r) {
    switch (r) {
        case Role::T: return "T";
        case Role::M: return "M";
        case Role::MT: return "MT";
    }
    return "?";
}

Role role_from_name(const std::string& s) {
    if (s == "T" || s == "t") return Role::T;
    if (s == "M" || s == "m") return Role::M;
    if (s == "MT" || s == "mt") return Role::MT;
    throw ConfigError("unknown role '" + s + "' (expected t, m or mt)");
}

void SurrogateConfig::validate() const {
    if (c0 < 1) throw ConfigError("SurrogateConfig: c0 must be >= 1");
    const std::size_t f = std::size_t{1} << stages;
    if (coarse[0] * f != crop.lx || coarse[1] * f != crop.ly || coarse[2] * f != crop.lz)
        throw ConfigError("SurrogateConfig: coarse dims " + std::to_string(coarse[0]) + "x" +
                          std::to_string(coarse[1]) + "x" + std::to_string(coarse[2]) +
                          " doubled " + std::to_string(stages) +
                          " times do not match crop window " + std::to_string(crop.lx) + "x" +
                          std::to_string(crop.ly) + "x" + std::to_string(crop.lz));
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
        throw ConfigError("SurrogateConfig: leaky slope must be in (0, 1)");
    if (batch_size < 1) throw ConfigError("SurrogateConfig: batch_size must be >= 1");
}

void SurrogateConfig::adopt_manifest(const DatasetManifest& m) {
    norm = m.norm;
    power_range = m.power_range;
    velocity_range = m.velocity_range;
    time_range = m.time_range;
    crop = m.crop;
    grid = m.grid;
    t_ambient = m.t_ambient;
    material = m.material;
}

json SurrogateConfig::to_json() const {
    json j;
    j["coarse"] = coarse;
    j["c0"] = c0;
    j["stages"] = stages;
    j["leaky_slope"] = leaky_slope;
    j["batch_size"] = batch_size;
    j["max_epochs"] = max_epochs;
    j["seed"] = seed;
    j["learning_rate"] = learning_rate;
    j["sched_factor"] = sched_factor;
    j["sched_patience"] = sched_patience;
    j["min_lr"] = min_lr;
    j["early_stop_loss"] = early_stop_loss;
    j["masker_mse"] = masker_mse;
    j["warm_start_masker"] = warm_start_masker;
    j["train_with_predicted_masks"] = train_with_predicted_masks;
    j["norm"] = {{"t_min", norm.t_min},
                 {"t_max", norm.t_max},
                 {"clip_percentile", norm.clip_percentile}};
    j["power_range"] = {power_range.lo, power_range.hi};
    j["velocity_range"] = {velocity_range.lo, velocity_range.hi};
    j["time_range"] = {time_range.lo, time_range.hi};
    j["crop"] = {crop.lx, crop.ly, crop.lz};
    j["grid"] = {{"dims", {grid.nx, grid.ny, grid.nz}},
                 {"dx", grid.dx},
                 {"beam_start_x", grid.beam_start_x}};
    j["t_ambient"] = t_ambient;
    j["material"] = material;
    return j;
}

SurrogateConfig SurrogateConfig::from_json(const json& j) {
    SurrogateConfig c;
    c.coarse = {j.at("coarse")[0], j.at("coarse")[1], j.at("coarse")[2]};
    c.c0 = j.at("c0");
    c.stages = j.at("stages");
    c.leaky_slope = j.at("leaky_slope");
    c.batch_size = j.at("batch_size");
    c.max_epochs = j.at("max_epochs");
    c.seed = j.at("seed");
    c.learning_rate = j.at("learning_rate");
    c.sched_factor = j.at("sched_factor");
    c.sched_patience = j.at("sched_patience");
    c.min_lr = j.at("min_lr");
    c.early_stop_loss = j.at("early_stop_loss");
    c.masker_mse = j.at("masker_mse");
    c.warm_start_masker = j.at("warm_start_masker");
    c.train_with_predicted_masks = j.at("train_with_predicted_masks");
    c.norm.t_min = j.at("norm").at("t_min");
    c.norm.t_max = j.at("norm").at("t_max");
    c.norm.clip_percentile = j.at("norm").at("clip_percentile");
    c.power_range = {j.at("power_range")[0], j.at("power_range")[1]};
    c.velocity_range = {j.at("velocity_range")[0], j.at("velocity_range")[1]};
    c.time_range = {j.at("time_range")[0], j.at("time_range")[1]};
    c.crop.lx = j.at("crop")[0];
    c.crop.ly = j.at("crop")[1];
    c.crop.lz = j.at("crop")[2];
    c.grid.nx = j.at("grid").at("dims")[0];
    c.grid.ny = j.at("grid").at("dims")[1];
    c.grid.nz = j.at("grid").at("dims")[2];
    c.grid.dx = j.at("grid").at("dx");
    c.grid.beam_start_x = j.at("grid").at("beam_start_x");
    c.t_ambient = j.at("t_ambient");
    c.material = j.at("material");
    return c;
}

NetworkSpec build_network(const SurrogateConfig& config, Role role) {
    config.validate();
    NetworkSpec spec;
    const std::size_t coarse_vol = config.coarse[0] * config.coarse[1] * config.coarse[2];
    spec.push_back(LayerSpec::fully_connected(3, config.c0 * coarse_vol));
    spec.push_back(LayerSpec::reshape(
        {config.c0, config.coarse[0], config.coarse[1], config.coarse[2]}));
    std::size_t channels = config.c0;
    for (std::size_t s = 1; s <= config.stages; ++s) {
        const std::size_t next = std::max<std::size_t>(config.c0 >> s, 1);
        spec.push_back(LayerSpec::upsample());
        spec.push_back(LayerSpec::conv3d(channels, next));
        spec.push_back(LayerSpec::leaky_relu(config.leaky_slope));
        channels = next;
    }
    spec.push_back(LayerSpec::conv3d(channels, 1));
    if (role == Role::M)
        spec.push_back(LayerSpec::sigmoid());
    else
        spec.push_back(LayerSpec::valved_leaky_relu(config.leaky_slope));
    return spec;
}

// ---------------------------------------------------------------------------
// Training

namespace {

Tensor input_batch(const SurrogateConfig& config, const std::vector<const SampleRecord*>& recs,
                   const std::vector<std::size_t>& idx, std::size_t b0, std::size_t b1) {
    Tensor in({b1 - b0, 3});
    for (std::size_t b = b0; b < b1; ++b) {
        double scaled[3];
        scaled[0] = config.power_range.scale01(recs[idx[b]]->point.power_w);
        scaled[1] = config.velocity_range.scale01(recs[idx[b]]->point.velocity_mm_s);
        scaled[2] = config.time_range.scale01(recs[idx[b]]->point.time_us);
        for (int a = 0; a < 3; ++a) in[(b - b0) * 3 + a] = scaled[a];
    }
    return in;
}

Tensor field_batch(const SurrogateConfig& config, const std::vector<const SampleRecord*>& recs,
                   const std::vector<std::size_t>& idx, std::size_t b0, std::size_t b1,
                   bool use_mask) {
    const std::size_t vol = config.crop.lx * config.crop.ly * config.crop.lz;
    Tensor t({b1 - b0, 1, config.crop.lx, config.crop.ly, config.crop.lz});
    for (std::size_t b = b0; b < b1; ++b) {
        const auto* r = recs[idx[b]];
        double* dst = t.data() + (b - b0) * vol;
        if (use_mask) {
            for (std::size_t i = 0; i < vol; ++i) dst[i] = r->mask[i];
        } else {
            for (std::size_t i = 0; i < vol; ++i) dst[i] = r->field[i];
        }
    }
    return t;
}

struct BatchLoss {
    double value;
    Tensor grad;
    bool skip = false;
};

using LossFn = std::function<BatchLoss(const Tensor& pred, const std::vector<std::size_t>& idx,
                                       std::size_t b0, std::size_t b1)>;

TrainResult train_loop(const Dataset& dataset, const SurrogateConfig& config, Role role,
                       Network& net, const LossFn& loss_fn, const EpochCallback& on_epoch) {
    auto recs = dataset.split_records(Split::Train);
    if (recs.empty()) throw ConfigError("training requires a non-empty train split");

    Adam optimizer({config.learning_rate});
    PlateauScheduler scheduler({config.sched_factor, config.sched_patience, config.min_lr});
    auto params = net.parameters();

    json meta;
    meta["config"] = config.to_json();
    meta["history"] = json::array();

    TrainResult result;
    result.checkpoint = Checkpoint::capture(net, config.seed, role_name(role), meta);

    Rng shuffle_rng(config.seed ^ 0x5473ull ^ static_cast<std::uint64_t>(role));
    std::vector<std::size_t> idx(recs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(idx);
        double loss_sum = 0.0;
        std::size_t batch_count = 0;
        for (std::size_t b0 = 0; b0 < idx.size(); b0 += config.batch_size) {
            const std::size_t b1 = std::min(idx.size(), b0 + config.batch_size);
            Tensor in = input_batch(config, recs, idx, b0, b1);
            Tensor pred = net.forward(in, Mode::Train);
            BatchLoss loss = loss_fn(pred, idx, b0, b1);
            if (loss.skip) continue;
            if (!std::isfinite(loss.value)) {
                std::cerr << "warning: " << role_name(role) << " training diverged at epoch "
                          << epoch << "; keeping last good checkpoint\n";
                return result;
            }
            net.zero_grads();
            net.backward(loss.grad);
            optimizer.step(params);
            loss_sum += loss.value;
            ++batch_count;
        }
        const double epoch_loss = batch_count ? loss_sum / static_cast<double>(batch_count)
                                              : 0.0;
        EpochStat stat{epoch, epoch_loss, optimizer.learning_rate()};
        result.history.push_back(stat);
        meta["history"].push_back(
            {{"epoch", epoch}, {"loss", epoch_loss}, {"lr", optimizer.learning_rate()}});
        if (on_epoch) on_epoch(stat);
        result.checkpoint = Checkpoint::capture(net, config.seed, role_name(role), meta);
        scheduler.step(epoch_loss, optimizer);
        if (optimizer.learning_rate() <= config.min_lr) break;
        if (config.early_stop_loss > 0.0 && epoch_loss <= config.early_stop_loss) break;
    }
    return result;
}

// Re-initializes the final conv layer of a warm-started masker.
void reinit_final_conv(Network& net, std::uint64_t seed) {
    for (std::size_t i = net.layer_count(); i-- > 0;) {
        if (net.layer(i).spec().kind != LayerSpec::Kind::Conv3D) continue;
        auto ps = net.layer(i).params();
        Rng rng(seed ^ 0xf17a1ull);
        const double stdev = std::sqrt(2.0 / (net.layer(i).spec().in_channels * 27.0));
        for (double& v : ps[0]->vec()) v = rng.normal(0.0, stdev);
        std::fill(ps[1]->vec().begin(), ps[1]->vec().end(), 0.0);
        return;
    }
}

}  // namespace

TrainResult train_tcnn(const Dataset& dataset, const SurrogateConfig& config,
                       const EpochCallback& on_epoch) {
    Network net(build_network(config, Role::T));
    net.init_parameters(config.seed);
    auto recs = dataset.split_records(Split::Train);
    LossFn loss_fn = [&](const Tensor& pred, const std::vector<std::size_t>& idx,
                         std::size_t b0, std::size_t b1) -> BatchLoss {
        Tensor target = field_batch(config, recs, idx, b0, b1, false);
        auto r = mse_loss(pred, target);
        return {r.value, std::move(r.grad)};
    };
    return train_loop(dataset, config, Role::T, net, loss_fn, on_epoch);
}

TrainResult train_mcnn(const Dataset& dataset, const SurrogateConfig& config,
                       const Checkpoint& pretrained_t, const EpochCallback& on_epoch) {
    Network net(build_network(config, Role::M));
    if (config.warm_start_masker) {
        std::vector<double> flat(pretrained_t.parameters.begin(),
                                 pretrained_t.parameters.end());
        net.load_parameters(flat);
        reinit_final_conv(net, config.seed);
    } else {
        net.init_parameters(config.seed + 1);
    }
    auto recs = dataset.split_records(Split::Train);
    LossFn loss_fn = [&](const Tensor& pred, const std::vector<std::size_t>& idx,
                         std::size_t b0, std::size_t b1) -> BatchLoss {
        Tensor target = field_batch(config, recs, idx, b0, b1, true);
        LossResult r = config.masker_mse ? mse_loss(pred, target) : bce_loss(pred, target);
        return {r.value, std::move(r.grad)};
    };
    return train_loop(dataset, config, Role::M, net, loss_fn, on_epoch);
}

TrainResult train_mtcnn(const Dataset& dataset, const SurrogateConfig& config,
                        const Checkpoint& mask_source, const EpochCallback& on_epoch) {
    Network net(build_network(config, Role::MT));
    net.init_parameters(config.seed + 2);
    auto recs = dataset.split_records(Split::Train);

    std::unique_ptr<Network> masker;
    if (config.train_with_predicted_masks)
        masker = std::make_unique<Network>(mask_source.instantiate());

    bool warned_all_masked = false;
    LossFn loss_fn = [&, warned_all_masked](const Tensor& pred,
                                            const std::vector<std::size_t>& idx,
                                            std::size_t b0, std::size_t b1) mutable
        -> BatchLoss {
        Tensor target = field_batch(config, recs, idx, b0, b1, false);
        Tensor mask({0});
        if (masker) {
            Tensor in = input_batch(config, recs, idx, b0, b1);
            mask = masker->forward(in, Mode::Eval);
            for (double& v : mask.vec()) v = v >= 0.5 ? 1.0 : 0.0;
        } else {
            mask = field_batch(config, recs, idx, b0, b1, true);
        }
        auto r = masked_mse_loss(pred, target, mask);
        if (r.all_masked) {
            if (!warned_all_masked) {
                std::cerr << "warning: fully-masked batch contributes no loss; skipped\n";
                warned_all_masked = true;
            }
            return {0.0, Tensor({0}), true};
        }
        return {r.value, std::move(r.grad)};
    };
    return train_loop(dataset, config, Role::MT, net, loss_fn, on_epoch);
}

// ---------------------------------------------------------------------------
// Inference

Tensor forward_point(Network& net, const SurrogateConfig& config, const ProcessPoint& p,
                     Mode mode) {
    Tensor in({1, 3});
    in[0] = config.power_range.scale01(p.power_w);
    in[1] = config.velocity_range.scale01(p.velocity_mm_s);
    in[2] = config.time_range.scale01(p.time_us);
    return net.forward(in, mode);
}

SurrogateConfig config_of_checkpoint(const Checkpoint& c) {
    if (!c.meta.contains("config"))
        throw FormatError("checkpoint carries no surrogate config");
    return SurrogateConfig::from_json(c.meta.at("config"));
}

Tensor predict_composite(const ProcessPoint& p, const Checkpoint& mt, const Checkpoint& m) {
    const SurrogateConfig mt_cfg = config_of_checkpoint(mt);
    const SurrogateConfig m_cfg = config_of_checkpoint(m);
    if (mt_cfg.crop.lx != m_cfg.crop.lx || mt_cfg.crop.ly != m_cfg.crop.ly ||
        mt_cfg.crop.lz != m_cfg.crop.lz)
        throw ConfigError("predict_composite: MT and M checkpoints disagree on crop dims");
    Network mt_net = mt.instantiate();
    Network m_net = m.instantiate();
    Tensor field = forward_point(mt_net, mt_cfg, p, Mode::Eval);
    Tensor mask = forward_point(m_net, m_cfg, p, Mode::Eval);
    for (std::size_t i = 0; i < field.numel(); ++i)
        if (mask[i] >= 0.5) field[i] = 0.0;
    return field;
}

InferenceResult infer_field(double power_w, double velocity_mm_s, double time_us,
                            const Checkpoint& mt, const Checkpoint& m) {
    const SurrogateConfig cfg = config_of_checkpoint(mt);
    const ProcessPoint p{power_w, velocity_mm_s, time_us};
    InferenceResult r;
    r.norm = cfg.norm;
    r.out_of_range = power_w < cfg.power_range.lo || power_w > cfg.power_range.hi ||
                     velocity_mm_s < cfg.velocity_range.lo ||
                     velocity_mm_s > cfg.velocity_range.hi || time_us < cfg.time_range.lo ||
                     time_us > cfg.time_range.hi;
    r.field_kelvin = predict_composite(p, mt, m);
    for (double& v : r.field_kelvin.vec()) v = cfg.norm.denormalize(v);
    if (cfg.grid.nx > 0) {
        // Reconstruct the beam-following crop origin used by the pipeline.
        const double t_s = time_us * 1e-6;
        const double bx = cfg.grid.beam_start_x + (velocity_mm_s * 1e-3) * t_s / cfg.grid.dx;
        const double by = 0.5 * static_cast<double>(cfg.grid.ny);
        auto clamp_origin = [](double center, std::size_t window, std::size_t extent) {
            double o = center - static_cast<double>(window) / 2.0;
            if (o < 0.0) o = 0.0;
            const double o_max = static_cast<double>(extent - window);
            if (o > o_max) o = o_max;
            return static_cast<std::uint32_t>(std::llround(o));
        };
        r.crop_offset[0] = clamp_origin(bx, cfg.crop.lx, cfg.grid.nx);
        r.crop_offset[1] = clamp_origin(by, cfg.crop.ly, cfg.grid.ny);
        r.crop_offset[2] = 0;
    }
    return r;
}

}  // namespace meltpool
