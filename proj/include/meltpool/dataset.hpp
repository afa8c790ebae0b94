#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meltpool/solver.hpp"
#include "meltpool/tensor.hpp"

namespace meltpool {

struct NormalizationSpec {
    double t_min = 293.0;
    double t_max = 6500.0;
    double clip_percentile = 99.9;

    double normalize(double T) const {
        double c = T < t_min ? t_min : (T > t_max ? t_max : T);
        return (c - t_min) / (t_max - t_min);
    }
    double denormalize(double n) const { return t_min + n * (t_max - t_min); }
    void validate() const {
        if (!(t_max > t_min)) throw ConfigError("NormalizationSpec: t_max must exceed t_min");
    }
};

// Beam-following crop window, clamped to the domain, top-aligned in z.
struct CropSpec {
    std::size_t lx = 64, ly = 32, lz = 32;
};

enum class Split : std::uint8_t { Train = 0, Val = 1 };

struct ProcessPoint {
    double power_w = 0;       // W
    double velocity_mm_s = 0; // mm/s
    double time_us = 0;       // microseconds
};

struct SampleRecord {
    ProcessPoint point;
    std::string case_id;
    std::uint32_t frame_index = 0;
    Split split = Split::Train;
    std::uint32_t offset[3] = {0, 0, 0};  // crop origin in the simulation grid
    std::uint32_t dims[3] = {0, 0, 0};    // lx, ly, lz
    std::vector<float> field;             // normalized, in [0, 1]
    std::vector<std::uint8_t> mask;       // 1 where raw value == T_amb exactly

    std::size_t voxels() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
};

struct CaseSummary {
    std::string id;
    double power_w = 0;
    double velocity_mm_s = 0;
    Split split = Split::Train;
};

struct RangePair {
    double lo = 0, hi = 0;
    double scale01(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
};

// Simulation-domain geometry shared by all cases of a dataset; used to
// reconstruct the beam-following crop offset at inference time.
struct GridGeometry {
    std::size_t nx = 0, ny = 0, nz = 0;
    double dx = 0.0;
    double beam_start_x = 0.0;  // cells
};

struct DatasetManifest {
    std::vector<CaseSummary> cases;
    NormalizationSpec norm;
    CropSpec crop;
    GridGeometry grid;
    std::string material;
    std::string generator_version;
    std::uint64_t seed = 0;
    double t_ambient = 293.0;
    RangePair power_range, velocity_range, time_range;  // process-point scaling
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SampleRecord> records;

    std::vector<const SampleRecord*> split_records(Split s) const;
};

// 99.9th-percentile (linear-interpolated order statistic) of all raw
// temperatures strictly above t_melt, pooled over all frames of all cases.
double compute_clip_threshold(const std::vector<CaseResult>& cases, double t_melt,
                              double percentile = 99.9);

// Linear-interpolation order statistic of a sample (p in [0, 100]).
double percentile_linear(std::vector<double> values, double p);

// Crops one frame around the beam cell position, clamped to the domain.
struct CropResult {
    std::vector<float> field;
    std::uint32_t offset[3];
};
CropResult crop_roi(const std::vector<float>& frame, std::size_t nx, std::size_t ny,
                    std::size_t nz, const CropSpec& crop, double beam_x_cells,
                    double beam_y_cells);

// mask = 1 where the raw 32-bit value equals t_ambient exactly (carved voids
// and unheated cells alike).
std::vector<std::uint8_t> build_mask_target(const std::vector<float>& raw_frame,
                                            float t_ambient);

// Case-level random split, deterministic per seed.
void split_train_val(DatasetManifest& manifest, double fraction, std::uint64_t seed);

// Builds normalized, cropped samples for every frame of every raw case dir.
Dataset build_dataset(const std::vector<std::string>& case_dirs, const CropSpec& crop,
                      const NormalizationSpec& norm, double split_fraction,
                      std::uint64_t seed);

// Dataset container: <dir>/manifest.json + samples.bin (magic/version prefix,
// trailing checksum). Round trips are bit-exact.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Scales a process point to [0,1]^3 with the manifest ranges.
void scale_process_point(const DatasetManifest& m, const ProcessPoint& p, double out[3]);

}  // namespace meltpool
