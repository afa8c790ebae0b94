#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meltpool/material.hpp"
#include "meltpool/tensor.hpp"

namespace meltpool {

struct MetricsRecord {
    std::string case_id;
    std::uint32_t frame_index = 0;
    double power_w = 0, velocity_mm_s = 0, time_us = 0;
    double rmse_pct = 0;
    double iou_pct = 0;
    std::size_t melt_pred = 0, melt_truth = 0, melt_intersection = 0, melt_union = 0;
};

// 100 * sqrt(mean((pred - truth)^2)) over normalized fields.
double relative_rmse(const std::vector<double>& pred_norm,
                     const std::vector<double>& truth_norm);

// mask = (T > T_melt), T_melt = (T_L + T_S) / 2, on a Kelvin field.
std::vector<std::uint8_t> melt_mask(const std::vector<double>& field_kelvin,
                                    const MaterialProperties& mat);

// 100 * |A n B| / |A u B|; both-empty convention: 100.
double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

struct CaseAggregate {
    std::string case_id;
    double power_w = 0, velocity_mm_s = 0;
    double mean_rmse = 0, mean_iou = 0;
    std::size_t count = 0;
};

struct FrameAggregate {
    std::uint32_t frame_index = 0;
    double median_rmse = 0, rmse_q1 = 0, rmse_q3 = 0;
    double median_iou = 0, iou_q1 = 0, iou_q3 = 0;
    std::size_t count = 0;
};

struct DatasetAggregate {
    double mean_rmse = 0, stdev_rmse = 0;
    double mean_iou = 0, stdev_iou = 0;
    std::size_t count = 0;
};

std::vector<CaseAggregate> aggregate_by_case(const std::vector<MetricsRecord>& records);
std::vector<FrameAggregate> aggregate_by_timestep(const std::vector<MetricsRecord>& records);
DatasetAggregate aggregate_dataset(const std::vector<MetricsRecord>& records);

// CSV with the fixed header "case,frame,P,V,t,rmse_pct,iou_pct".
extern const char* kReportHeader;
void emit_report(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> parse_report(const std::string& path);

// 8-bit binary PGM (P5) of one axis slice of a normalized field [X, Y, Z];
// pixel = round(255 * value). For an xy slice rows are y, columns x.
void emit_slice_image(const std::vector<double>& field_norm, std::size_t nx, std::size_t ny,
                      std::size_t nz, char axis, std::size_t index, const std::string& path);

}  // namespace meltpool
