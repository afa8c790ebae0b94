#include "meltpool/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace meltpool {

const char* kReportHeader = "case,frame,P,V,t,rmse_pct,iou_pct";

double relative_rmse(const std::vector<double>& pred_norm,
                     const std::vector<double>& truth_norm) {
    if (pred_norm.size() != truth_norm.size())
        throw DimensionError("relative_rmse: field sizes differ (" +
                             std::to_string(pred_norm.size()) + " vs " +
                             std::to_string(truth_norm.size()) + ")");
    if (pred_norm.empty()) throw DimensionError("relative_rmse: empty fields");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred_norm.size(); ++i) {
        const double d = pred_norm[i] - truth_norm[i];
        acc += d * d;
    }
    return 100.0 * std::sqrt(acc / static_cast<double>(pred_norm.size()));
}

std::vector<std::uint8_t> melt_mask(const std::vector<double>& field_kelvin,
                                    const MaterialProperties& mat) {
    const double t_melt = mat.t_melt();
    std::vector<std::uint8_t> mask(field_kelvin.size());
    for (std::size_t i = 0; i < field_kelvin.size(); ++i)
        mask[i] = field_kelvin[i] > t_melt ? 1 : 0;
    return mask;
}

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size()) throw DimensionError("iou: mask sizes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool va = a[i] != 0, vb = b[i] != 0;
        inter += va && vb;
        uni += va || vb;
    }
    if (uni == 0) return 100.0;  // a correct "no melt yet" prediction
    return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<CaseAggregate> aggregate_by_case(const std::vector<MetricsRecord>& records) {
    std::map<std::string, CaseAggregate> by_case;
    for (const auto& r : records) {
        auto& a = by_case[r.case_id];
        a.case_id = r.case_id;
        a.power_w = r.power_w;
        a.velocity_mm_s = r.velocity_mm_s;
        a.mean_rmse += r.rmse_pct;
        a.mean_iou += r.iou_pct;
        ++a.count;
    }
    std::vector<CaseAggregate> out;
    for (auto& [id, a] : by_case) {
        a.mean_rmse /= static_cast<double>(a.count);
        a.mean_iou /= static_cast<double>(a.count);
        out.push_back(a);
    }
    return out;
}

static void quartiles(std::vector<double> v, double& q1, double& med, double& q3) {
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        const double rank = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(rank);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    q1 = at(0.25);
    med = at(0.5);
    q3 = at(0.75);
}

std::vector<FrameAggregate> aggregate_by_timestep(const std::vector<MetricsRecord>& records) {
    std::map<std::uint32_t, std::pair<std::vector<double>, std::vector<double>>> by_frame;
    for (const auto& r : records) {
        by_frame[r.frame_index].first.push_back(r.rmse_pct);
        by_frame[r.frame_index].second.push_back(r.iou_pct);
    }
    std::vector<FrameAggregate> out;
    for (auto& [frame, vals] : by_frame) {
        FrameAggregate a;
        a.frame_index = frame;
        a.count = vals.first.size();
        quartiles(vals.first, a.rmse_q1, a.median_rmse, a.rmse_q3);
        quartiles(vals.second, a.iou_q1, a.median_iou, a.iou_q3);
        out.push_back(a);
    }
    return out;
}

DatasetAggregate aggregate_dataset(const std::vector<MetricsRecord>& records) {
    DatasetAggregate a;
    a.count = records.size();
    if (records.empty()) return a;
    for (const auto& r : records) {
        a.mean_rmse += r.rmse_pct;
        a.mean_iou += r.iou_pct;
    }
    a.mean_rmse /= static_cast<double>(a.count);
    a.mean_iou /= static_cast<double>(a.count);
    for (const auto& r : records) {
        a.stdev_rmse += (r.rmse_pct - a.mean_rmse) * (r.rmse_pct - a.mean_rmse);
        a.stdev_iou += (r.iou_pct - a.mean_iou) * (r.iou_pct - a.mean_iou);
    }
    a.stdev_rmse = std::sqrt(a.stdev_rmse / static_cast<double>(a.count));
    a.stdev_iou = std::sqrt(a.stdev_iou / static_cast<double>(a.count));
    return a;
}

void emit_report(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << kReportHeader << "\n";
    char buf[512];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%u,%.17g,%.17g,%.17g,%.17g,%.17g",
                      r.case_id.c_str(), r.frame_index, r.power_w, r.velocity_mm_s, r.time_us,
                      r.rmse_pct, r.iou_pct);
        out << buf << "\n";
    }
    if (!out) throw IoError("short write on report: " + path);
}

std::vector<MetricsRecord> parse_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader)
        throw FormatError("report " + path + ": unexpected header '" + line + "'");
    std::vector<MetricsRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        MetricsRecord r;
        std::string field;
        std::getline(ss, r.case_id, ',');
        std::getline(ss, field, ',');
        r.frame_index = static_cast<std::uint32_t>(std::stoul(field));
        std::getline(ss, field, ',');
        r.power_w = std::stod(field);
        std::getline(ss, field, ',');
        r.velocity_mm_s = std::stod(field);
        std::getline(ss, field, ',');
        r.time_us = std::stod(field);
        std::getline(ss, field, ',');
        r.rmse_pct = std::stod(field);
        if (!std::getline(ss, field, ','))
            throw FormatError("report " + path + ": short row '" + line + "'");
        r.iou_pct = std::stod(field);
        records.push_back(std::move(r));
    }
    return records;
}

// Slice orientations: axis 'z' (xy slice) -> y rows, x columns; axis 'y' ->
// z rows, x columns; axis 'x' -> z rows, y columns.
void emit_slice_image(const std::vector<double>& field_norm, std::size_t nx, std::size_t ny,
                      std::size_t nz, char axis, std::size_t index, const std::string& path) {
    if (field_norm.size() != nx * ny * nz)
        throw DimensionError("emit_slice_image: field size does not match dims");
    auto at = [&](std::size_t x, std::size_t y, std::size_t z) {
        return field_norm[(x * ny + y) * nz + z];
    };
    std::size_t rows, cols;
    if (axis == 'z') {
        if (index >= nz) throw ConfigError("slice index out of bounds for axis z");
        rows = ny;
        cols = nx;
    } else if (axis == 'y') {
        if (index >= ny) throw ConfigError("slice index out of bounds for axis y");
        rows = nz;
        cols = nx;
    } else if (axis == 'x') {
        if (index >= nx) throw ConfigError("slice index out of bounds for axis x");
        rows = nz;
        cols = ny;
    } else {
        throw ConfigError(std::string("emit_slice_image: unknown axis '") + axis + "'");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << "P5\n" << cols << " " << rows << "\n255\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double v;
            if (axis == 'z')
                v = at(c, r, index);
            else if (axis == 'y')
                v = at(c, index, r);
            else
                v = at(index, c, r);
            v = std::clamp(v, 0.0, 1.0);
            const auto px = static_cast<unsigned char>(std::lround(255.0 * v));
            out.put(static_cast<char>(px));
        }
    }
    if (!out) throw IoError("short write on image: " + path);
}

}  // namespace meltpool
