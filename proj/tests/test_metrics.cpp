// Metric oracles, aggregation, the CSV report and slice images.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "meltpool/metrics.hpp"

using namespace meltpool;
namespace fs = std::filesystem;

TEST_SUITE("metrics") {

TEST_CASE("relative rmse worked examples") {
    // Constant offset of 0.025 on a normalized field -> 2.5 %.
    std::vector<double> truth(64, 0.4), pred(64, 0.425);
    CHECK(relative_rmse(pred, truth) == doctest::Approx(2.5).epsilon(1e-12));

    // Permutation invariance.
    std::vector<double> a{0.1, 0.5, 0.9}, b{0.2, 0.4, 0.8};
    std::vector<double> ap{0.9, 0.1, 0.5}, bp{0.8, 0.2, 0.4};
    CHECK(relative_rmse(a, b) == doctest::Approx(relative_rmse(ap, bp)).epsilon(1e-12));

    // Two-pass oracle.
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(relative_rmse(a, b) ==
          doctest::Approx(100.0 * std::sqrt(acc / 3.0)).epsilon(1e-12));

    CHECK(relative_rmse(a, a) == 0.0);
    CHECK_THROWS_AS(relative_rmse(a, truth), DimensionError);
    CHECK_THROWS_AS(relative_rmse({}, {}), DimensionError);
}

TEST_CASE("iou worked examples") {
    std::vector<std::uint8_t> a(8, 0), b(8, 0);
    // |A| = 8? no: A has 8 set? Use: A = {0..7} of 12, B = first 4 -> 4/8.
    a.resize(12, 0);
    b.resize(12, 0);
    for (int i = 0; i < 8; ++i) a[i] = 1;
    for (int i = 0; i < 4; ++i) b[i] = 1;
    CHECK(iou(a, b) == doctest::Approx(50.0).epsilon(1e-12));

    std::vector<std::uint8_t> c{1, 1, 0, 0}, d{0, 1, 1, 0};
    CHECK(iou(c, d) == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
    CHECK(iou(c, d) == doctest::Approx(iou(d, c)).epsilon(1e-14));

    const std::vector<std::uint8_t> empty(4, 0);
    CHECK(iou(empty, empty) == 100.0);
    CHECK(iou(c, c) == 100.0);
    CHECK_THROWS_AS(iou(c, std::vector<std::uint8_t>(5, 0)), DimensionError);
}

TEST_CASE("melt threshold sits between solidus and liquidus") {
    const auto ti = MaterialProperties::ti64();
    CHECK(ti.t_melt() == doctest::Approx(1898.0).epsilon(1e-12));
    const auto ss = MaterialProperties::ss316l();
    CHECK(ss.t_melt() == doctest::Approx(1705.5).epsilon(1e-12));

    const std::vector<double> field{293.0, 1897.9, 1898.1, 3000.0};
    const auto mask = melt_mask(field, ti);
    CHECK(mask[0] == 0);
    CHECK(mask[1] == 0);
    CHECK(mask[2] == 1);
    CHECK(mask[3] == 1);

    // In normalized units the Ti-6Al-4V threshold is (1898-293)/(6500-293).
    const double norm_threshold = (ti.t_melt() - 293.0) / (6500.0 - 293.0);
    CHECK(norm_threshold == doctest::Approx(0.25857).epsilon(1e-4));
}

TEST_CASE("aggregation oracles") {
    std::vector<MetricsRecord> recs;
    for (int f = 0; f < 4; ++f) {
        MetricsRecord r;
        r.case_id = "a";
        r.frame_index = static_cast<std::uint32_t>(f);
        r.rmse_pct = 1.0 + f;  // 1, 2, 3, 4
        r.iou_pct = 90.0 - f;
        recs.push_back(r);
    }
    MetricsRecord other;
    other.case_id = "b";
    other.frame_index = 0;
    other.rmse_pct = 10.0;
    other.iou_pct = 50.0;
    recs.push_back(other);

    const auto by_case = aggregate_by_case(recs);
    REQUIRE(by_case.size() == 2);
    CHECK(by_case[0].case_id == "a");
    CHECK(by_case[0].mean_rmse == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(by_case[1].mean_rmse == doctest::Approx(10.0).epsilon(1e-12));

    // Quartiles of [1, 2, 3, 4]: median 2.5, Q1 1.75, Q3 3.25.
    std::vector<MetricsRecord> one_frame;
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        MetricsRecord r;
        r.frame_index = 7;
        r.rmse_pct = v;
        r.iou_pct = v;
        one_frame.push_back(r);
    }
    const auto by_frame = aggregate_by_timestep(one_frame);
    REQUIRE(by_frame.size() == 1);
    CHECK(by_frame[0].median_rmse == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(by_frame[0].rmse_q1 == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(by_frame[0].rmse_q3 == doctest::Approx(3.25).epsilon(1e-12));

    const auto all = aggregate_dataset(one_frame);
    CHECK(all.count == 4);
    CHECK(all.mean_rmse == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(all.stdev_rmse == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
}

TEST_CASE("report round-trips and re-aggregates exactly") {
    std::vector<MetricsRecord> recs;
    for (int i = 0; i < 5; ++i) {
        MetricsRecord r;
        r.case_id = "case_P" + std::to_string(150 + i);
        r.frame_index = static_cast<std::uint32_t>(i);
        r.power_w = 150.0 + i * 0.1;
        r.velocity_mm_s = 800.0 / (i + 1);
        r.time_us = 5.0 * (i + 1);
        r.rmse_pct = 2.81 / (i + 1);
        r.iou_pct = 84.34 + i;
        recs.push_back(r);
    }
    const std::string path = "tmp_report.csv";
    emit_report(recs, path);
    {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "case,frame,P,V,t,rmse_pct,iou_pct");
    }
    const auto back = parse_report(path);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].case_id == recs[i].case_id);
        CHECK(back[i].frame_index == recs[i].frame_index);
        CHECK(back[i].power_w == recs[i].power_w);        // %.17g round-trip
        CHECK(back[i].rmse_pct == recs[i].rmse_pct);
        CHECK(back[i].iou_pct == recs[i].iou_pct);
    }
    const auto a1 = aggregate_dataset(recs);
    const auto a2 = aggregate_dataset(back);
    CHECK(a1.mean_rmse == a2.mean_rmse);
    CHECK(a1.stdev_iou == a2.stdev_iou);

    // Bad header fails loudly.
    {
        std::ofstream bad("tmp_report_bad.csv");
        bad << "case,frame,rmse\n";
    }
    CHECK_THROWS_AS(parse_report("tmp_report_bad.csv"), FormatError);
    fs::remove(path);
    fs::remove("tmp_report_bad.csv");
}

TEST_CASE("slice images") {
    const std::size_t nx = 4, ny = 3, nz = 2;
    std::vector<double> field(nx * ny * nz, 0.0);
    const std::string p0 = "tmp_slice0.pgm";
    emit_slice_image(field, nx, ny, nz, 'z', 0, p0);
    {
        std::ifstream in(p0, std::ios::binary);
        std::string magic, dims, maxval;
        std::getline(in, magic);
        std::getline(in, dims);
        std::getline(in, maxval);
        CHECK(magic == "P5");
        CHECK(dims == "4 3");  // columns x, rows y
        CHECK(maxval == "255");
        std::vector<char> px(nx * ny);
        in.read(px.data(), static_cast<std::streamsize>(px.size()));
        CHECK(in.gcount() == static_cast<std::streamsize>(px.size()));
        for (char c : px) CHECK(c == 0);
    }

    std::fill(field.begin(), field.end(), 1.0);
    field[0] = 2.0;   // clamped to 1
    field[1] = -1.0;  // clamped to 0
    const std::string p1 = "tmp_slice1.pgm";
    emit_slice_image(field, nx, ny, nz, 'z', 0, p1);
    {
        std::ifstream in(p1, std::ios::binary);
        std::string line;
        for (int i = 0; i < 3; ++i) std::getline(in, line);
        std::vector<unsigned char> px(nx * ny);
        in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
        // Pixel (row 0, col 0) is cell (x=0, y=0, z=0) -> clamped 255.
        CHECK(px[0] == 255);
        for (std::size_t i = 1; i < px.size(); ++i) CHECK(px[i] == 255);
    }
    // z=1 plane: cell (0,0,1) carries the -1 -> pixel 0.
    const std::string p2 = "tmp_slice2.pgm";
    emit_slice_image(field, nx, ny, nz, 'z', 1, p2);
    {
        std::ifstream in(p2, std::ios::binary);
        std::string line;
        for (int i = 0; i < 3; ++i) std::getline(in, line);
        std::vector<unsigned char> px(nx * ny);
        in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
        CHECK(px[0] == 0);
        CHECK(px[1] == 255);
    }

    CHECK_THROWS_AS(emit_slice_image(field, nx, ny, nz, 'z', 99, "x.pgm"), ConfigError);
    CHECK_THROWS_AS(emit_slice_image(field, nx, ny, nz, 'q', 0, "x.pgm"), ConfigError);
    CHECK_THROWS_AS(emit_slice_image(field, 5, ny, nz, 'z', 0, "x.pgm"), DimensionError);
    fs::remove(p0);
    fs::remove(p1);
    fs::remove(p2);
}

}  // TEST_SUITE
