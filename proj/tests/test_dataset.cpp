// Normalization, cropping, masking, splitting and the dataset container.

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "meltpool/dataset.hpp"

using namespace meltpool;
namespace fs = std::filesystem;

namespace {

// Tiny raw corpus shared by the container tests.
std::vector<std::string> make_corpus(const std::string& root) {
    SimulationConfig c;
    c.nx = 20;
    c.ny = 12;
    c.nz = 8;
    c.dx = 10e-6;
    c.frame_count = 3;
    c.beam_start_x = 5;
    c.allow_beam_exit = true;
    return generate_cases(c, {150.0, 250.0}, {0.5, 1.0}, root);
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("percentile matches the sorted-order oracle") {
    std::vector<double> v;
    for (int i = 100; i >= 1; --i) v.push_back(i);
    CHECK(percentile_linear(v, 0.0) == 1.0);
    CHECK(percentile_linear(v, 100.0) == 100.0);
    CHECK(percentile_linear(v, 50.0) == doctest::Approx(50.5).epsilon(1e-12));
    CHECK(percentile_linear({1.0, 2.0, 3.0, 4.0}, 25.0) ==
          doctest::Approx(1.75).epsilon(1e-12));
    CHECK(percentile_linear({5.0}, 99.9) == 5.0);
    CHECK_THROWS_AS(percentile_linear({}, 50.0), ConfigError);
}

TEST_CASE("normalization worked examples and clipping") {
    NormalizationSpec n;  // 293 .. 6500
    CHECK(n.normalize(293.0) == 0.0);
    CHECK(n.normalize(6500.0) == 1.0);
    CHECK(n.normalize(0.5 * (293.0 + 6500.0)) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(n.normalize(7000.0) == 1.0);
    CHECK(n.normalize(100.0) == 0.0);
    for (double T : {293.0, 400.0, 1923.0, 6499.0})
        CHECK(n.denormalize(n.normalize(T)) == doctest::Approx(T).epsilon(1e-12));
    NormalizationSpec bad;
    bad.t_max = bad.t_min;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("crop window follows the beam and clamps at the walls") {
    const std::size_t nx = 16, ny = 10, nz = 6;
    std::vector<float> frame(nx * ny * nz);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<float>(i);
    const CropSpec crop{8, 4, 4};

    auto r = crop_roi(frame, nx, ny, nz, crop, 8.0, 5.0);
    CHECK(r.offset[0] == 4);
    CHECK(r.offset[1] == 3);
    CHECK(r.offset[2] == 0);
    // Values are the original cells at the shifted coordinates.
    for (std::size_t x = 0; x < crop.lx; ++x)
        for (std::size_t y = 0; y < crop.ly; ++y)
            for (std::size_t z = 0; z < crop.lz; ++z) {
                const float expect = frame[((x + 4) * ny + (y + 3)) * nz + z];
                CHECK(r.field[(x * crop.ly + y) * crop.lz + z] == expect);
            }

    // Beam near the -x wall: origin clamps to 0.
    CHECK(crop_roi(frame, nx, ny, nz, crop, 1.0, 5.0).offset[0] == 0);
    // Beam near the +x wall: origin clamps to nx - lx.
    CHECK(crop_roi(frame, nx, ny, nz, crop, 15.5, 5.0).offset[0] == nx - crop.lx);
    CHECK_THROWS_AS(crop_roi(frame, nx, ny, nz, CropSpec{32, 4, 4}, 8.0, 5.0), ConfigError);
}

TEST_CASE("mask target flags exactly-ambient cells") {
    const std::vector<float> raw{293.0f, 293.0000001f, 500.0f, 293.0f};
    const auto mask = build_mask_target(raw, 293.0f);
    CHECK(mask[0] == 1);
    // 293.0000001 is not representable apart from 293 in float32.
    CHECK(mask[1] == 1);
    CHECK(mask[2] == 0);
    CHECK(mask[3] == 1);
    const auto m2 = build_mask_target({293.001f, 294.0f}, 293.0f);
    CHECK(m2[0] == 0);
    CHECK(m2[1] == 0);
}

TEST_CASE("case split is sized, deterministic and a partition") {
    DatasetManifest m;
    for (int i = 0; i < 46; ++i) m.cases.push_back({"case" + std::to_string(i)});
    split_train_val(m, 0.85, 7);
    std::size_t train = 0;
    for (const auto& c : m.cases) train += c.split == Split::Train;
    CHECK(train == 39);  // llround(0.85 * 46)
    CHECK(m.cases.size() - train == 7);

    DatasetManifest m2 = m;
    split_train_val(m2, 0.85, 7);
    for (std::size_t i = 0; i < m.cases.size(); ++i)
        CHECK(m.cases[i].split == m2.cases[i].split);

    // Extreme fractions still leave both sides non-empty.
    split_train_val(m, 0.999, 3);
    train = 0;
    for (const auto& c : m.cases) train += c.split == Split::Train;
    CHECK(train == 45);
    CHECK_THROWS_AS(split_train_val(m, 1.5, 0), ConfigError);
}

TEST_CASE("built dataset and its container round-trip bitwise") {
    const std::string root = "tmp_ds_corpus";
    const auto dirs = make_corpus(root);
    REQUIRE(dirs.size() == 4);

    const CropSpec crop{8, 4, 4};
    NormalizationSpec norm;
    Dataset ds = build_dataset(dirs, crop, norm, 0.75, 11);
    CHECK(ds.records.size() == 4 * 3);
    CHECK(ds.manifest.cases.size() == 4);
    CHECK(ds.manifest.power_range.lo == 150.0);
    CHECK(ds.manifest.power_range.hi == 250.0);
    CHECK(ds.manifest.time_range.hi == doctest::Approx(15.0).epsilon(1e-9));
    for (const auto& r : ds.records) {
        CHECK(r.field.size() == r.voxels());
        CHECK(r.mask.size() == r.voxels());
        for (std::size_t i = 0; i < r.voxels(); ++i) {
            CHECK(r.field[i] >= 0.0f);
            CHECK(r.field[i] <= 1.0f);
            // Mask semantics against the normalized field: ambient cells map
            // to exactly 0.
            if (r.mask[i]) CHECK(r.field[i] == 0.0f);
        }
    }

    const std::string ddir = "tmp_ds_out";
    write_dataset(ds, ddir);
    const Dataset back = read_dataset(ddir);
    REQUIRE(back.records.size() == ds.records.size());
    CHECK(back.manifest.material == ds.manifest.material);
    CHECK(back.manifest.grid.nx == ds.manifest.grid.nx);
    CHECK(back.manifest.grid.dx == ds.manifest.grid.dx);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& a = ds.records[i];
        const auto& b = back.records[i];
        CHECK(a.case_id == b.case_id);
        CHECK(a.frame_index == b.frame_index);
        CHECK(a.split == b.split);
        CHECK(a.point.power_w == b.point.power_w);
        CHECK(a.point.time_us == b.point.time_us);
        CHECK(a.field == b.field);  // bitwise
        CHECK(a.mask == b.mask);
        CHECK(a.offset[0] == b.offset[0]);
    }

    // Writing the re-read dataset reproduces the samples file byte for byte.
    const std::string ddir2 = "tmp_ds_out2";
    write_dataset(back, ddir2);
    std::ifstream f1(ddir + "/samples.bin", std::ios::binary);
    std::ifstream f2(ddir2 + "/samples.bin", std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);

    // A corrupted payload byte fails the checksum on read.
    {
        std::fstream f(ddir + "/samples.bin",
                       std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(100);
        char b;
        f.get(b);
        f.seekp(100);
        f.put(static_cast<char>(b ^ 0x55));
    }
    CHECK_THROWS_AS(read_dataset(ddir), FormatError);

    fs::remove_all(root);
    fs::remove_all(ddir);
    fs::remove_all(ddir2);
}

TEST_CASE("process-point scaling uses the manifest ranges") {
    DatasetManifest m;
    m.power_range = {100.0, 300.0};
    m.velocity_range = {400.0, 1200.0};
    m.time_range = {5.0, 500.0};
    double out[3];
    scale_process_point(m, {200.0, 400.0, 500.0}, out);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 1.0);
    // Degenerate range maps to 0 instead of dividing by zero.
    m.power_range = {200.0, 200.0};
    scale_process_point(m, {200.0, 800.0, 250.0}, out);
    CHECK(out[0] == 0.0);
}

TEST_CASE("clip threshold needs melted material") {
    SimulationConfig c;
    c.nx = 8;
    c.ny = 6;
    c.nz = 4;
    c.frame_count = 1;
    c.power = 0.0;
    c.beam_start_x = 2;
    c.allow_beam_exit = true;
    const auto cold = run_case(c, MaterialProperties::ti64());
    CHECK_THROWS_AS(compute_clip_threshold({cold}, 1898.0), ConfigError);
}

}  // TEST_SUITE
