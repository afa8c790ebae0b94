#include "meltpool/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "meltpool/blob_io.hpp"
#include "meltpool/rng.hpp"

namespace meltpool {

namespace fs = std::filesystem;
using nlohmann::json;

static constexpr const char kSampleMagic[8] = {'M', 'P', 'S', 'A', 'M', 'P', 'L', '1'};

std::vector<const SampleRecord*> Dataset::split_records(Split s) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(&r);
    return out;
}

double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw ConfigError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double compute_clip_threshold(const std::vector<CaseResult>& cases, double t_melt,
                              double percentile) {
    std::vector<double> pool;
    for (const auto& cr : cases)
        for (const auto& f : cr.frames)
            for (float v : f.temperature)
                if (v > t_melt) pool.push_back(v);
    if (pool.empty())
        throw ConfigError(
            "compute_clip_threshold: no temperatures above the melting point in the corpus; "
            "use the default T_max = 6500 K");
    return percentile_linear(std::move(pool), percentile);
}

CropResult crop_roi(const std::vector<float>& frame, std::size_t nx, std::size_t ny,
                    std::size_t nz, const CropSpec& crop, double beam_x_cells,
                    double beam_y_cells) {
    if (crop.lx > nx || crop.ly > ny || crop.lz > nz)
        throw ConfigError("crop_roi: window " + std::to_string(crop.lx) + "x" +
                          std::to_string(crop.ly) + "x" + std::to_string(crop.lz) +
                          " exceeds domain " + std::to_string(nx) + "x" + std::to_string(ny) +
                          "x" + std::to_string(nz));
    auto clamp_origin = [](double center, std::size_t window, std::size_t extent) {
        double o = center - static_cast<double>(window) / 2.0;
        if (o < 0.0) o = 0.0;
        const double o_max = static_cast<double>(extent - window);
        if (o > o_max) o = o_max;
        return static_cast<std::uint32_t>(std::llround(o));
    };
    CropResult r;
    r.offset[0] = clamp_origin(beam_x_cells, crop.lx, nx);
    r.offset[1] = clamp_origin(beam_y_cells, crop.ly, ny);
    r.offset[2] = 0;  // top-aligned
    r.field.resize(crop.lx * crop.ly * crop.lz);
    for (std::size_t x = 0; x < crop.lx; ++x)
        for (std::size_t y = 0; y < crop.ly; ++y) {
            const float* src =
                frame.data() +
                ((static_cast<std::size_t>(r.offset[0]) + x) * ny + r.offset[1] + y) * nz +
                r.offset[2];
            std::memcpy(r.field.data() + (x * crop.ly + y) * crop.lz, src,
                        crop.lz * sizeof(float));
        }
    return r;
}

std::vector<std::uint8_t> build_mask_target(const std::vector<float>& raw_frame,
                                            float t_ambient) {
    std::vector<std::uint8_t> mask(raw_frame.size());
    for (std::size_t i = 0; i < raw_frame.size(); ++i)
        mask[i] = raw_frame[i] == t_ambient ? 1 : 0;
    return mask;
}

void split_train_val(DatasetManifest& manifest, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("split_train_val: fraction must be in (0, 1)");
    if (manifest.cases.size() < 2)
        throw ConfigError("split_train_val: need at least 2 cases");
    std::vector<std::size_t> order(manifest.cases.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    auto n_train = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(order.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i)
        manifest.cases[order[i]].split = i < n_train ? Split::Train : Split::Val;
}

Dataset build_dataset(const std::vector<std::string>& case_dirs, const CropSpec& crop,
                      const NormalizationSpec& norm, double split_fraction,
                      std::uint64_t seed) {
    norm.validate();
    Dataset ds;
    ds.manifest.norm = norm;
    ds.manifest.crop = crop;
    ds.manifest.seed = seed;

    std::vector<CaseResult> cases;
    cases.reserve(case_dirs.size());
    for (const auto& dir : case_dirs) cases.push_back(read_case_dir(dir));

    for (const auto& cr : cases) {
        CaseSummary s;
        s.id = fs::path(case_dirs[&cr - cases.data()]).filename().string();
        s.power_w = cr.config.power;
        s.velocity_mm_s = cr.config.velocity * 1e3;
        ds.manifest.cases.push_back(std::move(s));
    }
    ds.manifest.material = cases.front().material.name;
    ds.manifest.generator_version = "meltpool-fd-1";
    ds.manifest.t_ambient = cases.front().config.t_ambient;
    ds.manifest.grid = {cases.front().config.nx, cases.front().config.ny,
                        cases.front().config.nz, cases.front().config.dx,
                        cases.front().config.beam_start_x};
    split_train_val(ds.manifest, split_fraction, seed);

    auto& pr = ds.manifest.power_range;
    auto& vr = ds.manifest.velocity_range;
    auto& tr = ds.manifest.time_range;
    pr = vr = tr = RangePair{1e300, -1e300};
    for (const auto& cr : cases) {
        pr.lo = std::min(pr.lo, cr.config.power);
        pr.hi = std::max(pr.hi, cr.config.power);
        vr.lo = std::min(vr.lo, cr.config.velocity * 1e3);
        vr.hi = std::max(vr.hi, cr.config.velocity * 1e3);
        tr.lo = std::min(tr.lo, cr.config.frame_interval * 1e6);
        tr.hi = std::max(tr.hi, cr.config.frame_interval * 1e6 *
                                    static_cast<double>(cr.config.frame_count));
    }

    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const auto& cr = cases[ci];
        const auto& cfg = cr.config;
        const auto t_amb = static_cast<float>(cfg.t_ambient);
        for (std::size_t k = 0; k < cr.frames.size(); ++k) {
            const double t = cfg.frame_interval * static_cast<double>(k + 1);
            const double bx = cfg.beam_x(t) / cfg.dx;
            const double by = cfg.beam_y() / cfg.dx;
            auto cropped =
                crop_roi(cr.frames[k].temperature, cfg.nx, cfg.ny, cfg.nz, crop, bx, by);
            SampleRecord rec;
            rec.point = {cfg.power, cfg.velocity * 1e3, t * 1e6};
            rec.case_id = ds.manifest.cases[ci].id;
            rec.frame_index = static_cast<std::uint32_t>(k);
            rec.split = ds.manifest.cases[ci].split;
            rec.offset[0] = cropped.offset[0];
            rec.offset[1] = cropped.offset[1];
            rec.offset[2] = cropped.offset[2];
            rec.dims[0] = static_cast<std::uint32_t>(crop.lx);
            rec.dims[1] = static_cast<std::uint32_t>(crop.ly);
            rec.dims[2] = static_cast<std::uint32_t>(crop.lz);
            rec.mask = build_mask_target(cropped.field, t_amb);
            rec.field.resize(cropped.field.size());
            for (std::size_t i = 0; i < cropped.field.size(); ++i)
                rec.field[i] = static_cast<float>(norm.normalize(cropped.field[i]));
            ds.records.push_back(std::move(rec));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Container IO

static json manifest_to_json(const DatasetManifest& m) {
    json j;
    j["cases"] = json::array();
    for (const auto& c : m.cases)
        j["cases"].push_back({{"id", c.id},
                              {"power_w", c.power_w},
                              {"velocity_mm_s", c.velocity_mm_s},
                              {"split", c.split == Split::Train ? "train" : "val"}});
    j["normalization"] = {{"t_min", m.norm.t_min},
                          {"t_max", m.norm.t_max},
                          {"clip_percentile", m.norm.clip_percentile}};
    j["crop"] = {m.crop.lx, m.crop.ly, m.crop.lz};
    j["grid"] = {{"dims", {m.grid.nx, m.grid.ny, m.grid.nz}},
                 {"dx", m.grid.dx},
                 {"beam_start_x", m.grid.beam_start_x}};
    j["material"] = m.material;
    j["generator_version"] = m.generator_version;
    j["seed"] = m.seed;
    j["t_ambient"] = m.t_ambient;
    j["power_range"] = {m.power_range.lo, m.power_range.hi};
    j["velocity_range"] = {m.velocity_range.lo, m.velocity_range.hi};
    j["time_range"] = {m.time_range.lo, m.time_range.hi};
    return j;
}

static DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    for (const auto& c : j.at("cases")) {
        CaseSummary s;
        s.id = c.at("id");
        s.power_w = c.at("power_w");
        s.velocity_mm_s = c.at("velocity_mm_s");
        s.split = c.at("split") == "train" ? Split::Train : Split::Val;
        m.cases.push_back(std::move(s));
    }
    m.norm.t_min = j.at("normalization").at("t_min");
    m.norm.t_max = j.at("normalization").at("t_max");
    m.norm.clip_percentile = j.at("normalization").at("clip_percentile");
    m.crop.lx = j.at("crop")[0];
    m.crop.ly = j.at("crop")[1];
    m.crop.lz = j.at("crop")[2];
    if (j.contains("grid")) {
        m.grid.nx = j["grid"].at("dims")[0];
        m.grid.ny = j["grid"].at("dims")[1];
        m.grid.nz = j["grid"].at("dims")[2];
        m.grid.dx = j["grid"].at("dx");
        m.grid.beam_start_x = j["grid"].at("beam_start_x");
    }
    m.material = j.at("material");
    m.generator_version = j.at("generator_version");
    m.seed = j.at("seed");
    m.t_ambient = j.at("t_ambient");
    m.power_range = {j.at("power_range")[0], j.at("power_range")[1]};
    m.velocity_range = {j.at("velocity_range")[0], j.at("velocity_range")[1]};
    m.time_range = {j.at("time_range")[0], j.at("time_range")[1]};
    return m;
}

namespace {
template <typename T>
void put(std::vector<char>& buf, const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<char>& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size()) throw FormatError("samples.bin: truncated record");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}
}  // namespace

void write_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir + "/manifest.json");
        if (!out) throw IoError("cannot write " + dir + "/manifest.json");
        out << manifest_to_json(ds.manifest).dump(2) << "\n";
    }
    std::vector<char> buf;
    put<std::uint64_t>(buf, ds.records.size());
    for (const auto& r : ds.records) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(r.case_id.size()));
        buf.insert(buf.end(), r.case_id.begin(), r.case_id.end());
        put<std::uint32_t>(buf, r.frame_index);
        put<double>(buf, r.point.power_w);
        put<double>(buf, r.point.velocity_mm_s);
        put<double>(buf, r.point.time_us);
        put<std::uint8_t>(buf, static_cast<std::uint8_t>(r.split));
        for (int a = 0; a < 3; ++a) put<std::uint32_t>(buf, r.offset[a]);
        for (int a = 0; a < 3; ++a) put<std::uint32_t>(buf, r.dims[a]);
        const auto n = r.voxels();
        if (r.field.size() != n || r.mask.size() != n)
            throw ConfigError("write_dataset: record field/mask size mismatch");
        const auto* fp = reinterpret_cast<const char*>(r.field.data());
        buf.insert(buf.end(), fp, fp + n * sizeof(float));
        buf.insert(buf.end(), r.mask.begin(), r.mask.end());
    }
    write_blob(dir + "/samples.bin", kSampleMagic, buf.data(), buf.size());
}

Dataset read_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("cannot open " + dir + "/manifest.json");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(dir + "/manifest.json parse error: " + std::string(e.what()));
    }
    Dataset ds;
    ds.manifest = manifest_from_json(j);

    const auto buf = read_blob(dir + "/samples.bin", kSampleMagic);
    std::size_t off = 0;
    const auto count = take<std::uint64_t>(buf, off);
    ds.records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        SampleRecord r;
        const auto id_len = take<std::uint32_t>(buf, off);
        if (off + id_len > buf.size()) throw FormatError("samples.bin: truncated case id");
        r.case_id.assign(buf.data() + off, id_len);
        off += id_len;
        r.frame_index = take<std::uint32_t>(buf, off);
        r.point.power_w = take<double>(buf, off);
        r.point.velocity_mm_s = take<double>(buf, off);
        r.point.time_us = take<double>(buf, off);
        r.split = static_cast<Split>(take<std::uint8_t>(buf, off));
        for (int a = 0; a < 3; ++a) r.offset[a] = take<std::uint32_t>(buf, off);
        for (int a = 0; a < 3; ++a) r.dims[a] = take<std::uint32_t>(buf, off);
        const auto n = r.voxels();
        if (off + n * (sizeof(float) + 1) > buf.size())
            throw FormatError("samples.bin: truncated field/mask payload");
        r.field.resize(n);
        std::memcpy(r.field.data(), buf.data() + off, n * sizeof(float));
        off += n * sizeof(float);
        r.mask.assign(buf.data() + off, buf.data() + off + n);
        off += n;
        ds.records.push_back(std::move(r));
    }
    if (off != buf.size()) throw FormatError("samples.bin: trailing bytes after records");
    return ds;
}

void scale_process_point(const DatasetManifest& m, const ProcessPoint& p, double out[3]) {
    out[0] = m.power_range.scale01(p.power_w);
    out[1] = m.velocity_range.scale01(p.velocity_mm_s);
    out[2] = m.time_range.scale01(p.time_us);
}

}  // namespace meltpool
