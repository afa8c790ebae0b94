#include "meltpool/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "meltpool/blob_io.hpp"

namespace meltpool {

namespace fs = std::filesystem;
using nlohmann::json;

static constexpr const char kFrameMagic[8] = {'M', 'P', 'F', 'R', 'A', 'M', 'E', '1'};
static constexpr const char kVoidMagic[8] = {'M', 'P', 'V', 'O', 'I', 'D', '0', '1'};
static constexpr const char* kSolverVersion = "meltpool-fd-1";

void SimulationConfig::validate() const {
    if (!(dx > 0.0)) throw ConfigError("SimulationConfig: dx must be positive");
    if (frame_count < 1) throw ConfigError("SimulationConfig: frame_count must be >= 1");
    if (!(beam_radius > 0.0)) throw ConfigError("SimulationConfig: beam_radius must be positive");
    if (nx < 3 || ny < 1 || nz < 1) throw ConfigError("SimulationConfig: grid too small");
    if (!allow_beam_exit && power > 0.0) {
        const double t_end = frame_interval * static_cast<double>(frame_count);
        if (beam_x(t_end) > static_cast<double>(nx) * dx)
            throw ConfigError("SimulationConfig: beam exits the +x face at t=" +
                              std::to_string(t_end) +
                              " s; shorten the case or set allow_beam_exit");
    }
}

double stable_timestep(const SimulationConfig& config, const MaterialProperties& mat) {
    double alpha_max = 0.0;
    // alpha(T) is a ratio of linear interpolants; sample densely over the
    // operating range, which includes both clamp plateaus.
    const double t_hi = std::max(mat.t_vaporization, 1923.0);
    for (int i = 0; i <= 256; ++i) {
        const double T = 298.0 + (t_hi - 298.0) * i / 256.0;
        alpha_max = std::max(alpha_max, thermal_diffusivity(mat, T));
    }
    return config.stability_safety * config.dx * config.dx / (6.0 * alpha_max);
}

HeatSolver::HeatSolver(const SimulationConfig& config, const MaterialProperties& mat)
    : config_(config),
      mat_(mat),
      curve_(mat, config.constant_properties, config.t_ambient),
      absorptivity_(config.power > 0.0
                        ? absorptivity(mat, config.power, config.velocity, config.beam_radius,
                                       thermal_diffusivity(mat, mat.t_melt()),
                                       config.absorptivity_model)
                        : 0.0) {
    config_.validate();
    mat_.validate();
    const std::size_t n = config_.nx * config_.ny * config_.nz;
    state_.temperature.assign(n, config_.t_ambient);
    state_.enthalpy.assign(n, 0.0);
    state_.voids.assign(n, 0);
    flux_accum_.assign(n, 0.0);
}

void HeatSolver::deposit_source(double dt) {
    if (config_.power <= 0.0) return;
    const double r0 = config_.beam_radius;
    const double cutoff = config_.source_cutoff_radii * r0;
    const double bx = config_.beam_x(state_.elapsed);
    const double by = config_.beam_y();
    const double dx = config_.dx;
    const auto x_lo = static_cast<std::size_t>(std::max(0.0, std::floor((bx - cutoff) / dx)));
    const auto x_hi = std::min(config_.nx, static_cast<std::size_t>(
                                               std::max(0.0, std::ceil((bx + cutoff) / dx))));
    const auto y_lo = static_cast<std::size_t>(std::max(0.0, std::floor((by - cutoff) / dx)));
    const auto y_hi = std::min(config_.ny, static_cast<std::size_t>(
                                               std::max(0.0, std::ceil((by + cutoff) / dx))));
    for (std::size_t x = x_lo; x < x_hi; ++x) {
        const double cx = (static_cast<double>(x) + 0.5) * dx - bx;
        for (std::size_t y = y_lo; y < y_hi; ++y) {
            const double cy = (static_cast<double>(y) + 0.5) * dx - by;
            const double r = std::sqrt(cx * cx + cy * cy);
            if (r > cutoff) continue;
            const double q = absorptivity_ *
                             gaussian_flux(config_.power, r0, r, config_.renormalize_flux);
            // Deposit into the topmost non-void cell of this column.
            std::size_t z = 0;
            while (z < config_.nz && state_.voids[idx(x, y, z)]) ++z;
            if (z == config_.nz) continue;  // column fully carved
            flux_accum_[idx(x, y, z)] += q * dt / dx;  // W/m^2 -> J/m^3
            state_.absorbed_energy += q * dx * dx * dt;
        }
    }
}

void HeatSolver::step(double dt) {
    const std::size_t nx = config_.nx, ny = config_.ny, nz = config_.nz;
    const double coef = dt / (config_.dx * config_.dx);
    std::fill(flux_accum_.begin(), flux_accum_.end(), 0.0);

    const auto& T = state_.temperature;
    const auto& vd = state_.voids;
    auto& du = flux_accum_;

    // Interior faces only: zero-flux at every domain boundary and at void
    // faces. Each face is visited once, so opposite contributions cancel
    // exactly and total enthalpy telescopes.
    for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t y = 0; y < ny; ++y) {
            const std::size_t base = (x * ny + y) * nz;
            for (std::size_t z = 0; z < nz; ++z) {
                const std::size_t i = base + z;
                if (vd[i]) continue;
                const double Ti = T[i];
                const double ki = interpolate_property(mat_, config_.constant_properties
                                                                 ? 298.0
                                                                 : Ti).k;
                if (x + 1 < nx) {
                    const std::size_t j = i + ny * nz;
                    if (!vd[j]) {
                        const double kj = interpolate_property(
                                              mat_, config_.constant_properties ? 298.0 : T[j])
                                              .k;
                        const double f = 0.5 * (ki + kj) * (T[j] - Ti) * coef;
                        du[i] += f;
                        du[j] -= f;
                    }
                }
                if (y + 1 < ny) {
                    const std::size_t j = i + nz;
                    if (!vd[j]) {
                        const double kj = interpolate_property(
                                              mat_, config_.constant_properties ? 298.0 : T[j])
                                              .k;
                        const double f = 0.5 * (ki + kj) * (T[j] - Ti) * coef;
                        du[i] += f;
                        du[j] -= f;
                    }
                }
                if (z + 1 < nz) {
                    const std::size_t j = i + 1;
                    if (!vd[j]) {
                        const double kj = interpolate_property(
                                              mat_, config_.constant_properties ? 298.0 : T[j])
                                              .k;
                        const double f = 0.5 * (ki + kj) * (T[j] - Ti) * coef;
                        du[i] += f;
                        du[j] -= f;
                    }
                }
            }
        }
    }

    deposit_source(dt);

    auto& u = state_.enthalpy;
    auto& Tm = state_.temperature;
    const std::size_t n = u.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (du[i] == 0.0) continue;  // untouched cells keep exact values
        u[i] += du[i];
        // Newton from the previous temperature; fall back to the safeguarded
        // solve if it wanders.
        double t = Tm[i];
        bool ok = false;
        for (int it = 0; it < 25; ++it) {
            const double f = curve_.enthalpy(t) - u[i];
            const double step_t = f / curve_.rho_cp_eff(t);
            t -= step_t;
            if (std::abs(step_t) < 1e-12 * std::max(1.0, std::abs(t))) {
                ok = std::isfinite(t);
                break;
            }
        }
        Tm[i] = ok ? t : curve_.temperature(u[i]);
    }
    state_.elapsed += dt;
}

void HeatSolver::carve_keyhole() {
    if (!config_.carve) return;
    const std::size_t n = state_.temperature.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (state_.voids[i]) continue;
        if (state_.temperature[i] > mat_.t_vaporization) {
            state_.voids[i] = 1;
            state_.temperature[i] = config_.t_ambient;
            state_.enthalpy[i] = 0.0;
        }
    }
}

void HeatSolver::check_stability(std::size_t frame) const {
    for (double t : state_.temperature) {
        if (!std::isfinite(t) || std::abs(t) > 10.0 * mat_.t_vaporization)
            throw NumericError("solver instability at frame " + std::to_string(frame) +
                               " (material " + mat_.name + ", P=" +
                               std::to_string(config_.power) + " W, V=" +
                               std::to_string(config_.velocity) + " m/s): T=" +
                               std::to_string(t));
    }
}

double HeatSolver::total_enthalpy() const {
    const double cell_vol = config_.dx * config_.dx * config_.dx;
    double acc = 0.0;
    for (double u : state_.enthalpy) acc += u;
    return acc * cell_vol;
}

ThermalFrame HeatSolver::snapshot() const {
    ThermalFrame f;
    f.temperature.assign(state_.temperature.begin(), state_.temperature.end());
    f.voids = state_.voids;
    return f;
}

CaseResult run_case(const SimulationConfig& config, const MaterialProperties& mat) {
    HeatSolver solver(config, mat);
    const double dt_stable = stable_timestep(config, mat);
    const auto nsub =
        static_cast<std::size_t>(std::ceil(config.frame_interval / dt_stable));
    const double dt = config.frame_interval / static_cast<double>(nsub);

    CaseResult result;
    result.config = config;
    result.material = mat;
    result.absorptivity = solver.case_absorptivity();
    result.substeps_per_frame = nsub;
    result.frames.reserve(config.frame_count);
    for (std::size_t frame = 0; frame < config.frame_count; ++frame) {
        for (std::size_t s = 0; s < nsub; ++s) solver.step(dt);
        solver.check_stability(frame);
        solver.carve_keyhole();
        result.frames.push_back(solver.snapshot());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Raw case container

void write_case_dir(const CaseResult& result, const std::string& dir) {
    fs::create_directories(dir);
    const auto& c = result.config;
    json meta;
    meta["solver_version"] = kSolverVersion;
    meta["grid"] = {c.nx, c.ny, c.nz};
    meta["dx"] = c.dx;
    meta["beam_radius"] = c.beam_radius;
    meta["power"] = c.power;
    meta["velocity"] = c.velocity;
    meta["frame_interval"] = c.frame_interval;
    meta["frame_count"] = c.frame_count;
    meta["t_ambient"] = c.t_ambient;
    meta["beam_start_x"] = c.beam_start_x;
    meta["source_cutoff_radii"] = c.source_cutoff_radii;
    meta["material"] = result.material.name;
    meta["t_vaporization"] = result.material.t_vaporization;
    meta["absorptivity"] = result.absorptivity;
    meta["absorptivity_model"] =
        c.absorptivity_model == AbsorptivityModel::Verbatim ? "verbatim"
        : c.absorptivity_model == AbsorptivityModel::Fixed  ? "fixed"
                                                            : "normalized_enthalpy";
    meta["renormalize_flux"] = c.renormalize_flux;
    meta["constant_properties"] = c.constant_properties;
    meta["substeps_per_frame"] = result.substeps_per_frame;
    {
        std::ofstream out(dir + "/meta.json");
        if (!out) throw IoError("cannot write " + dir + "/meta.json");
        out << meta.dump(2) << "\n";
    }
    const std::size_t cells = c.nx * c.ny * c.nz;
    std::vector<float> frames;
    std::vector<std::uint8_t> voids;
    frames.reserve(result.frames.size() * cells);
    voids.reserve(result.frames.size() * cells);
    for (const auto& f : result.frames) {
        frames.insert(frames.end(), f.temperature.begin(), f.temperature.end());
        voids.insert(voids.end(), f.voids.begin(), f.voids.end());
    }
    write_blob_vec(dir + "/frames.bin", kFrameMagic, frames);
    write_blob_vec(dir + "/voids.bin", kVoidMagic, voids);
}

CaseResult read_case_dir(const std::string& dir) {
    std::ifstream in(dir + "/meta.json");
    if (!in) throw IoError("cannot open " + dir + "/meta.json");
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw FormatError(dir + "/meta.json parse error: " + std::string(e.what()));
    }
    CaseResult r;
    auto& c = r.config;
    c.nx = meta.at("grid")[0];
    c.ny = meta.at("grid")[1];
    c.nz = meta.at("grid")[2];
    c.dx = meta.at("dx");
    c.beam_radius = meta.at("beam_radius");
    c.power = meta.at("power");
    c.velocity = meta.at("velocity");
    c.frame_interval = meta.at("frame_interval");
    c.frame_count = meta.at("frame_count");
    c.t_ambient = meta.at("t_ambient");
    c.beam_start_x = meta.at("beam_start_x");
    c.source_cutoff_radii = meta.value("source_cutoff_radii", 4.0);
    c.material = meta.at("material");
    c.renormalize_flux = meta.value("renormalize_flux", false);
    c.constant_properties = meta.value("constant_properties", false);
    const std::string am = meta.value("absorptivity_model", "normalized_enthalpy");
    c.absorptivity_model = am == "verbatim" ? AbsorptivityModel::Verbatim
                           : am == "fixed"  ? AbsorptivityModel::Fixed
                                            : AbsorptivityModel::NormalizedEnthalpy;
    r.material = MaterialProperties::by_name(c.material);
    r.absorptivity = meta.value("absorptivity", 0.0);
    r.substeps_per_frame = meta.value("substeps_per_frame", 0);

    const std::size_t cells = c.nx * c.ny * c.nz;
    auto frames = read_blob_vec<float>(dir + "/frames.bin", kFrameMagic);
    auto voids = read_blob_vec<std::uint8_t>(dir + "/voids.bin", kVoidMagic);
    if (frames.size() != cells * c.frame_count || voids.size() != cells * c.frame_count)
        throw FormatError(dir + ": frame blob size does not match meta grid/frame_count");
    r.frames.resize(c.frame_count);
    for (std::size_t k = 0; k < c.frame_count; ++k) {
        r.frames[k].temperature.assign(frames.begin() + k * cells,
                                       frames.begin() + (k + 1) * cells);
        r.frames[k].voids.assign(voids.begin() + k * cells, voids.begin() + (k + 1) * cells);
    }
    return r;
}

std::vector<std::string> generate_cases(const SimulationConfig& base,
                                        const std::vector<double>& powers,
                                        const std::vector<double>& velocities,
                                        const std::string& out_dir, unsigned workers) {
    struct Job {
        SimulationConfig config;
        std::string dir;
    };
    std::vector<Job> jobs;
    for (double p : powers) {
        for (double v : velocities) {
            Job j;
            j.config = base;
            j.config.power = p;
            j.config.velocity = v;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "case_P%g_V%g", p, v * 1e3);  // V in mm/s
            j.dir = out_dir + "/" + buf;
            jobs.push_back(std::move(j));
        }
    }
    fs::create_directories(out_dir);
    const MaterialProperties mat = MaterialProperties::by_name(base.material);
    if (workers < 1) workers = 1;
    std::vector<std::string> dirs(jobs.size());
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                auto result = run_case(jobs[i].config, mat);
                write_case_dir(result, jobs[i].dir);
                dirs[i] = jobs[i].dir;
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < std::min<std::size_t>(workers, jobs.size()); ++w)
            pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return dirs;
}

}  // namespace meltpool
