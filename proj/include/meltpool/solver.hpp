#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meltpool/material.hpp"

namespace meltpool {

// One simulated case: explicit conduction on a regular grid with a moving
// Gaussian surface source and vaporization carving. z = 0 is the top surface;
// cell (x, y, z) lives at index (x*ny + y)*nz + z.
struct SimulationConfig {
    std::size_t nx = 128, ny = 64, nz = 32;
    double dx = 10e-6;              // cell size, m
    double beam_radius = 50e-6;     // r0, m
    double power = 200.0;           // W
    double velocity = 0.8;          // m/s
    double frame_interval = 5e-6;   // s
    std::size_t frame_count = 100;
    double t_ambient = 293.0;       // K
    double beam_start_x = 20;       // cells
    double source_cutoff_radii = 4.0;  // truncate flux beyond cutoff * r0
    std::string material = "ti64";
    AbsorptivityModel absorptivity_model = AbsorptivityModel::NormalizedEnthalpy;
    bool renormalize_flux = false;  // integrate source to P instead of P/2
    bool constant_properties = false;
    bool carve = true;
    double stability_safety = 0.9;
    bool allow_beam_exit = false;

    double beam_x(double t) const { return beam_start_x * dx + velocity * t; }
    double beam_y() const { return 0.5 * static_cast<double>(ny) * dx; }
    void validate() const;
};

struct SimulationState {
    std::vector<double> temperature;  // K
    std::vector<double> enthalpy;     // J/m^3, 0 at ambient
    std::vector<std::uint8_t> voids;  // 1 = carved
    double elapsed = 0.0;             // s
    double absorbed_energy = 0.0;     // J deposited so far
};

struct ThermalFrame {
    std::vector<float> temperature;   // 32-bit snapshot, x-major, z fastest
    std::vector<std::uint8_t> voids;
};

struct CaseResult {
    SimulationConfig config;
    MaterialProperties material;
    double absorptivity = 0.0;
    std::size_t substeps_per_frame = 0;
    std::vector<ThermalFrame> frames;
};

// Largest stable explicit substep: safety * dx^2 / (6 * alpha_max), alpha_max
// the maximum thermal diffusivity over [298 K, T_vap].
double stable_timestep(const SimulationConfig& config, const MaterialProperties& mat);

class HeatSolver {
public:
    HeatSolver(const SimulationConfig& config, const MaterialProperties& mat);

    // One explicit substep: conduction fluxes on the enthalpy field plus the
    // surface source at the instantaneous beam position.
    void step(double dt);

    // Frame-boundary carving: cells above T_vap become permanent voids held at
    // exactly T_ambient.
    void carve_keyhole();

    const SimulationState& state() const { return state_; }
    SimulationState& state() { return state_; }
    const SimulationConfig& config() const { return config_; }
    double case_absorptivity() const { return absorptivity_; }
    const EnthalpyCurve& curve() const { return curve_; }

    double total_enthalpy() const;
    ThermalFrame snapshot() const;

private:
    SimulationConfig config_;
    MaterialProperties mat_;
    EnthalpyCurve curve_;
    double absorptivity_;
    SimulationState state_;
    std::vector<double> flux_accum_;  // per-substep enthalpy increments

    std::size_t idx(std::size_t x, std::size_t y, std::size_t z) const {
        return (x * config_.ny + y) * config_.nz + z;
    }
    void deposit_source(double dt);
    void check_stability(std::size_t frame) const;
    friend CaseResult run_case(const SimulationConfig&, const MaterialProperties&);
};

// Runs the full case: frame k records the state at t = (k+1) * frame_interval,
// with carving applied at each frame boundary. Deterministic.
CaseResult run_case(const SimulationConfig& config, const MaterialProperties& mat);

// Raw case container: <dir>/meta.json + frames.bin + voids.bin (both with an
// 8-byte magic/version prefix and trailing FNV-1a 64 checksum).
void write_case_dir(const CaseResult& result, const std::string& dir);
CaseResult read_case_dir(const std::string& dir);

// Generator entry point: one case per (power, velocity) pair, run with up to
// `workers` concurrent workers, each writing its own directory under out_dir.
std::vector<std::string> generate_cases(const SimulationConfig& base,
                                        const std::vector<double>& powers,
                                        const std::vector<double>& velocities,
                                        const std::string& out_dir, unsigned workers = 1);

}  // namespace meltpool
