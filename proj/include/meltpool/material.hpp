#pragma once

#include <string>
#include <vector>

#include "meltpool/common.hpp"

namespace meltpool {

// Temperature-dependent material data anchored at 298 K and 1923 K, plus
// phase-change and absorptivity constants. T_vap, A_m and H_m are desk-scale
// configuration values, not table data.
struct MaterialProperties {
    std::string name;
    double rho_298 = 0, rho_1923 = 0;   // kg/m^3
    double cp_298 = 0, cp_1923 = 0;     // J/kg/K
    double k_298 = 0, k_1923 = 0;       // W/m/K
    double t_liquidus = 0;              // K
    double t_solidus = 0;               // K
    double latent_fusion = 0;           // J/kg
    double latent_vaporization = 0;     // J/kg
    double t_vaporization = 0;          // K
    double flat_absorptivity = 0.3;     // A_m
    double melting_enthalpy = 0;        // H_m, J/m^3

    double t_melt() const { return 0.5 * (t_liquidus + t_solidus); }
    double mushy_lo() const { return std::min(t_liquidus, t_solidus); }
    double mushy_hi() const { return std::max(t_liquidus, t_solidus); }

    void validate() const;

    static MaterialProperties ti64();
    static MaterialProperties ss316l();
    static MaterialProperties by_name(const std::string& name);
};

struct PropertyTriple {
    double rho, cp, k;
};

// Linear interpolation between the 298 K and 1923 K anchors, clamped outside.
PropertyTriple interpolate_property(const MaterialProperties& mat, double T);

// Apparent heat capacity: Cp + L_f/(mushy width) inside the mushy interval.
double apparent_cp(const MaterialProperties& mat, double T);

// k/(rho*cp) at temperature T (sensible cp, no latent term).
double thermal_diffusivity(const MaterialProperties& mat, double T);

// Volumetric enthalpy H(T) = integral_{T_ref}^{T} rho(s)*cp_eff(s) ds with
// T_ref = 293 K, and its inverse. Piecewise-quadratic integrand, integrated
// exactly per segment; inversion by safeguarded Newton.
class EnthalpyCurve {
public:
    EnthalpyCurve(const MaterialProperties& mat, bool constant_properties = false,
                  double t_ref = 293.0);

    double enthalpy(double T) const;
    double temperature(double u) const;
    double rho_cp_eff(double T) const;
    double t_ref() const { return t_ref_; }

private:
    const MaterialProperties mat_;
    bool constant_;
    double t_ref_;
    std::vector<double> breaks_;
    std::vector<double> cum_;  // enthalpy at each breakpoint
    double segment_integral(double a, double b) const;
};

// Eq-8 asymptote: A(y) = 0.70 * (1 - exp(-0.66 y)).
double absorptivity_from_y(double y);

// The scaling-law exponent argument, exactly as printed (dimensionally
// inconsistent; kept verbatim and isolated so variants can be swapped in).
double keyhole_scaling_y_verbatim(double A_m, double P, double D, double v, double H_m,
                                  double r0);

// Dimensionless normalized-enthalpy form of the same scaling law:
// y = A_m * P / (pi * H_m * sqrt(D * v * r0^3)).
double keyhole_scaling_y_normalized(double A_m, double P, double D, double v, double H_m,
                                    double r0);

enum class AbsorptivityModel { Verbatim, NormalizedEnthalpy, Fixed };

// Absorptivity for a case; D is the thermal diffusivity (m^2/s). For Fixed the
// flat-plate minimum A_m is used directly.
double absorptivity(const MaterialProperties& mat, double P, double v, double r0, double D,
                    AbsorptivityModel model);

// Gaussian surface flux q(r) = P/(pi r0^2) * exp(-2 r^2 / r0^2) [W/m^2].
// When renormalize is set the flux is doubled so its plane integral is P
// instead of P/2.
double gaussian_flux(double P, double r0, double r, bool renormalize = false);

}  // namespace meltpool
