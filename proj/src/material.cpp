#include "meltpool/material.hpp"

#include <algorithm>
#include <cmath>

namespace meltpool {

void MaterialProperties::validate() const {
    auto positive = [&](double v, const char* what) {
        if (!(v > 0.0))
            throw ConfigError("material " + name + ": " + what + " must be positive");
    };
    positive(rho_298, "rho_298");
    positive(rho_1923, "rho_1923");
    positive(cp_298, "cp_298");
    positive(cp_1923, "cp_1923");
    positive(k_298, "k_298");
    positive(k_1923, "k_1923");
    positive(latent_fusion, "latent_fusion");
    positive(melting_enthalpy, "melting_enthalpy");
    if (!(t_vaporization > mushy_hi()) || !(mushy_hi() > 298.0))
        throw ConfigError("material " + name +
                          ": requires T_vap > max(T_L, T_S) > 298");
}

static double default_melting_enthalpy(const MaterialProperties& m) {
    const double mean_cp = 0.5 * (m.cp_298 + m.cp_1923);
    return m.rho_298 * (mean_cp * (m.t_melt() - 298.0) + m.latent_fusion);
}

MaterialProperties MaterialProperties::ti64() {
    MaterialProperties m;
    m.name = "ti64";
    m.rho_298 = 4420.0;
    m.rho_1923 = 3920.0;
    m.cp_298 = 546.0;
    m.cp_1923 = 831.0;
    m.k_298 = 7.0;
    m.k_1923 = 33.4;
    m.t_liquidus = 1923.0;
    m.t_solidus = 1873.0;
    m.latent_fusion = 2.86e5;
    m.latent_vaporization = 6.00e4;
    m.t_vaporization = 3315.0;  // standard boiling point, not table data
    m.flat_absorptivity = 0.3;
    m.melting_enthalpy = default_melting_enthalpy(m);
    return m;
}

MaterialProperties MaterialProperties::ss316l() {
    MaterialProperties m;
    m.name = "ss316l";
    m.rho_298 = 7950.0;
    m.rho_1923 = 7249.0;
    m.cp_298 = 470.0;
    m.cp_1923 = 726.0;
    m.k_298 = 13.4;
    m.k_1923 = 29.0;
    m.t_liquidus = 1694.0;
    m.t_solidus = 1717.0;  // as tabulated; mushy interval uses [min, max]
    m.latent_fusion = 2.6e5;
    m.latent_vaporization = 6.00e4;
    m.t_vaporization = 3090.0;  // standard boiling point, not table data
    m.flat_absorptivity = 0.3;
    m.melting_enthalpy = default_melting_enthalpy(m);
    return m;
}

MaterialProperties MaterialProperties::by_name(const std::string& name) {
    if (name == "ti64") return ti64();
    if (name == "ss316l") return ss316l();
    throw ConfigError("unknown material '" + name + "' (expected ti64 or ss316l)");
}

static double lerp_anchor(double v298, double v1923, double T) {
    if (T <= 298.0) return v298;
    if (T >= 1923.0) return v1923;
    const double f = (T - 298.0) / (1923.0 - 298.0);
    return v298 + f * (v1923 - v298);
}

PropertyTriple interpolate_property(const MaterialProperties& mat, double T) {
    return {lerp_anchor(mat.rho_298, mat.rho_1923, T), lerp_anchor(mat.cp_298, mat.cp_1923, T),
            lerp_anchor(mat.k_298, mat.k_1923, T)};
}

double apparent_cp(const MaterialProperties& mat, double T) {
    double cp = lerp_anchor(mat.cp_298, mat.cp_1923, T);
    const double lo = mat.mushy_lo(), hi = mat.mushy_hi();
    if (T >= lo && T <= hi) cp += mat.latent_fusion / (hi - lo);
    return cp;
}

double thermal_diffusivity(const MaterialProperties& mat, double T) {
    const auto p = interpolate_property(mat, T);
    return p.k / (p.rho * p.cp);
}

// ---------------------------------------------------------------------------

EnthalpyCurve::EnthalpyCurve(const MaterialProperties& mat, bool constant_properties,
                             double t_ref)
    : mat_(mat), constant_(constant_properties), t_ref_(t_ref) {
    breaks_ = {t_ref_, 298.0, mat_.mushy_lo(), mat_.mushy_hi(), 1923.0};
    std::sort(breaks_.begin(), breaks_.end());
    breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
    while (!breaks_.empty() && breaks_.front() < t_ref_) breaks_.erase(breaks_.begin());
    cum_.assign(breaks_.size(), 0.0);
    for (std::size_t i = 1; i < breaks_.size(); ++i)
        cum_[i] = cum_[i - 1] + segment_integral(breaks_[i - 1], breaks_[i]);
}

double EnthalpyCurve::rho_cp_eff(double T) const {
    if (constant_) return mat_.rho_298 * mat_.cp_298;
    const auto p = interpolate_property(mat_, T);
    return p.rho * apparent_cp(mat_, T);
}

// 3-point Gauss-Legendre: exact for the piecewise-quadratic integrand as long
// as [a, b] does not straddle a breakpoint.
double EnthalpyCurve::segment_integral(double a, double b) const {
    static const double xs[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static const double ws[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) acc += ws[i] * rho_cp_eff(mid + half * xs[i]);
    return acc * half;
}

double EnthalpyCurve::enthalpy(double T) const {
    if (T <= breaks_.front()) return rho_cp_eff(breaks_.front()) * (T - breaks_.front());
    std::size_t seg = 0;
    while (seg + 1 < breaks_.size() && breaks_[seg + 1] <= T) ++seg;
    return cum_[seg] + segment_integral(breaks_[seg], T);
}

double EnthalpyCurve::temperature(double u) const {
    // Bracket, then safeguarded Newton.
    double lo = t_ref_, hi = t_ref_ + 1.0;
    if (u <= 0.0) return t_ref_ + u / rho_cp_eff(t_ref_);
    while (enthalpy(hi) < u) {
        lo = hi;
        hi = t_ref_ + 2.0 * (hi - t_ref_);
        if (hi > 1e7) throw NumericError("EnthalpyCurve::temperature: enthalpy out of range");
    }
    double T = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double f = enthalpy(T) - u;
        if (f > 0.0)
            hi = T;
        else
            lo = T;
        const double step = f / rho_cp_eff(T);
        double Tn = T - step;
        if (!(Tn > lo && Tn < hi)) Tn = 0.5 * (lo + hi);
        if (std::abs(Tn - T) < 1e-12 * std::max(1.0, std::abs(T))) return Tn;
        T = Tn;
    }
    return T;
}

// ---------------------------------------------------------------------------

double absorptivity_from_y(double y) { return 0.70 * (1.0 - std::exp(-0.66 * y)); }

double keyhole_scaling_y_verbatim(double A_m, double P, double D, double v, double H_m,
                                  double r0) {
    const double pi = 3.14159265358979323846;
    return A_m * P * D / (pi * v * H_m * r0 * r0 * std::sqrt(D * r0 * r0 / v)) *
           (r0 * std::sqrt(D * r0 / v));
}

double keyhole_scaling_y_normalized(double A_m, double P, double D, double v, double H_m,
                                    double r0) {
    const double pi = 3.14159265358979323846;
    return A_m * P / (pi * H_m * std::sqrt(D * v * r0 * r0 * r0));
}

double absorptivity(const MaterialProperties& mat, double P, double v, double r0, double D,
                    AbsorptivityModel model) {
    if (!(v > 0.0)) throw ConfigError("absorptivity: scan velocity must be positive");
    if (!(r0 > 0.0)) throw ConfigError("absorptivity: beam radius must be positive");
    switch (model) {
        case AbsorptivityModel::Fixed:
            return mat.flat_absorptivity;
        case AbsorptivityModel::Verbatim:
            return absorptivity_from_y(keyhole_scaling_y_verbatim(
                mat.flat_absorptivity, P, D, v, mat.melting_enthalpy, r0));
        case AbsorptivityModel::NormalizedEnthalpy:
            return absorptivity_from_y(keyhole_scaling_y_normalized(
                mat.flat_absorptivity, P, D, v, mat.melting_enthalpy, r0));
    }
    throw ConfigError("absorptivity: unknown model");
}

double gaussian_flux(double P, double r0, double r, bool renormalize) {
    const double pi = 3.14159265358979323846;
    const double q = P / (r0 * r0 * pi) * std::exp(-2.0 * r * r / (r0 * r0));
    return renormalize ? 2.0 * q : q;
}

}  // namespace meltpool
