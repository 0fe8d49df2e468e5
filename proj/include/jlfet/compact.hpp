#pragma once

#include <cmath>
#include <stdexcept>

#include "device.hpp"

namespace jlfet {

// Charge-based long-channel junctionless model. Fast tier and an independent
// order-of-magnitude oracle for the numerical solver; not a calibrated fit.
struct CompactParams {
    double C_ox_Fcm2 = 0;   // eps_ox / t_ox
    double t_si_cm = 0;     // body thickness H
    double V_FB = 0;
    double N_d_cm3 = 0;
    double mu_n = 0;
    double L_cm = 0;        // full source-to-drain length (channel + extensions)
    double W_eff_cm = 0;

    static CompactParams from_spec(const DeviceSpec& d);
};

inline double flat_band_voltage(const DeviceSpec& d) {
    if (d.gate.kind != GateKind::metal)
        throw std::invalid_argument(
            "flat_band_voltage: poly gate shifts with gate depletion; use the solver path");
    return d.gate.workfunction_eV - d.channel_phi_s_eV();
}

inline CompactParams CompactParams::from_spec(const DeviceSpec& d) {
    if (!(d.channel_doping_cm3 > 0))
        throw std::invalid_argument("compact model covers n-type channels only");
    CompactParams p;
    p.C_ox_Fcm2 = d.dielectric.relative_permittivity * PhysicalConstants::eps_0 /
                  (d.dielectric_thickness_nm * nm_to_cm);
    p.t_si_cm = d.channel_height_nm * nm_to_cm;
    p.V_FB = flat_band_voltage(d);
    p.N_d_cm3 = d.channel_doping_cm3;
    p.mu_n = d.channel_material.electron_mobility(d.channel_doping_cm3);
    p.L_cm = d.total_length_nm() * nm_to_cm;
    p.W_eff_cm = d.effective_width_cm();
    return p;
}

struct AnalyticVth {
    double V_th_V = 0;
    bool normally_on = false;   // negative threshold: depletion can't turn it off
};

// Symmetric-double-gate full-depletion threshold. Affine in phi_m with unit
// slope; the constant offset vs any 3-D structure is expected.
inline AnalyticVth threshold_voltage_analytic(const DeviceSpec& d) {
    const CompactParams p = CompactParams::from_spec(d);
    const double q = PhysicalConstants::q;
    const double eps_si =
        d.channel_material.relative_permittivity * PhysicalConstants::eps_0;
    const double vth = p.V_FB - q * p.N_d_cm3 * p.t_si_cm / (2.0 * p.C_ox_Fcm2) -
                       q * p.N_d_cm3 * p.t_si_cm * p.t_si_cm / (8.0 * eps_si);
    return {vth, vth < 0};
}

namespace detail {

// Antiderivative of the sheet-charge profile Q(u), u = V_g - V(x):
//   u <= V_th         : 0
//   V_th < u <= V_FB  : Q_b * (u - V_th) / (V_FB - V_th)      (partial depletion)
//   u > V_FB          : Q_b + C_ox * (u - V_FB)               (accumulation)
inline double charge_antiderivative(double u, double V_th, double V_FB, double Q_b,
                                    double C_ox) {
    const double d = V_FB - V_th;
    if (d <= 0) {   // degenerate: no depletion window
        const double a = std::max(u - V_FB, 0.0);
        return Q_b * a + 0.5 * C_ox * a * a;
    }
    if (u <= V_th) return 0.0;
    if (u <= V_FB) {
        const double a = u - V_th;
        return 0.5 * Q_b * a * a / d;
    }
    const double a = u - V_FB;
    return 0.5 * Q_b * d + Q_b * a + 0.5 * C_ox * a * a;
}

}  // namespace detail

// I_d = (W_eff/L) * mu * integral of Q(V_g - V) dV over [0, V_d], in closed
// form; pinch-off clamping is built into the antiderivative (constant below
// V_th). Subthreshold current is identically zero in this model.
inline double drain_current_compact(const DeviceSpec& d, double V_g, double V_d) {
    if (V_d < 0) throw std::invalid_argument("drain_current_compact requires V_d >= 0");
    const CompactParams p = CompactParams::from_spec(d);
    const double V_th = threshold_voltage_analytic(d).V_th_V;
    const double Q_b = PhysicalConstants::q * p.N_d_cm3 * p.t_si_cm;
    const double G1 = detail::charge_antiderivative(V_g, V_th, p.V_FB, Q_b, p.C_ox_Fcm2);
    const double G0 =
        detail::charge_antiderivative(V_g - V_d, V_th, p.V_FB, Q_b, p.C_ox_Fcm2);
    return p.W_eff_cm / p.L_cm * p.mu_n * (G1 - G0);
}

}  // namespace jlfet
