#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "compact.hpp"
#include "device.hpp"
#include "iv_curve.hpp"
#include "materials.hpp"
#include "solver.hpp"

namespace jlfet {

class ExtractionError : public std::runtime_error {
public:
    explicit ExtractionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Constant-current threshold criterion, scaled by device aspect ratio.
inline double criterion_current(const DeviceSpec& d) {
    return 100e-9 * d.effective_width_factor * d.channel_width_nm / d.channel_length_nm;
}

struct CapacitanceSample {
    double V_g_V = 0;
    double C_F = 0;
};

struct DeviceMetrics {
    double V_th_V = std::numeric_limits<double>::quiet_NaN();
    std::string V_th_method;                 // "constant_current" | "max_gm"
    double SS_mV_dec = std::numeric_limits<double>::quiet_NaN();
    double I_on_A = std::numeric_limits<double>::quiet_NaN();
    double I_off_A = std::numeric_limits<double>::quiet_NaN();
    double on_off_ratio = std::numeric_limits<double>::quiet_NaN();
    bool I_off_floored = false;              // I_off clamped at the 1e-18 A noise floor
    double gm_max_S = std::numeric_limits<double>::quiet_NaN();
    std::vector<CapacitanceSample> C_gg_samples;
};

namespace detail {

struct CurvePoint {
    double V;
    double I;
};

// Converged, finite points in ascending sweep order.
inline std::vector<CurvePoint> usable_points(const IVCurve& curve, std::size_t min_count,
                                             const char* who) {
    std::vector<CurvePoint> pts;
    pts.reserve(curve.points.size());
    for (const auto& p : curve.points)
        if (p.converged && std::isfinite(p.I_d_A)) pts.push_back({p.sweep_V, p.I_d_A});
    if (pts.size() < min_count)
        throw ExtractionError(std::string(who) + ": needs at least " +
                              std::to_string(min_count) + " converged points, curve has " +
                              std::to_string(pts.size()));
    if (pts.front().V > pts.back().V) std::reverse(pts.begin(), pts.end());
    return pts;
}

inline double interpolate_current(const std::vector<CurvePoint>& pts, double V,
                                  const char* who) {
    for (const auto& p : pts)
        if (std::abs(p.V - V) <= 1e-12) return p.I;
    if (V < pts.front().V || V > pts.back().V)
        throw ExtractionError(std::string(who) + ": bias " + std::to_string(V) +
                              " V outside the converged sweep range");
    for (std::size_t k = 1; k < pts.size(); ++k)
        if (V <= pts[k].V) {
            const double w = (V - pts[k - 1].V) / (pts[k].V - pts[k - 1].V);
            return pts[k - 1].I + w * (pts[k].I - pts[k - 1].I);
        }
    throw ExtractionError(std::string(who) + ": interpolation failed");   // unreachable
}

struct OlsFit {
    double slope, intercept, r_squared;
};

inline OlsFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    for (std::size_t k = 0; k < n; ++k) sx += x[k], sy += y[k];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (sxx <= 0) throw ExtractionError("degenerate fit: x values are all equal");
    OlsFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (syy <= 0) {
        f.r_squared = 1.0;   // constant y is fit exactly by a horizontal line
    } else {
        const double ss_res = syy - f.slope * sxy;
        f.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return f;
}

}  // namespace detail

// Gate bias where I_d crosses the criterion current, log-linearly interpolated
// between the bracketing sweep points.
inline double extract_vth_constant_current(const IVCurve& curve, const DeviceSpec& d) {
    if (curve.kind != CurveKind::transfer)
        throw ExtractionError("constant-current V_th needs a transfer curve");
    const auto pts = detail::usable_points(curve, 5, "constant-current V_th");
    const double I_crit = criterion_current(d);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double I0 = pts[k].I, I1 = pts[k + 1].I;
        if (I0 == I_crit) return pts[k].V;
        if (I1 == I_crit) return pts[k + 1].V;
        if (I0 < I_crit && I_crit < I1) {
            if (I0 <= 0)   // cannot place a log-linear crossing from a non-positive sample
                continue;
            const double f = (std::log(I_crit) - std::log(I0)) / (std::log(I1) - std::log(I0));
            return pts[k].V + f * (pts[k + 1].V - pts[k].V);
        }
    }
    throw ExtractionError("curve does not bracket threshold (criterion current " +
                          std::to_string(I_crit) + " A never crossed)");
}

// Extrapolated-linear-region threshold: tangent at the transconductance peak,
// extrapolated to I_d = 0, minus V_d/2. Exactly invariant under I -> c*I.
inline double extract_vth_max_gm(const IVCurve& curve, const DeviceSpec&) {
    if (curve.kind != CurveKind::transfer)
        throw ExtractionError("max-gm V_th needs a transfer curve");
    const auto pts = detail::usable_points(curve, 7, "max-gm V_th");
    const std::size_t n = pts.size();
    std::vector<double> gm(n, 0.0);
    for (std::size_t k = 1; k + 1 < n; ++k)
        gm[k] = (pts[k + 1].I - pts[k - 1].I) / (pts[k + 1].V - pts[k - 1].V);
    std::size_t kp = 1;
    for (std::size_t k = 2; k + 1 < n; ++k)
        if (gm[k] > gm[kp]) kp = k;
    if (kp == 1 || kp + 2 == n)
        throw ExtractionError("gm peak sits at the curve boundary (peak not resolved)");
    if (!(gm[kp] > 0)) throw ExtractionError("non-positive peak transconductance");
    return pts[kp].V - pts[kp].I / gm[kp] - curve.fixed_bias.V_d / 2.0;
}

// Least-squares V_g per decade of I_d over [I_crit/1000, I_crit/10].
inline double subthreshold_swing(const IVCurve& curve, const DeviceSpec& d) {
    if (curve.kind != CurveKind::transfer)
        throw ExtractionError("subthreshold swing needs a transfer curve");
    const auto pts = detail::usable_points(curve, 5, "subthreshold swing");
    const double I_crit = criterion_current(d);
    double I_min = std::numeric_limits<double>::infinity();
    std::vector<double> lg, vg;
    for (const auto& p : pts) {
        if (!(p.I > 0)) continue;
        I_min = std::min(I_min, p.I);
        if (p.I >= I_crit / 1000.0 && p.I <= I_crit / 10.0) {
            lg.push_back(std::log10(p.I));
            vg.push_back(p.V);
        }
    }
    if (!(I_min <= I_crit / 1000.0) || lg.size() < 3)
        throw ExtractionError("insufficient subthreshold decades: need >= 3 points inside "
                              "[I_crit/1000, I_crit/10] and current reaching I_crit/1000");
    const auto f = detail::ols(lg, vg);
    if (!(f.slope > 0))
        throw ExtractionError("non-positive subthreshold slope (curve not turning on)");
    return f.slope * 1000.0;   // V/decade -> mV/decade
}

struct OnOffMetrics {
    double I_on_A = 0;
    double I_off_A = 0;
    double on_off_ratio = 0;
    bool I_off_floored = false;
};

inline OnOffMetrics on_off_metrics(const IVCurve& curve, double V_dd) {
    if (curve.kind != CurveKind::transfer)
        throw ExtractionError("on/off metrics need a transfer curve");
    if (V_dd < 0) throw ExtractionError("on/off metrics need V_dd >= 0");
    const auto pts = detail::usable_points(curve, 5, "on/off metrics");
    OnOffMetrics m;
    m.I_on_A = detail::interpolate_current(pts, V_dd, "on/off metrics");
    m.I_off_A = detail::interpolate_current(pts, 0.0, "on/off metrics");
    constexpr double floor_A = 1e-18;
    double off = m.I_off_A;
    if (off < floor_A) {
        off = floor_A;
        m.I_off_floored = true;
        m.I_off_A = floor_A;
    }
    m.on_off_ratio = m.I_on_A / off;
    return m;
}

// Quasi-static C_gg by symmetric finite difference of the semiconductor charge
// under a pure-Poisson (zero-current) solve.
inline double gate_capacitance(const DeviceSpec& d, const StructuredMesh& mesh,
                               const SolverSettings& settings, double V_g,
                               double delta_V = 5e-3) {
    if (!(delta_V > 0)) throw ExtractionError("gate_capacitance needs delta_V > 0");
    DriftDiffusionSolver solver(mesh, d, settings);
    const FieldSolution hi = solver.solve_poisson({V_g + delta_V, 0, 0});
    const FieldSolution lo = solver.solve_poisson({V_g - delta_V, 0, 0});
    if (!hi.converged || !lo.converged)
        throw ExtractionError("gate_capacitance: perturbed solve did not converge at V_g = " +
                              std::to_string(V_g) + " V");
    // semiconductor_charge returns the image charge on the gate, so the
    // difference quotient is already positive in normal operation.
    return (solver.semiconductor_charge(hi) - solver.semiconductor_charge(lo)) /
           (2.0 * delta_V);
}

// ---------------------------------------------------------------------------
// Standard measurement protocol shared by the sweep harness and the gate-stack
// comparison: one transfer curve at low V_d for V_th/SS, one at V_dd for the
// on/off figures.

struct BiasProtocol {
    double V_dd = 1.0;
    double vth_drain_bias_V = 0.05;
    double vth_step_V = 0.025;         // low-V_d curve: fine steps for SS window
    double on_off_step_V = 0.05;       // V_dd curve: 0 and V_dd land on the grid
    double margin_below_V = 0.50;      // sweep window around the analytic V_th estimate
    double margin_above_V = 0.60;
};

struct SolveDiagnostics {
    int requested_points = 0;
    int converged_points = 0;
};

struct MeasureOptions {
    BiasProtocol protocol;
    MeshResolution resolution = MeshResolution::standard();
    SolverSettings settings;
    std::vector<double> capacitance_biases;   // optional C_gg sample points (V_d = 0)
};

struct MeasureResult {
    DeviceMetrics metrics;
    IVCurve transfer_low;    // V_d = vth_drain_bias_V
    IVCurve transfer_dd;     // V_d = V_dd
    SolveDiagnostics diagnostics;
};

namespace detail {

// Rough threshold estimate used only to center sweep windows. For a poly gate
// the depletion shift is ignored; the margins absorb it.
inline double vth_estimate(const DeviceSpec& d) {
    DeviceSpec t = d;
    if (t.gate.kind != GateKind::metal)
        t.gate = GateMaterial::metal(channel_workfunction(
            t.channel_material, t.gate.poly_doping_cm3, t.temperature_K));
    return threshold_voltage_analytic(t).V_th_V;
}

// Inclusive grid of multiples of `step` covering [lo, hi].
inline std::vector<double> step_grid(double lo, double hi, double step) {
    const long k0 = static_cast<long>(std::floor(lo / step + 1e-9));
    const long k1 = static_cast<long>(std::ceil(hi / step - 1e-9));
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(k1 - k0 + 1));
    for (long k = k0; k <= k1; ++k) g.push_back(k * step);
    return g;
}

inline double gm_max_of(const std::vector<CurvePoint>& pts) {
    double g = 0.0;
    for (std::size_t k = 1; k + 1 < pts.size(); ++k)
        g = std::max(g, (pts[k + 1].I - pts[k - 1].I) / (pts[k + 1].V - pts[k - 1].V));
    return g;
}

}  // namespace detail

inline MeasureResult measure_device(const DeviceSpec& d, const MeasureOptions& opt = {}) {
    if (auto bad = validate(d); !bad.empty())
        throw std::invalid_argument("invalid device spec: " + bad.front());
    const BiasProtocol& bp = opt.protocol;
    const double est = detail::vth_estimate(d);

    MeasureResult r;
    SweepRequest low;
    low.vary = SweepRequest::Vary::V_g;
    low.fixed = {0.0, bp.vth_drain_bias_V, 0.0};
    low.points = detail::step_grid(est - bp.margin_below_V, est + bp.margin_above_V,
                                   bp.vth_step_V);
    r.transfer_low = iv_sweep(d, opt.settings, low, opt.resolution);

    SweepRequest dd;
    dd.vary = SweepRequest::Vary::V_g;
    dd.fixed = {0.0, bp.V_dd, 0.0};
    dd.points = detail::step_grid(std::min(0.0, est - bp.margin_below_V),
                                  std::max(bp.V_dd, est + bp.margin_above_V),
                                  bp.on_off_step_V);
    r.transfer_dd = iv_sweep(d, opt.settings, dd, opt.resolution);

    r.diagnostics.requested_points =
        static_cast<int>(r.transfer_low.points.size() + r.transfer_dd.points.size());
    r.diagnostics.converged_points =
        r.transfer_low.converged_count() + r.transfer_dd.converged_count();

    DeviceMetrics& m = r.metrics;
    m.V_th_V = extract_vth_constant_current(r.transfer_low, d);
    m.V_th_method = "constant_current";
    m.SS_mV_dec = subthreshold_swing(r.transfer_low, d);
    const OnOffMetrics oo = on_off_metrics(r.transfer_dd, bp.V_dd);
    m.I_on_A = oo.I_on_A;
    m.I_off_A = oo.I_off_A;
    m.on_off_ratio = oo.on_off_ratio;
    m.I_off_floored = oo.I_off_floored;
    m.gm_max_S = detail::gm_max_of(detail::usable_points(r.transfer_dd, 5, "gm_max"));

    if (!opt.capacitance_biases.empty()) {
        const StructuredMesh mesh = build_mesh(d, opt.resolution);
        for (double vg : opt.capacitance_biases)
            m.C_gg_samples.push_back({vg, gate_capacitance(d, mesh, opt.settings, vg)});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Metal-vs-poly gate stack comparison at matched threshold voltage.

struct GateStackComparison {
    DeviceMetrics metal;           // at metal_spec's own workfunction
    DeviceMetrics poly;
    DeviceMetrics metal_matched;   // at the adjusted workfunction
    double matched_phi_m_eV = 0;
    double vth_mismatch_V = 0;     // V_th(metal_matched) - V_th(poly)
    double ratio_quotient = 0;     // metal_matched on/off ratio over poly's
};

// Adjusts the metal workfunction until both devices share V_th to within
// match_tol_V, exploiting the exact unit dV_th/dphi_m slope: a slope-1 secant
// step lands within mesh noise, and a bracketed bisection mops up from there.
inline GateStackComparison compare_gate_stacks(const DeviceSpec& metal_spec,
                                               const DeviceSpec& poly_spec, double V_dd,
                                               const MeasureOptions& base_opt = {},
                                               double match_tol_V = 0.02) {
    if (metal_spec.gate.kind != GateKind::metal)
        throw std::invalid_argument("compare_gate_stacks: first spec must have a metal gate");
    MeasureOptions opt = base_opt;
    opt.protocol.V_dd = V_dd;

    GateStackComparison rep;
    rep.poly = measure_device(poly_spec, opt).metrics;

    constexpr double phi_lo = 3.0, phi_hi = 6.5;
    auto measure_at = [&](double phi) {
        DeviceSpec s = metal_spec;
        s.gate.workfunction_eV = phi;
        return measure_device(s, opt).metrics;
    };

    double phi = metal_spec.gate.workfunction_eV;
    DeviceMetrics mm = measure_at(phi);
    rep.metal = mm;

    double lo = phi_lo, hi = phi_hi;       // workfunction bracket on f = V_th_m - V_th_p
    bool lo_seen = false, hi_seen = false;
    for (int it = 0; it < 12; ++it) {
        const double f = mm.V_th_V - rep.poly.V_th_V;
        if (std::abs(f) < match_tol_V) {
            rep.metal_matched = mm;
            rep.matched_phi_m_eV = phi;
            rep.vth_mismatch_V = f;
            rep.ratio_quotient = mm.on_off_ratio / rep.poly.on_off_ratio;
            return rep;
        }
        if (f > 0) hi = phi, hi_seen = true;
        else lo = phi, lo_seen = true;
        double next = phi - f;             // unit-slope secant step
        if (next <= lo || next >= hi)      // outside the bracket: bisect instead
            next = (lo_seen && hi_seen) ? 0.5 * (lo + hi)
                                        : std::clamp(next, phi_lo, phi_hi);
        if (next == phi) break;
        phi = next;
        mm = measure_at(phi);
    }
    throw ExtractionError(
        "compare_gate_stacks: could not match V_th within the workfunction window "
        "[3.0, 6.5] eV");
}

}  // namespace jlfet
