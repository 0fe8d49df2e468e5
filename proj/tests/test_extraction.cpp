#include <catch2/catch_amalgamated.hpp>

#include <jlfet/compact.hpp>
#include <jlfet/extraction.hpp>
#include <jlfet/mesh.hpp>
#include <jlfet/solver.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace jlfet;

TEST_CASE("criterion current scales with the width-to-length ratio") {
    CHECK(criterion_current(default_device())
          == Catch::Approx(refs::I_crit_stock).epsilon(1e-12));
    CHECK(criterion_current(refs::unit_aspect_device())
          == Catch::Approx(1e-7).epsilon(1e-12));
}

TEST_CASE("constant-current threshold recovers an exact synthetic decade curve") {
    const DeviceSpec d = refs::unit_aspect_device();  // I_crit = 100 nA
    const IVCurve c = refs::exponential_transfer(0.4, 0.1, 1e-7, 0.0, 0.8, 0.05);
    CHECK(extract_vth_constant_current(c, d) == Catch::Approx(0.4).margin(1e-9));
}

TEST_CASE("constant-current threshold error cases") {
    const DeviceSpec d = refs::unit_aspect_device();
    SECTION("curve never reaches the criterion current") {
        const IVCurve c = refs::exponential_transfer(0.4, 0.1, 1e-7, -0.4, 0.0, 0.05);
        CHECK_THROWS_AS(extract_vth_constant_current(c, d), ExtractionError);
    }
    SECTION("too few points") {
        const IVCurve c = refs::exponential_transfer(0.4, 0.1, 1e-7, 0.2, 0.5, 0.1);
        CHECK_THROWS_AS(extract_vth_constant_current(c, d), ExtractionError);
    }
    SECTION("output curves are refused") {
        IVCurve c = refs::exponential_transfer(0.4, 0.1, 1e-7, 0.0, 0.8, 0.05);
        c.kind = CurveKind::output;
        CHECK_THROWS_AS(extract_vth_constant_current(c, d), ExtractionError);
    }
    SECTION("unconverged points are ignored") {
        IVCurve c = refs::exponential_transfer(0.4, 0.1, 1e-7, 0.0, 0.8, 0.05);
        for (auto& p : c.points) p.converged = false;
        CHECK_THROWS_AS(extract_vth_constant_current(c, d), ExtractionError);
    }
}

TEST_CASE("max-gm threshold hits the analytic limit of a kinked turn-on") {
    const DeviceSpec d = refs::unit_aspect_device();

    const IVCurve coarse = refs::kinked_linear_transfer(0.5, 1e-5, 0.8, 0.3, 1.2, 0.05);
    const double v_coarse = extract_vth_max_gm(coarse, d);
    CHECK(v_coarse == Catch::Approx(0.5).margin(1e-9));

    const IVCurve dense = refs::kinked_linear_transfer(0.5, 1e-5, 0.8, 0.3, 1.2, 0.01);
    const double v_dense = extract_vth_max_gm(dense, d);
    CHECK(v_dense == Catch::Approx(0.5).margin(1e-9));
    CHECK(std::abs(v_dense - 0.5) <= std::abs(v_coarse - 0.5) + 1e-12);
}

TEST_CASE("max-gm threshold subtracts half the drain bias") {
    const DeviceSpec d = refs::unit_aspect_device();
    const IVCurve c = refs::kinked_linear_transfer(0.5, 1e-5, 0.8, 0.3, 1.2, 0.05, 0.01);
    CHECK(extract_vth_max_gm(c, d) == Catch::Approx(0.495).margin(1e-9));
}

TEST_CASE("max-gm threshold is invariant under current rescaling") {
    const DeviceSpec d = refs::unit_aspect_device();
    IVCurve c = refs::kinked_linear_transfer(0.5, 1e-5, 0.8, 0.3, 1.2, 0.05);
    const double base = extract_vth_max_gm(c, d);
    for (auto& p : c.points) p.I_d_A *= 3.7;
    CHECK(extract_vth_max_gm(c, d) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("max-gm threshold refuses unresolved peaks") {
    const DeviceSpec d = refs::unit_aspect_device();
    SECTION("transconductance falling from the first point") {
        const IVCurve c = refs::falling_gm_transfer(0.1, 1.0, 0.1);
        CHECK_THROWS_AS(extract_vth_max_gm(c, d), ExtractionError);
    }
    SECTION("transconductance still rising at the last point") {
        const IVCurve c = refs::rising_gm_transfer(0.3, 0.35, 1.0, 0.05);
        CHECK_THROWS_AS(extract_vth_max_gm(c, d), ExtractionError);
    }
}

TEST_CASE("subthreshold swing recovers exact synthetic slopes") {
    const DeviceSpec d = refs::unit_aspect_device();
    const IVCurve sixty = refs::exponential_transfer(0.4, 0.060, 1e-7, 0.10, 0.45, 0.01);
    CHECK(subthreshold_swing(sixty, d) == Catch::Approx(60.0).margin(1e-6));

    const IVCurve hundred = refs::exponential_transfer(0.4, 0.100, 1e-7, 0.0, 0.45, 0.02);
    CHECK(subthreshold_swing(hundred, d) == Catch::Approx(100.0).margin(1e-6));
}

TEST_CASE("subthreshold swing demands three decades of usable current") {
    const DeviceSpec d = refs::unit_aspect_device();
    // truncated curve: bottoms out a decade too high
    const IVCurve c = refs::exponential_transfer(0.4, 0.060, 1e-7, 0.30, 0.45, 0.01);
    CHECK_THROWS_AS(subthreshold_swing(c, d), ExtractionError);
}

TEST_CASE("on and off currents from an exact grid") {
    const IVCurve c = refs::exponential_transfer(0.4, 0.1, 1e-7, 0.0, 1.0, 0.1, 1.0);
    const OnOffMetrics m = on_off_metrics(c, 1.0);
    CHECK(m.I_on_A == Catch::Approx(0.1).epsilon(1e-12));
    CHECK(m.I_off_A == Catch::Approx(1e-11).epsilon(1e-12));
    CHECK(m.on_off_ratio == Catch::Approx(1e10).epsilon(1e-9));
    CHECK_FALSE(m.I_off_floored);

    SECTION("zero supply collapses the ratio to one") {
        CHECK(on_off_metrics(c, 0.0).on_off_ratio == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("unmeasurably small off currents are floored and flagged") {
        IVCurve tiny = c;
        for (auto& p : tiny.points) p.I_d_A *= 1e-12;
        const OnOffMetrics f = on_off_metrics(tiny, 1.0);
        CHECK(f.I_off_floored);
        CHECK(f.I_off_A == Catch::Approx(1e-18).epsilon(1e-12));
        CHECK(f.on_off_ratio == Catch::Approx(f.I_on_A / 1e-18).epsilon(1e-9));
    }
    SECTION("negative supply is rejected") {
        CHECK_THROWS_AS(on_off_metrics(c, -0.5), ExtractionError);
    }
    SECTION("supply outside the swept range is rejected") {
        CHECK_THROWS_AS(on_off_metrics(c, 2.0), ExtractionError);
    }
}

TEST_CASE("quasi-static gate capacitance") {
    const DeviceSpec d = default_device();
    const StructuredMesh m = build_mesh(d);
    const SolverSettings settings;
    const double vfb = flat_band_voltage(d);

    SECTION("difference quotient is stable under step halving") {
        const double c1 = gate_capacitance(d, m, settings, vfb + 0.5, 5e-3);
        const double c2 = gate_capacitance(d, m, settings, vfb + 0.5, 2.5e-3);
        REQUIRE(c1 > 0.0);
        CHECK(c2 == Catch::Approx(c1).epsilon(0.02));
    }
    SECTION("deep depletion pins the capacitance well below the oxide plate value") {
        const double c = gate_capacitance(d, m, settings, refs::V_th_463 - 0.3);
        CHECK(c < 0.5 * refs::C_ox_times_area);
        CHECK(c > 0.0);
    }
    SECTION("a non-positive step is rejected") {
        CHECK_THROWS_AS(gate_capacitance(d, m, settings, 0.5, 0.0), ExtractionError);
    }
}

TEST_CASE("full measurement of the stock device lands in the reference window") {
    const MeasureResult r = measure_device(default_device());
    const DeviceMetrics& m = r.metrics;

    // The constant-current threshold of the classical model sits ~0.1 V below
    // the abrupt-depletion analytic value (0.020 V): carrier tails keep a
    // Debye-width filament conducting at mid-body past full depletion. The
    // value is mesh-converged (-0.0815 coarse / -0.0824 default / -0.0830
    // fine), so pin it as a regression oracle.
    CHECK(m.V_th_V > -0.095);
    CHECK(m.V_th_V < -0.070);
    CHECK(m.V_th_method == "constant_current");
    CHECK(m.SS_mV_dec > 55.0);
    CHECK(m.SS_mV_dec < 200.0);
    CHECK(m.I_on_A > 0.0);
    CHECK(m.I_off_A > 0.0);
    CHECK(m.I_on_A > m.I_off_A);
    CHECK(m.on_off_ratio > 1.0);
    CHECK(m.gm_max_S > 0.0);
    CHECK(r.diagnostics.requested_points > 0);
    CHECK(r.diagnostics.converged_points == r.diagnostics.requested_points);
    CHECK(r.transfer_low.fixed_bias.V_d == Catch::Approx(0.05));
    CHECK(r.transfer_dd.fixed_bias.V_d == Catch::Approx(1.0));
}

TEST_CASE("measurement is deterministic") {
    MeasureOptions opt;
    opt.resolution = MeshResolution::coarse();
    const MeasureResult a = measure_device(default_device(), opt);
    const MeasureResult b = measure_device(default_device(), opt);
    CHECK(a.metrics.V_th_V == b.metrics.V_th_V);
    CHECK(a.metrics.SS_mV_dec == b.metrics.SS_mV_dec);
    CHECK(a.metrics.I_on_A == b.metrics.I_on_A);
    CHECK(a.metrics.I_off_A == b.metrics.I_off_A);
    CHECK(a.metrics.gm_max_S == b.metrics.gm_max_S);
}

TEST_CASE("constant-current and max-gm thresholds agree on a real device") {
    SweepRequest req;
    req.vary = SweepRequest::Vary::V_g;
    req.fixed = {0.0, 0.05, 0.0};
    req.points = refs::grid(-0.5, 1.5, 0.05);
    const IVCurve c = iv_sweep(default_device(), SolverSettings{}, req);
    REQUIRE(c.converged_count() == static_cast<int>(c.points.size()));

    const double v_cc = extract_vth_constant_current(c, default_device());
    const double v_gm = extract_vth_max_gm(c, default_device());
    INFO("constant-current " << v_cc << " V, max-gm " << v_gm << " V");
    CHECK(std::abs(v_cc - v_gm) <= 0.15);
}

TEST_CASE("comparing a gate stack against itself is an exact identity") {
    MeasureOptions opt;
    opt.resolution = MeshResolution::coarse();
    const DeviceSpec d = default_device();
    const GateStackComparison rep = compare_gate_stacks(d, d, 1.0, opt);
    CHECK(rep.ratio_quotient == 1.0);
    CHECK(rep.matched_phi_m_eV == Catch::Approx(4.63));
    CHECK(std::abs(rep.vth_mismatch_V) < 1e-12);
    CHECK(rep.metal_matched.V_th_V == rep.poly.V_th_V);
}

TEST_CASE("degenerately doped poly behaves like a metal at its band edge") {
    MeasureOptions opt;
    opt.resolution = MeshResolution::coarse();
    DeviceSpec poly = default_device();
    poly.gate = GateMaterial::poly(1e21);
    const GateStackComparison rep = compare_gate_stacks(default_device(), poly, 1.0, opt);
    CHECK(std::abs(rep.vth_mismatch_V) <= 0.02);
    // near-ideal poly: matched metal on/off within 30% of the poly's
    CHECK(rep.ratio_quotient > 0.7);
    CHECK(rep.ratio_quotient < 1.3);
    // the matched workfunction sits near the n+ band edge
    CHECK(rep.matched_phi_m_eV == Catch::Approx(4.05).margin(0.15));
}

TEST_CASE("gate-stack comparison requires a metal first spec") {
    DeviceSpec poly = default_device();
    poly.gate = GateMaterial::poly(1e20);
    CHECK_THROWS_AS(compare_gate_stacks(poly, poly, 1.0), std::invalid_argument);
}
