#include <catch2/catch_amalgamated.hpp>

#include <jlfet/bernoulli.hpp>
#include <jlfet/constants.hpp>
#include <jlfet/solver.hpp>

#include "oracles.hpp"

#include <cmath>
#include <limits>

using namespace jlfet;

TEST_CASE("Bernoulli function reproduces the pinned reference values") {
    for (const auto& [t, want] : refs::bernoulli_table) {
        INFO("t = " << t);
        CHECK(bernoulli(t) == Catch::Approx(want).epsilon(5e-12));
    }
}

TEST_CASE("Bernoulli function near the underflow edge stays finite") {
    const double b = bernoulli(745.0);
    CHECK(std::isfinite(b));
    CHECK(b >= 0.0);
    CHECK(b < 1e-318);
    CHECK(bernoulli(-745.0) == Catch::Approx(745.0).epsilon(1e-12));
}

TEST_CASE("Bernoulli branches join continuously") {
    // straddle each seam by one ulp so any branch mismatch dwarfs the
    // function's own variation over the gap
    const double inf = std::numeric_limits<double>::infinity();
    for (double seam : {1e-4, 705.0}) {
        const double lo = bernoulli(std::nextafter(seam, -inf));
        const double hi = bernoulli(std::nextafter(seam, inf));
        INFO("seam = " << seam);
        CHECK(lo == Catch::Approx(hi).epsilon(1e-9));
        const double nlo = bernoulli(std::nextafter(-seam, -inf));
        const double nhi = bernoulli(std::nextafter(-seam, inf));
        CHECK(nlo == Catch::Approx(nhi).epsilon(1e-9));
    }
}

TEST_CASE("Bernoulli matches a long-double evaluation across the domain") {
    std::vector<double> ts = {0.0};
    for (double mag = 1e-12; mag <= 700.0; mag *= 3.7) {
        ts.push_back(mag);
        ts.push_back(-mag);
    }
    for (double t : ts) {
        const long double want = refs::bernoulli_ref(static_cast<long double>(t));
        INFO("t = " << t);
        CHECK(bernoulli(t)
              == Catch::Approx(static_cast<double>(want)).epsilon(1e-12));
    }
}

TEST_CASE("Bernoulli drift identity B(-t) = B(t) + t") {
    for (double t : {1e-8, 1e-5, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0, 100.0, 700.0}) {
        INFO("t = " << t);
        CHECK(std::abs(bernoulli(-t) - bernoulli(t) - t) <= 1e-12 * std::max(1.0, t));
    }
}

namespace {
const EdgeGeometry kEdge{1e-7, 1.5e-13};  // 1 nm spacing, arbitrary face area
constexpr double kMu = 100.0;             // cm^2/Vs
}  // namespace

TEST_CASE("edge flux reduces to pure diffusion at zero potential difference") {
    const double ni_ = 1e17, nj = 3e17;
    const double flux = sg_edge_flux(0.2, 0.2, ni_, nj, kMu, kEdge);
    const double want = PhysicalConstants::q * kMu * refs::VT_300 / kEdge.dist_cm
                        * (nj - ni_) * kEdge.area_cm2;
    CHECK(flux == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("edge flux reduces to ohmic drift at equal densities") {
    const double n = 2e19;
    const double dpsi = 0.004;  // small forward drop
    const double flux = sg_edge_flux(0.1, 0.1 + dpsi, n, n, kMu, kEdge);
    // B(-t) - B(t) = t exactly, so the drift limit is an identity here
    const double want = -PhysicalConstants::q * kMu * n * dpsi / kEdge.dist_cm
                        * kEdge.area_cm2;
    CHECK(flux == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("edge flux survives a 700 kT potential drop and matches the asymptote") {
    const double n = 2e19;
    const double dpsi = 700.0 * refs::VT_300;
    const double f_up = sg_edge_flux(0.0, dpsi, n, n, kMu, kEdge);
    REQUIRE(std::isfinite(f_up));
    const double want = -PhysicalConstants::q * kMu * n * dpsi / kEdge.dist_cm
                        * kEdge.area_cm2;
    CHECK(f_up == Catch::Approx(want).epsilon(1e-6));

    const double f_down = sg_edge_flux(0.0, -dpsi, n, n, kMu, kEdge);
    REQUIRE(std::isfinite(f_down));
    CHECK(f_down == Catch::Approx(-want).epsilon(1e-6));
}

TEST_CASE("edge flux vanishes for a Boltzmann-equilibrium pair") {
    const double vt = PhysicalConstants::thermal_voltage(300.0);
    const double psi_i = 0.10, psi_j = 0.25;
    const double n0 = 6.7e9;
    const double ni_ = n0 * std::exp(psi_i / vt);
    const double nj = n0 * std::exp(psi_j / vt);
    const double flux = sg_edge_flux(psi_i, psi_j, ni_, nj, kMu, kEdge);
    const double t = (psi_j - psi_i) / vt;
    const double drift_scale = PhysicalConstants::q * kMu * vt / kEdge.dist_cm
                               * t * ni_ * kEdge.area_cm2;
    CHECK(std::abs(flux) <= 1e-12 * std::abs(drift_scale));
}

TEST_CASE("edge flux rejects non-positive densities") {
    CHECK_THROWS_AS(sg_edge_flux(0.0, 0.1, 0.0, 1e17, kMu, kEdge), std::invalid_argument);
    CHECK_THROWS_AS(sg_edge_flux(0.0, 0.1, 1e17, -1.0, kMu, kEdge), std::invalid_argument);
}
