#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "constants.hpp"
#include "materials.hpp"

namespace jlfet {

enum class GateCoverage { double_gate, tri_gate };

// The simulated domain is the 2-D (x = transport, y = body thickness) slice of
// a gated nanowire. A tri-gate wire of width W and height H is mapped onto the
// symmetric double-gate slice by scaling sheet current with an effective width:
// gate perimeter (W + 2H) over the slice's own two faces (2H).
inline double default_width_factor(GateCoverage coverage, double width_nm, double height_nm) {
    if (coverage == GateCoverage::double_gate) return 1.0;
    return (width_nm + 2.0 * height_nm) / (2.0 * height_nm);
}

struct DeviceSpec {
    double channel_length_nm = 0;    // gated length L
    double channel_width_nm = 0;     // W (third dimension, enters via W_eff)
    double channel_height_nm = 0;    // H (the meshed thickness)
    double sd_extension_nm = 0;      // ungated spacer on each side; 0 = gate-all
    double channel_doping_cm3 = 0;   // signed, + donors
    double sd_doping_cm3 = 0;        // signed, + donors
    SemiconductorMaterial channel_material = silicon();
    DielectricMaterial dielectric = hfo2();
    double dielectric_thickness_nm = 0;
    GateMaterial gate;
    GateCoverage gate_coverage = GateCoverage::tri_gate;
    double effective_width_factor = 1.0;
    double temperature_K = 300.0;

    double thermal_voltage() const {
        return PhysicalConstants::thermal_voltage(temperature_K);
    }
    double channel_phi_s_eV() const {
        return channel_workfunction(channel_material, channel_doping_cm3, temperature_K);
    }
    double effective_width_cm() const {
        return effective_width_factor * channel_width_nm * nm_to_cm;
    }
    // Full source-to-drain silicon length (channel plus both extensions).
    double total_length_nm() const {
        return channel_length_nm + 2.0 * sd_extension_nm;
    }
    double intrinsic_density() const {
        return channel_material.intrinsic_density(temperature_K);
    }
};

struct BiasPoint {
    double V_g = 0;   // gate [V]
    double V_d = 0;   // drain [V]
    double V_s = 0;   // source [V]
};

inline std::vector<std::string> validate(const DeviceSpec& d) {
    std::vector<std::string> bad;
    if (!(d.channel_length_nm > 0)) bad.push_back("channel_length_nm must be > 0");
    if (!(d.channel_width_nm > 0)) bad.push_back("channel_width_nm must be > 0");
    if (!(d.channel_height_nm > 0)) bad.push_back("channel_height_nm must be > 0");
    if (!(d.sd_extension_nm >= 0)) bad.push_back("sd_extension_nm must be >= 0");
    if (!(d.dielectric_thickness_nm > 0.5 && d.dielectric_thickness_nm <= 20.0))
        bad.push_back("dielectric_thickness_nm must be in (0.5, 20]");
    if (d.channel_doping_cm3 == 0.0) bad.push_back("channel_doping_cm3 must be nonzero");
    const double Nch = std::abs(d.channel_doping_cm3);
    if (!(Nch >= 1e14 && Nch <= 1e21))
        bad.push_back("|channel_doping_cm3| must be in [1e14, 1e21]");
    if (d.sd_doping_cm3 * d.channel_doping_cm3 <= 0.0)
        bad.push_back("sd_doping_cm3 must have the same sign as channel_doping_cm3");
    else if (std::abs(d.sd_doping_cm3) < Nch)
        bad.push_back("|sd_doping_cm3| must be >= |channel_doping_cm3| (junctionless)");
    if (!(d.temperature_K >= 200.0 && d.temperature_K <= 500.0))
        bad.push_back("temperature_K must be in [200, 500]");
    if (!(d.effective_width_factor > 0)) bad.push_back("effective_width_factor must be > 0");
    if (!(d.dielectric.relative_permittivity > 0))
        bad.push_back("dielectric relative_permittivity must be > 0");
    for (auto& m : d.channel_material.validate()) bad.push_back("channel_material: " + m);
    for (auto& m : d.gate.validate()) bad.push_back("gate: " + m);
    return bad;
}

// The 22 nm-node reference device: uniformly doped n+ nanowire, HfO2 gate
// stack, tungsten gate. Normally-off by workfunction alone.
inline DeviceSpec default_device() {
    DeviceSpec d;
    d.channel_length_nm = 22.0;
    d.channel_width_nm = 10.0;
    d.channel_height_nm = 10.0;
    d.sd_extension_nm = 10.0;
    d.channel_doping_cm3 = 2e19;
    d.sd_doping_cm3 = 2e19;
    d.channel_material = silicon();
    d.dielectric = hfo2();
    d.dielectric_thickness_nm = 2.0;
    d.gate = GateMaterial::metal(4.63);
    d.gate_coverage = GateCoverage::tri_gate;
    d.effective_width_factor =
        default_width_factor(GateCoverage::tri_gate, d.channel_width_nm, d.channel_height_nm);
    d.temperature_K = 300.0;
    return d;
}

// Stable short identity for result provenance (FNV-1a over the knobs that
// change the physics).
inline std::string spec_fingerprint(const DeviceSpec& d) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "L%.9g W%.9g H%.9g E%.9g Nch%.9g Nsd%.9g eps%.9g tox%.9g g%d wf%.9g "
                  "pd%.9g cov%d f%.9g T%.9g chi%.9g Eg%.9g",
                  d.channel_length_nm, d.channel_width_nm, d.channel_height_nm,
                  d.sd_extension_nm, d.channel_doping_cm3, d.sd_doping_cm3,
                  d.dielectric.relative_permittivity, d.dielectric_thickness_nm,
                  static_cast<int>(d.gate.kind), d.gate.workfunction_eV, d.gate.poly_doping_cm3,
                  static_cast<int>(d.gate_coverage), d.effective_width_factor, d.temperature_K,
                  d.channel_material.electron_affinity_eV, d.channel_material.bandgap_eV);
    std::uint64_t h = 1469598103934665603ull;
    for (const char* p = buf; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 1099511628211ull;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

}  // namespace jlfet
