#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "constants.hpp"

namespace jlfet {

struct MobilityEntry {
    double doping_cm3;   // |net doping| [cm^-3]
    double mu_cm2_Vs;    // electron mobility [cm^2/Vs]
};

struct SemiconductorMaterial {
    std::string name;
    double relative_permittivity = 0;
    double electron_affinity_eV = 0;   // chi
    double bandgap_eV = 0;             // Eg
    double Nc_cm3 = 0;                 // conduction-band effective DOS
    double Nv_cm3 = 0;                 // valence-band effective DOS
    std::vector<MobilityEntry> mobility;   // ascending doping, non-increasing mu

    double intrinsic_density(double temperature_K) const {
        const double kT = PhysicalConstants::thermal_voltage(temperature_K);
        return std::sqrt(Nc_cm3 * Nv_cm3) * std::exp(-bandgap_eV / (2.0 * kT));
    }

    // Piecewise-linear in log10(doping), clamped at the table ends.
    double electron_mobility(double doping_cm3) const {
        if (mobility.empty())
            throw std::logic_error("material '" + name + "' has no mobility table");
        const double N = std::abs(doping_cm3);
        if (N <= mobility.front().doping_cm3) return mobility.front().mu_cm2_Vs;
        if (N >= mobility.back().doping_cm3) return mobility.back().mu_cm2_Vs;
        for (std::size_t k = 1; k < mobility.size(); ++k) {
            if (N <= mobility[k].doping_cm3) {
                const double x0 = std::log10(mobility[k - 1].doping_cm3);
                const double x1 = std::log10(mobility[k].doping_cm3);
                const double t = (std::log10(N) - x0) / (x1 - x0);
                return mobility[k - 1].mu_cm2_Vs +
                       t * (mobility[k].mu_cm2_Vs - mobility[k - 1].mu_cm2_Vs);
            }
        }
        return mobility.back().mu_cm2_Vs;   // unreachable
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> bad;
        if (!(relative_permittivity > 0)) bad.push_back("relative_permittivity must be > 0");
        if (!(bandgap_eV > 0 && bandgap_eV <= 5.0)) bad.push_back("bandgap_eV must be in (0, 5]");
        if (!(electron_affinity_eV >= 2.0 && electron_affinity_eV <= 6.0))
            bad.push_back("electron_affinity_eV must be in [2, 6]");
        if (!(Nc_cm3 > 0) || !(Nv_cm3 > 0)) bad.push_back("effective DOS must be > 0");
        if (mobility.empty()) bad.push_back("mobility table must be non-empty");
        for (std::size_t k = 0; k < mobility.size(); ++k) {
            if (!(mobility[k].doping_cm3 > 0) || !(mobility[k].mu_cm2_Vs > 0)) {
                bad.push_back("mobility entries must be positive");
                break;
            }
            if (k > 0 && mobility[k].doping_cm3 <= mobility[k - 1].doping_cm3) {
                bad.push_back("mobility table doping must be strictly ascending");
                break;
            }
            if (k > 0 && mobility[k].mu_cm2_Vs > mobility[k - 1].mu_cm2_Vs) {
                bad.push_back("mobility must be non-increasing with doping");
                break;
            }
        }
        return bad;
    }
};

inline SemiconductorMaterial silicon() {
    return SemiconductorMaterial{
        "silicon",
        11.7,      // eps_r
        4.05,      // chi [eV]
        1.12,      // Eg [eV]
        2.8e19,    // Nc [cm^-3]
        1.04e19,   // Nv [cm^-3]
        // Heavily-doped n-Si electron mobility, phonon+impurity limited.
        {{1e15, 1350.0},
         {1e16, 1250.0},
         {1e17, 790.0},
         {1e18, 300.0},
         {1e19, 125.0},
         {2e19, 100.0},
         {1e20, 70.0},
         {1e21, 50.0}},
    };
}

struct DielectricMaterial {
    std::string name;
    double relative_permittivity = 0;
};

inline DielectricMaterial hfo2() { return DielectricMaterial{"HfO2", 22.0}; }
inline DielectricMaterial sio2() { return DielectricMaterial{"SiO2", 3.9}; }

enum class GateKind { metal, doped_poly };

struct GateMaterial {
    GateKind kind = GateKind::metal;
    double workfunction_eV = 0;   // metal only
    double poly_doping_cm3 = 0;   // doped_poly only; signed, + donors

    static GateMaterial metal(double phi_m_eV) {
        return GateMaterial{GateKind::metal, phi_m_eV, 0.0};
    }
    static GateMaterial poly(double doping_cm3) {
        return GateMaterial{GateKind::doped_poly, 0.0, doping_cm3};
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> bad;
        if (kind == GateKind::metal) {
            if (!(workfunction_eV >= 3.0 && workfunction_eV <= 6.5))
                bad.push_back("metal workfunction_eV must be in [3.0, 6.5]");
        } else {
            const double N = std::abs(poly_doping_cm3);
            if (!(N >= 1e18 && N <= 1e21))
                bad.push_back("poly |doping| must be in [1e18, 1e21] cm^-3");
        }
        return bad;
    }
};

// Workfunction of a doped semiconductor: chi + (Ec - EF). Fermi level from
// Boltzmann statistics, clamped at the band edge once doping exceeds the DOS.
inline double channel_workfunction(const SemiconductorMaterial& m, double net_doping_cm3,
                                   double temperature_K) {
    if (net_doping_cm3 == 0.0)
        throw std::invalid_argument("channel_workfunction: net doping must be nonzero");
    if (!(temperature_K >= 200.0 && temperature_K <= 500.0))
        throw std::invalid_argument("channel_workfunction: temperature outside [200, 500] K");
    const double kT = PhysicalConstants::thermal_voltage(temperature_K);
    if (net_doping_cm3 > 0) {
        const double ec_ef = std::max(kT * std::log(m.Nc_cm3 / net_doping_cm3), 0.0);
        return m.electron_affinity_eV + ec_ef;
    }
    const double ef_ev = std::max(kT * std::log(m.Nv_cm3 / -net_doping_cm3), 0.0);
    return m.electron_affinity_eV + m.bandgap_eV - ef_ev;
}

enum class ChannelType { n_type, p_type };

enum class GateClass { n_depleting, p_depleting, flat };

inline const char* gate_class_name(GateClass c) {
    switch (c) {
        case GateClass::n_depleting: return "n_depleting";
        case GateClass::p_depleting: return "p_depleting";
        case GateClass::flat: return "flat";
    }
    return "?";
}

struct GateClassification {
    GateClass cls = GateClass::flat;
    double phi_ms_eV = 0;      // phi_m - phi_s
    bool warning = false;      // classification does not deplete the given channel
                               // type: the gate accumulates it (normally-on)
};

// A gate with phi_m > phi_s depletes n-type channels; phi_m < phi_s depletes
// p-type. When the direction doesn't suit the channel at hand the result still
// names what the gate *would* deplete, with the warning flag raised.
inline GateClassification classify_gate(double phi_m_eV, double phi_s_eV,
                                        ChannelType channel) {
    auto in_window = [](double v) { return v >= 3.0 && v <= 6.5; };
    if (!in_window(phi_m_eV) || !in_window(phi_s_eV))
        throw std::invalid_argument("classify_gate: workfunction outside [3.0, 6.5] eV");
    GateClassification c;
    c.phi_ms_eV = phi_m_eV - phi_s_eV;
    if (std::abs(c.phi_ms_eV) < 1e-3) return c;   // flat, no warning
    c.cls = c.phi_ms_eV > 0 ? GateClass::n_depleting : GateClass::p_depleting;
    c.warning = (channel == ChannelType::n_type) != (c.cls == GateClass::n_depleting);
    return c;
}

struct MetalWorkfunction {
    std::string name;
    double phi_m_eV;
};

// Ascending workfunction. Tungsten and nickel are the reference anchors.
inline const std::vector<MetalWorkfunction>& builtin_metal_table() {
    static const std::vector<MetalWorkfunction> table = {
        {"aluminum", 4.28},
        {"titanium", 4.33},
        {"tantalum", 4.45},
        {"chromium", 4.50},
        {"molybdenum", 4.60},
        {"tungsten", 4.63},
        {"copper", 4.65},
        {"titanium_nitride", 4.70},
        {"cobalt", 5.00},
        {"gold", 5.10},
        {"nickel", 5.22},
        {"palladium", 5.40},
        {"platinum", 5.65},
    };
    return table;
}

inline std::optional<double> find_metal(const std::string& name) {
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    for (const auto& m : builtin_metal_table())
        if (m.name == key) return m.phi_m_eV;
    return std::nullopt;
}

}  // namespace jlfet
