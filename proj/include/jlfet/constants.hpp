#pragma once

// Unit system used throughout: lengths in cm (inputs in nm where suffixed),
// potentials in V, energies in eV, densities in cm^-3, capacitance in F,
// current in A. Mixing metres in breaks everything silently -- don't.

namespace jlfet {

struct PhysicalConstants {
    static constexpr double q = 1.602176634e-19;        // elementary charge [C]
    static constexpr double k_B = 8.617333262e-5;       // Boltzmann constant [eV/K]
    static constexpr double eps_0 = 8.8541878128e-14;   // vacuum permittivity [F/cm]

    // kT in eV equals kT/q in volts, so one function serves both readings.
    static constexpr double thermal_voltage(double temperature_K) {
        return k_B * temperature_K;   // [V]
    }
};

inline constexpr double nm_to_cm = 1e-7;
inline constexpr double cm_to_nm = 1e7;

}  // namespace jlfet
