#pragma once

namespace emsim {

// Free-space physical constants (SI).
struct PhysicalConstants {
    static constexpr double c    = 2.99792458e8;       // speed of light, m/s
    static constexpr double eps0 = 8.8541878128e-12;   // vacuum permittivity, F/m
    static constexpr double mu0  = 1.25663706212e-6;   // vacuum permeability, H/m (4*pi*1e-7)
    static constexpr double eta0 = 376.730313668;      // free-space impedance, Ohm
    static constexpr double pi   = 3.14159265358979323846;
};

} // namespace emsim
