#pragma once

#include <vector>

namespace emsim::cavity {

// Single dielectric layer of a patch substrate stack.
struct Layer {
    double height_m;
    double eps_r;
};

// Series-capacitor combination of stacked layers:
//   eps_eff = sum(h_i) / sum(h_i / eps_i)
double effective_permittivity(const std::vector<Layer>& layers);
double total_height(const std::vector<Layer>& layers);

// Circular microstrip patch, dominant TM11 cavity mode.  All arguments SI.
//
// Physical radius needed to resonate at f_hz on a substrate of permittivity
// eps_r and height height_m, including the logarithmic fringing correction
// (the correction term uses the first-pass radius F = 8.791e9/(f*sqrt(eps_r))
// in cm, per the standard design equation).
double patch_radius_for_frequency(double f_hz, double eps_r, double height_m);

// Fringing-extended effective radius of a patch of physical radius radius_m.
double effective_radius(double radius_m, double eps_r, double height_m);

// TM11 resonant frequency of a patch of physical radius radius_m:
//   f = 1.8412 * c / (2*pi*a_e*sqrt(eps_r))
double resonant_frequency(double radius_m, double eps_r, double height_m);

} // namespace emsim::cavity
