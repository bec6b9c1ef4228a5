#include "emsim/cavity_model.hpp"

#include <cmath>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"

namespace emsim::cavity {

namespace {

constexpr double kTM11 = 1.8412;    // first zero of J1'
constexpr double kFringe = 1.7726;  // constant in the fringing log term

void check_substrate(double eps_r, double height_m) {
    if (eps_r < 1.0) throw InvalidArgument("cavity: eps_r must be >= 1");
    check_positive(height_m, "substrate height");
}

// Fringing factor sqrt(1 + 2h/(pi*eps*a) * (ln(pi*a/(2h)) + 1.7726)),
// evaluated with a and h in the same unit.
double fringing_factor(double a, double eps_r, double h) {
    return std::sqrt(1.0 + 2.0 * h / (PhysicalConstants::pi * eps_r * a) *
                               (std::log(PhysicalConstants::pi * a / (2.0 * h)) + kFringe));
}

} // namespace

double effective_permittivity(const std::vector<Layer>& layers) {
    if (layers.empty()) throw InvalidArgument("effective_permittivity: no layers");
    double h = 0.0, hc = 0.0;
    for (const auto& l : layers) {
        check_positive(l.height_m, "layer height");
        if (l.eps_r < 1.0) throw InvalidArgument("effective_permittivity: eps_r must be >= 1");
        h += l.height_m;
        hc += l.height_m / l.eps_r;
    }
    return h / hc;
}

double total_height(const std::vector<Layer>& layers) {
    double h = 0.0;
    for (const auto& l : layers) h += l.height_m;
    return h;
}

double patch_radius_for_frequency(double f_hz, double eps_r, double height_m) {
    check_positive(f_hz, "frequency");
    check_substrate(eps_r, height_m);
    // Design equation works in cm with F = 8.791e9 / (f * sqrt(eps_r)).
    const double h_cm = height_m * 100.0;
    const double F = 8.791e9 / (f_hz * std::sqrt(eps_r));
    const double a_cm = F / fringing_factor(F, eps_r, h_cm);
    return a_cm / 100.0;
}

double effective_radius(double radius_m, double eps_r, double height_m) {
    check_positive(radius_m, "patch radius");
    check_substrate(eps_r, height_m);
    return radius_m * fringing_factor(radius_m, eps_r, height_m);
}

double resonant_frequency(double radius_m, double eps_r, double height_m) {
    const double a_e = effective_radius(radius_m, eps_r, height_m);
    return kTM11 * PhysicalConstants::c /
           (2.0 * PhysicalConstants::pi * a_e * std::sqrt(eps_r));
}

} // namespace emsim::cavity
