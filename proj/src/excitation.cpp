#include "emsim/excitation.hpp"

#include <cmath>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"

namespace emsim {

double ExcitationSpec::tau() const {
    check_positive(bandwidth, "excitation bandwidth");
    // Envelope spectrum exp(-2 pi^2 tau^2 df^2) down 40 dB (amplitude 1e-2)
    // at df = bandwidth/2:  tau = sqrt(ln(100) / 2) / (pi * bandwidth/2)
    const double df = 0.5 * bandwidth;
    return std::sqrt(std::log(100.0) / 2.0) / (PhysicalConstants::pi * df);
}

double ExcitationSpec::delay() const { return delay_factor * tau(); }

double ExcitationSpec::value(double t) const {
    check_positive(f_center, "excitation f_center");
    const double tw = tau();
    const double u = t - delay_factor * tw;
    return amplitude * std::exp(-u * u / (2.0 * tw * tw)) *
           std::sin(2.0 * PhysicalConstants::pi * f_center * u);
}

double ExcitationSpec::spectrum_mag(double f) const {
    // FT of gauss*sin: (G(f-fc) - G(f+fc))/2 with G(f) = exp(-2 pi^2 tau^2 f^2)
    const double tw = tau();
    const double k = 2.0 * PhysicalConstants::pi * PhysicalConstants::pi * tw * tw;
    const double lo = f - f_center, hi = f + f_center;
    return 0.5 * std::abs(std::exp(-k * lo * lo) - std::exp(-k * hi * hi));
}

} // namespace emsim
