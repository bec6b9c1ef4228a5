#include <cmath>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"
#include "emsim/post.hpp"

namespace emsim {

namespace {

double cell_size(const GridSpec& g, int axis) {
    return axis == 0 ? g.dx : axis == 1 ? g.dy : g.dz;
}

double origin_of(const GridSpec& g, int axis) {
    return axis == 0 ? g.origin.x : axis == 1 ? g.origin.y : g.origin.z;
}

} // namespace

FarField::FarField(const SurfacePhasors& surf, const GridSpec& grid) {
    if (!(surf.frequency > 0.0)) throw InvalidArgument("far field: frequency must be > 0");
    if (surf.faces.size() != 6) throw InvalidArgument("far field: surface must have six faces");
    freq_ = surf.frequency;
    k_ = 2.0 * PhysicalConstants::pi * freq_ / PhysicalConstants::c;

    // Phase-reference the moments to the box center.
    double center[3];
    for (int w = 0; w < 3; ++w) {
        const double lo = origin_of(grid, w) + static_cast<double>(surf.box[2 * w]) * cell_size(grid, w);
        const double hi = origin_of(grid, w) + static_cast<double>(surf.box[2 * w + 1]) * cell_size(grid, w);
        center[w] = 0.5 * (lo + hi);
    }

    for (const auto& fc : surf.faces) {
        const int w = fc.axis, u = (w + 1) % 3, v = (w + 2) % 3;
        const double du = cell_size(grid, u), dv = cell_size(grid, v);
        const double dA = du * dv;
        const double sgn = fc.positive ? 1.0 : -1.0;  // outward normal = sgn * unit(w)
        const double plane_coord =
            origin_of(grid, w) + static_cast<double>(fc.plane) * cell_size(grid, w);
        const std::size_t lo_u = surf.box[2 * u], lo_v = surf.box[2 * v];

        for (std::size_t vv = 0; vv < fc.nv; ++vv) {
            for (std::size_t uu = 0; uu < fc.nu; ++uu) {
                const std::size_t s = uu + fc.nu * vv;
                Source src;
                double pos[3];
                pos[w] = plane_coord;
                pos[u] = origin_of(grid, u) + (static_cast<double>(lo_u + uu) + 0.5) * du;
                pos[v] = origin_of(grid, v) + (static_cast<double>(lo_v + vv) + 0.5) * dv;
                src.x = pos[0] - center[0];
                src.y = pos[1] - center[1];
                src.z = pos[2] - center[2];

                std::complex<double> e[3], h[3];
                for (int c = 0; c < 3; ++c) {
                    e[c] = std::complex<double>(fc.e[c][s].real(), fc.e[c][s].imag());
                    h[c] = std::complex<double>(fc.h[c][s].real(), fc.h[c][s].imag());
                }
                // J = n x H, M = -n x E with n = sgn * unit(w):
                //   (n x A)_u = -sgn * A_v,  (n x A)_v = sgn * A_u.
                src.j[w] = 0.0;
                src.j[u] = -sgn * h[v] * dA;
                src.j[v] = sgn * h[u] * dA;
                src.m[w] = 0.0;
                src.m[u] = sgn * e[v] * dA;
                src.m[v] = -sgn * e[u] * dA;
                srcs_.push_back(src);
            }
        }
    }
    if (srcs_.empty()) throw InvalidArgument("far field: surface has no samples");
}

double FarField::intensity(double theta, double phi) const {
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double rhat[3] = {st * cp, st * sp, ct};
    const double that[3] = {ct * cp, ct * sp, -st};
    const double phat[3] = {-sp, cp, 0.0};

    std::complex<double> n_t{0.0, 0.0}, n_p{0.0, 0.0}, l_t{0.0, 0.0}, l_p{0.0, 0.0};
    for (const auto& s : srcs_) {
        const double ph = k_ * (s.x * rhat[0] + s.y * rhat[1] + s.z * rhat[2]);
        const std::complex<double> fac(std::cos(ph), std::sin(ph));
        std::complex<double> jt{0.0, 0.0}, jp{0.0, 0.0}, mt{0.0, 0.0}, mp{0.0, 0.0};
        for (int c = 0; c < 3; ++c) {
            jt += s.j[c] * that[c];
            jp += s.j[c] * phat[c];
            mt += s.m[c] * that[c];
            mp += s.m[c] * phat[c];
        }
        n_t += jt * fac;
        n_p += jp * fac;
        l_t += mt * fac;
        l_p += mp * fac;
    }
    const double a = std::abs(l_p + PhysicalConstants::eta0 * n_t);
    const double b = std::abs(l_t - PhysicalConstants::eta0 * n_p);
    return k_ * k_ / (32.0 * PhysicalConstants::pi * PhysicalConstants::pi * PhysicalConstants::eta0) *
           (a * a + b * b);
}

double FarField::radiated_power() const {
    if (p_rad_ >= 0.0) return p_rad_;
    // Midpoint rule on a 4-degree sphere mesh; plenty for low-order patterns.
    const int n_theta = 45, n_phi = 90;
    const double dth = PhysicalConstants::pi / n_theta;
    const double dph = 2.0 * PhysicalConstants::pi / n_phi;
    double acc = 0.0;
    for (int it = 0; it < n_theta; ++it) {
        const double theta = (it + 0.5) * dth;
        double ring = 0.0;
        for (int ip = 0; ip < n_phi; ++ip) ring += intensity(theta, (ip + 0.5) * dph);
        acc += ring * std::sin(theta);
    }
    p_rad_ = acc * dth * dph;
    return p_rad_;
}

double FarField::directivity_dbi(double theta, double phi) const {
    const double p = radiated_power();
    if (!(p > 0.0)) throw PostProcessError("far field: no radiated power on the surface");
    const double d = 4.0 * PhysicalConstants::pi * intensity(theta, phi) / p;
    return 10.0 * std::log10(std::max(d, 1e-30));
}

double FarField::gain_dbi(double theta, double phi, double p_accepted) const {
    if (!(p_accepted > 0.0))
        throw PostProcessError("far field: accepted power must be positive");
    const double g = 4.0 * PhysicalConstants::pi * intensity(theta, phi) / p_accepted;
    return 10.0 * std::log10(std::max(g, 1e-30));
}

std::vector<FarField::CutPoint> FarField::vertical_cut(double step_deg) const {
    check_positive(step_deg, "cut step");
    // Signed elevation sweep: angle a in [-180, 180) maps to theta = |a| with
    // phi = 0 for a >= 0 and phi = 180 deg for a < 0 (a full great circle).
    std::vector<CutPoint> out;
    const double rad = PhysicalConstants::pi / 180.0;
    for (double a = -180.0; a < 180.0 - 1e-9; a += step_deg) {
        const double theta = std::abs(a) * rad;
        const double phi = a >= 0.0 ? 0.0 : PhysicalConstants::pi;
        out.push_back({a, directivity_dbi(theta, phi)});
    }
    return out;
}

std::vector<FarField::CutPoint> FarField::horizontal_cut(double step_deg) const {
    check_positive(step_deg, "cut step");
    std::vector<CutPoint> out;
    const double rad = PhysicalConstants::pi / 180.0;
    for (double a = 0.0; a < 360.0 - 1e-9; a += step_deg)
        out.push_back({a, directivity_dbi(0.5 * PhysicalConstants::pi, a * rad)});
    return out;
}

double surface_power(const SurfacePhasors& surf, const GridSpec& grid) {
    if (surf.faces.size() != 6) throw InvalidArgument("surface_power: surface must have six faces");
    double total = 0.0;
    for (const auto& fc : surf.faces) {
        const int w = fc.axis, u = (w + 1) % 3, v = (w + 2) % 3;
        const double dA = cell_size(grid, u) * cell_size(grid, v);
        const double sgn = fc.positive ? 1.0 : -1.0;
        double acc = 0.0;
        for (std::size_t s = 0; s < fc.nu * fc.nv; ++s) {
            const std::complex<double> eu(fc.e[u][s].real(), fc.e[u][s].imag());
            const std::complex<double> ev(fc.e[v][s].real(), fc.e[v][s].imag());
            const std::complex<double> hu(fc.h[u][s].real(), fc.h[u][s].imag());
            const std::complex<double> hv(fc.h[v][s].real(), fc.h[v][s].imag());
            // (E x H*) . unit(w) = E_u H_v* - E_v H_u*
            acc += (eu * std::conj(hv) - ev * std::conj(hu)).real();
        }
        total += 0.5 * sgn * acc * dA;
    }
    return total;
}

} // namespace emsim
