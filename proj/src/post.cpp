#include "emsim/post.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"

namespace emsim {

namespace {

std::complex<double> series_dft(const std::vector<double>& v, double dt, double t0, double f) {
    std::complex<double> acc{0.0, 0.0};
    const double w = -2.0 * PhysicalConstants::pi * f;
    for (std::size_t n = 0; n < v.size(); ++n) {
        const double ph = w * (t0 + static_cast<double>(n) * dt);
        acc += v[n] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    return acc * dt;
}

} // namespace

PortSpectrum port_spectra(const TimeSeriesRecord& rec, const ExcitationSpec& drive,
                          double z_ref, const std::vector<double>& freqs) {
    if (rec.v_port.empty() || rec.i_port.empty())
        throw PostProcessError("port_spectra: record carries no port samples");
    if (!(z_ref > 0.0)) throw InvalidArgument("port_spectra: z_ref must be > 0");

    // -40 dB relative to the carrier, with a whisker of slack so that band
    // edges sitting exactly on the support limit are still admitted.
    const double support = 0.99e-2 * drive.spectrum_mag(drive.f_center);
    PortSpectrum ps;
    ps.z_ref = z_ref;
    ps.freqs = freqs;
    for (double f : freqs) {
        if (!(f > 0.0)) throw InvalidArgument("port_spectra: frequencies must be > 0");
        if (drive.spectrum_mag(f) < support)
            throw PostProcessError("port_spectra: " + std::to_string(f / 1e9) +
                                   " GHz lies outside the drive's usable band");

        const std::complex<double> v = series_dft(rec.v_port, rec.dt, rec.t_first_v, f);
        const std::complex<double> i = series_dft(rec.i_port, rec.dt, rec.t_first_i, f);
        ps.v.push_back(v);
        ps.i.push_back(i);

        ps.z.push_back(std::abs(i) > 0.0
                           ? v / i
                           : std::complex<double>(std::numeric_limits<double>::infinity(), 0.0));

        // Gamma = (Z - z0)/(Z + z0) written V/I-free so an open port is a
        // clean +1 instead of a division blow-up.
        const std::complex<double> num = v - z_ref * i;
        const std::complex<double> den = v + z_ref * i;
        const std::complex<double> gamma =
            std::abs(den) > 0.0 ? num / den : std::complex<double>(1.0, 0.0);
        ps.s11.push_back(gamma);
        const double mag = std::abs(gamma);
        ps.s11_db.push_back(mag > 1e-4 ? 20.0 * std::log10(mag) : -80.0);

        ps.p_accepted.push_back(0.5 * (v * std::conj(i)).real());
    }
    return ps;
}

std::vector<Resonance> find_resonances(const std::vector<double>& freqs,
                                       const std::vector<double>& s11_db, double threshold_db) {
    if (freqs.size() != s11_db.size())
        throw InvalidArgument("find_resonances: frequency/value size mismatch");
    for (std::size_t n = 1; n < freqs.size(); ++n)
        if (!(freqs[n] > freqs[n - 1]))
            throw InvalidArgument("find_resonances: frequencies must be strictly increasing");

    std::vector<Resonance> out;
    if (freqs.size() < 3) return out;

    for (std::size_t m = 1; m + 1 < freqs.size(); ++m) {
        const double y = s11_db[m];
        if (y > threshold_db) continue;
        // A flat-bottomed dip counts once, at its last sample.
        if (!(y <= s11_db[m - 1] && y < s11_db[m + 1])) continue;

        Resonance r;
        r.s11_db = y;

        // Parabolic vertex through the three samples around the minimum.
        const double x1 = freqs[m - 1], x2 = freqs[m], x3 = freqs[m + 1];
        const double y1 = s11_db[m - 1], y3 = s11_db[m + 1];
        const double a = (x2 - x1) * (y - y3);
        const double b = (x2 - x3) * (y - y1);
        const double den = a - b;
        r.f_res = std::abs(den) > 0.0
                      ? std::clamp(x2 - 0.5 * ((x2 - x1) * a - (x2 - x3) * b) / den, x1, x3)
                      : x2;

        // Band edges: nearest threshold crossings on either side.
        r.f_lo = freqs.front();
        for (std::size_t n = m; n-- > 0;) {
            if (s11_db[n] > threshold_db) {
                const double t = (threshold_db - s11_db[n]) / (s11_db[n + 1] - s11_db[n]);
                r.f_lo = freqs[n] + t * (freqs[n + 1] - freqs[n]);
                break;
            }
        }
        r.f_hi = freqs.back();
        for (std::size_t n = m + 1; n < freqs.size(); ++n) {
            if (s11_db[n] > threshold_db) {
                const double t = (threshold_db - s11_db[n - 1]) / (s11_db[n] - s11_db[n - 1]);
                r.f_hi = freqs[n - 1] + t * (freqs[n] - freqs[n - 1]);
                break;
            }
        }
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// SAR
// ---------------------------------------------------------------------------

SarField point_sar(const VolumePhasors& vol, const MaterialGrid& mg) {
    const std::size_t i0 = vol.box[0], i1 = vol.box[1];
    const std::size_t j0 = vol.box[2], j1 = vol.box[3];
    const std::size_t k0 = vol.box[4], k1 = vol.box[5];
    if (i1 >= mg.grid.nx || j1 >= mg.grid.ny || k1 >= mg.grid.nz)
        throw InvalidArgument("point_sar: phasor box exceeds the material grid");
    const std::size_t bi = i1 - i0 + 1, bj = j1 - j0 + 1, bk = k1 - k0 + 1;
    if (vol.ex.nx() != bi + 1 || vol.ex.ny() != bj + 1 || vol.ex.nz() != bk + 1)
        throw InvalidArgument("point_sar: phasor arrays do not match the box");

    SarField out;
    out.box = vol.box;
    out.point.resize(bi, bj, bk, 0.0f);

    const auto sq = [](const std::complex<float>& z) {
        return static_cast<double>(z.real()) * z.real() + static_cast<double>(z.imag()) * z.imag();
    };

    for (std::size_t ck = 0; ck < bk; ++ck) {
        for (std::size_t cj = 0; cj < bj; ++cj) {
            for (std::size_t ci = 0; ci < bi; ++ci) {
                const std::size_t gi = i0 + ci, gj = j0 + cj, gk = k0 + ck;
                if (!mg.tissue(gi, gj, gk)) continue;
                const double rho = mg.rho(gi, gj, gk);
                if (!(rho > 0.0)) continue;

                // |E|^2 at the cell center: each component is the mean of its
                // four parallel edges, |.|^2 of the mean.
                const std::complex<float> ex =
                    0.25f * (vol.ex(ci, cj, ck) + vol.ex(ci, cj + 1, ck) +
                             vol.ex(ci, cj, ck + 1) + vol.ex(ci, cj + 1, ck + 1));
                const std::complex<float> ey =
                    0.25f * (vol.ey(ci, cj, ck) + vol.ey(ci + 1, cj, ck) +
                             vol.ey(ci, cj, ck + 1) + vol.ey(ci + 1, cj, ck + 1));
                const std::complex<float> ez =
                    0.25f * (vol.ez(ci, cj, ck) + vol.ez(ci + 1, cj, ck) +
                             vol.ez(ci, cj + 1, ck) + vol.ez(ci + 1, cj + 1, ck));
                const double e2 = sq(ex) + sq(ey) + sq(ez);
                const double sigma = mg.sigma(gi, gj, gk);
                out.point(ci, cj, ck) = static_cast<float>(sigma * e2 / (2.0 * rho));
            }
        }
    }
    return out;
}

namespace {

// Inclusive-prefix volume table: sums over [0..i) x [0..j) x [0..k).
struct PrefixSum {
    std::size_t nx, ny, nz;
    std::vector<double> s;  // (nx+1)*(ny+1)*(nz+1)

    explicit PrefixSum(const Array3D<float>& a)
        : nx(a.nx()), ny(a.ny()), nz(a.nz()), s((nx + 1) * (ny + 1) * (nz + 1), 0.0) {
        for (std::size_t k = 0; k < nz; ++k)
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    at(i + 1, j + 1, k + 1) = static_cast<double>(a(i, j, k)) +
                                              at(i, j + 1, k + 1) + at(i + 1, j, k + 1) +
                                              at(i + 1, j + 1, k) - at(i, j, k + 1) -
                                              at(i, j + 1, k) - at(i + 1, j, k) + at(i, j, k);
                }
    }

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return s[i + (nx + 1) * (j + (ny + 1) * k)];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return s[i + (nx + 1) * (j + (ny + 1) * k)];
    }
    // Sum over cells [i0..i1] x [j0..j1] x [k0..k1], inclusive.
    double box(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1, std::size_t k0,
               std::size_t k1) const {
        ++i1, ++j1, ++k1;
        return at(i1, j1, k1) - at(i0, j1, k1) - at(i1, j0, k1) - at(i1, j1, k0) +
               at(i0, j0, k1) + at(i0, j1, k0) + at(i1, j0, k0) - at(i0, j0, k0);
    }
};

} // namespace

AveragedSar averaged_sar(const SarField& field, const MaterialGrid& mg, double target_mass_kg) {
    check_positive(target_mass_kg, "target mass");
    const std::size_t i0 = field.box[0], j0 = field.box[2], k0 = field.box[4];
    const std::size_t bi = field.point.nx(), bj = field.point.ny(), bk = field.point.nz();
    const double cell_vol = mg.grid.dx * mg.grid.dy * mg.grid.dz;

    // Local tissue-mass and absorbed-power-per-cell tables.
    Array3D<float> mass(bi, bj, bk, 0.0f);
    Array3D<float> power(bi, bj, bk, 0.0f);
    for (std::size_t ck = 0; ck < bk; ++ck)
        for (std::size_t cj = 0; cj < bj; ++cj)
            for (std::size_t ci = 0; ci < bi; ++ci) {
                const std::size_t gi = i0 + ci, gj = j0 + cj, gk = k0 + ck;
                if (!mg.tissue(gi, gj, gk)) continue;
                const float m = static_cast<float>(mg.rho(gi, gj, gk) * cell_vol);
                mass(ci, cj, ck) = m;
                power(ci, cj, ck) = field.point(ci, cj, ck) * m;  // W in this cell
            }
    const PrefixSum mass_sum(mass);
    const PrefixSum power_sum(power);

    const std::size_t side_max = std::min({bi, bj, bk});
    AveragedSar best;
    for (std::size_t ck = 0; ck < bk; ++ck) {
        for (std::size_t cj = 0; cj < bj; ++cj) {
            for (std::size_t ci = 0; ci < bi; ++ci) {
                if (mass(ci, cj, ck) <= 0.0f) continue;
                // Smallest odd cube inside the box with enough tissue mass.
                for (std::size_t s = 1; s <= side_max; s += 2) {
                    const std::size_t h = (s - 1) / 2;
                    if (ci < h || cj < h || ck < h) break;
                    if (ci + h >= bi || cj + h >= bj || ck + h >= bk) break;
                    const double m = mass_sum.box(ci - h, ci + h, cj - h, cj + h, ck - h, ck + h);
                    if (m < target_mass_kg) continue;
                    const double p = power_sum.box(ci - h, ci + h, cj - h, cj + h, ck - h, ck + h);
                    const double sar = p / m;
                    if (!best.found || sar > best.sar) {
                        best.found = true;
                        best.sar = sar;
                        best.i = i0 + ci;
                        best.j = j0 + cj;
                        best.k = k0 + ck;
                        best.cube_cells = s;
                        best.mass_kg = m;
                    }
                    break;
                }
            }
        }
    }
    return best;
}

SarReport sar_report(const VolumePhasors& vol, const MaterialGrid& mg, double p_accepted_w) {
    if (!(p_accepted_w > 0.0) || !std::isfinite(p_accepted_w))
        throw PostProcessError("sar_report: accepted power must be positive and finite");

    const SarField field = point_sar(vol, mg);
    SarReport rep;
    rep.p_accepted_w = p_accepted_w;

    const std::size_t i0 = field.box[0], j0 = field.box[2], k0 = field.box[4];
    float peak = 0.0f;
    for (std::size_t ck = 0; ck < field.point.nz(); ++ck)
        for (std::size_t cj = 0; cj < field.point.ny(); ++cj)
            for (std::size_t ci = 0; ci < field.point.nx(); ++ci)
                if (field.point(ci, cj, ck) > peak) {
                    peak = field.point(ci, cj, ck);
                    rep.peak_i = i0 + ci;
                    rep.peak_j = j0 + cj;
                    rep.peak_k = k0 + ck;
                }
    rep.peak_point = static_cast<double>(peak) / p_accepted_w;

    rep.sar_1g = averaged_sar(field, mg, 1.0e-3);
    rep.sar_10g = averaged_sar(field, mg, 10.0e-3);
    rep.sar_1g.sar /= p_accepted_w;
    rep.sar_10g.sar /= p_accepted_w;
    rep.pass_1g = rep.sar_1g.found && rep.sar_1g.sar <= kSarLimit1g;
    rep.pass_10g = rep.sar_10g.found && rep.sar_10g.sar <= kSarLimit10g;
    return rep;
}

} // namespace emsim
