#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "emsim/constants.hpp"
#include "emsim/errors.hpp"
#include "emsim/post.hpp"

using namespace emsim;

namespace {

using cplx = std::complex<double>;

// Port record carrying pure tones: v(t) = Re(vhat e^{jwt}) sampled at the
// solver's staggered V/I timestamps.  With an integer number of periods in
// the window the DFT recovers vhat * (N*dt/2) exactly.
TimeSeriesRecord tone_record(cplx vhat, cplx ihat, double f0, double dt, std::size_t n) {
    TimeSeriesRecord rec;
    rec.dt = dt;
    rec.steps = n;
    rec.t_first_v = dt;
    rec.t_first_i = 0.5 * dt;
    const double w = 2.0 * PhysicalConstants::pi * f0;
    for (std::size_t s = 0; s < n; ++s) {
        const double tv = rec.t_first_v + static_cast<double>(s) * dt;
        const double ti = rec.t_first_i + static_cast<double>(s) * dt;
        rec.v_port.push_back((vhat * std::exp(cplx(0.0, w * tv))).real());
        rec.i_port.push_back((ihat * std::exp(cplx(0.0, w * ti))).real());
    }
    return rec;
}

ExcitationSpec band_drive(double f_center, double bandwidth) {
    ExcitationSpec d;
    d.f_center = f_center;
    d.bandwidth = bandwidth;
    return d;
}

MaterialGrid tissue_block(std::size_t n, double cell, float eps, float sig, float rho) {
    MaterialGrid mg;
    mg.grid.dx = mg.grid.dy = mg.grid.dz = cell;
    mg.grid.nx = mg.grid.ny = mg.grid.nz = n;
    mg.grid.origin = {0.0, 0.0, 0.0};
    mg.grid.pml_cells = 0;
    mg.eps_r.resize(n, n, n, eps);
    mg.sigma.resize(n, n, n, sig);
    mg.rho.resize(n, n, n, rho);
    mg.flags.resize(n, n, n, MaterialGrid::kTissue);
    mg.sheets.x.resize(n + 1, n, n, 0);
    mg.sheets.y.resize(n, n + 1, n, 0);
    mg.sheets.z.resize(n, n, n + 1, 0);
    return mg;
}

VolumePhasors uniform_ex_phasors(const std::array<std::size_t, 6>& box, double f, float e_mag) {
    VolumePhasors vp;
    vp.frequency = f;
    vp.box = box;
    const std::size_t bx = box[1] - box[0] + 2;
    const std::size_t by = box[3] - box[2] + 2;
    const std::size_t bz = box[5] - box[4] + 2;
    vp.ex.resize(bx, by, bz, std::complex<float>(e_mag, 0.0f));
    vp.ey.resize(bx, by, bz);
    vp.ez.resize(bx, by, bz);
    return vp;
}

} // namespace

TEST_CASE("port spectra recover an exact synthetic tone") {
    // 100 samples per period, 20 whole periods: the image tone at 2*f0 sums
    // to exactly zero, so the DFT density equals vhat*(N*dt/2).
    const double f0 = 1.0e9, dt = 1.0e-11;
    const std::size_t n = 2000;
    const cplx vhat(3.0, 4.0), ihat(0.1, -0.05);
    const TimeSeriesRecord rec = tone_record(vhat, ihat, f0, dt, n);

    const PortSpectrum ps = port_spectra(rec, band_drive(f0, 2.0e9), 50.0, {f0});
    REQUIRE(ps.freqs.size() == 1);

    const double scale = 0.5 * static_cast<double>(n) * dt;
    CHECK(std::abs(ps.v[0] - vhat * scale) < 1e-9 * std::abs(vhat) * scale);
    CHECK(std::abs(ps.i[0] - ihat * scale) < 1e-9 * std::abs(ihat) * scale);

    const cplx z_expect = vhat / ihat;  // 8 + 44j
    CHECK(ps.z[0].real() == doctest::Approx(z_expect.real()).epsilon(1e-9));
    CHECK(ps.z[0].imag() == doctest::Approx(z_expect.imag()).epsilon(1e-9));

    const cplx gamma_expect = (z_expect - 50.0) / (z_expect + 50.0);
    CHECK(std::abs(ps.s11[0] - gamma_expect) < 1e-9);
    CHECK(ps.s11_db[0] ==
          doctest::Approx(20.0 * std::log10(std::abs(gamma_expect))).epsilon(1e-9));

    // Accepted power density at the drive scale.
    const double p_expect = 0.5 * (vhat * scale * std::conj(ihat * scale)).real();
    CHECK(ps.p_accepted[0] == doctest::Approx(p_expect).epsilon(1e-9));
    CHECK(ps.z_ref == 50.0);
}

TEST_CASE("reference loads map to the expected reflection depths") {
    const double f0 = 1.0e9, dt = 1.0e-11;
    const std::size_t n = 2000;

    SUBCASE("2:1 mismatch (100 ohm against 50) is -9.54 dB") {
        const TimeSeriesRecord rec = tone_record(cplx(2.0, 0.0), cplx(0.02, 0.0), f0, dt, n);
        const PortSpectrum ps = port_spectra(rec, band_drive(f0, 2.0e9), 50.0, {f0});
        CHECK(ps.s11_db[0] == doctest::Approx(-9.5424).epsilon(1e-4));
    }
    SUBCASE("matched load hits the -80 dB floor") {
        const TimeSeriesRecord rec = tone_record(cplx(1.0, 0.0), cplx(0.02, 0.0), f0, dt, n);
        const PortSpectrum ps = port_spectra(rec, band_drive(f0, 2.0e9), 50.0, {f0});
        CHECK(ps.s11_db[0] == -80.0);
    }
    SUBCASE("open port reflects +1 without dividing by zero") {
        TimeSeriesRecord rec = tone_record(cplx(1.0, 0.0), cplx(1.0, 0.0), f0, dt, n);
        std::fill(rec.i_port.begin(), rec.i_port.end(), 0.0);
        const PortSpectrum ps = port_spectra(rec, band_drive(f0, 2.0e9), 50.0, {f0});
        CHECK(std::isinf(ps.z[0].real()));
        CHECK(std::abs(ps.s11[0] - cplx(1.0, 0.0)) < 1e-9);
        CHECK(ps.s11_db[0] == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("shorted port reflects -1") {
        TimeSeriesRecord rec = tone_record(cplx(1.0, 0.0), cplx(0.02, 0.0), f0, dt, n);
        std::fill(rec.v_port.begin(), rec.v_port.end(), 0.0);
        const PortSpectrum ps = port_spectra(rec, band_drive(f0, 2.0e9), 50.0, {f0});
        CHECK(std::abs(ps.s11[0] - cplx(-1.0, 0.0)) < 1e-9);
    }
}

TEST_CASE("port spectra validate their inputs") {
    const TimeSeriesRecord rec = tone_record(cplx(1.0, 0.0), cplx(0.02, 0.0), 1.0e9, 1e-11, 2000);
    const ExcitationSpec drive = band_drive(2.45e9, 1.0e9);

    // 5 GHz is ~40+ dB down on a 2.45 +- 0.5 GHz pulse.
    CHECK_THROWS_AS((void)port_spectra(rec, drive, 50.0, {5.0e9}), PostProcessError);
    CHECK_THROWS_AS((void)port_spectra(rec, drive, 50.0, {-1.0e9}), InvalidArgument);
    CHECK_THROWS_AS((void)port_spectra(rec, drive, 0.0, {2.45e9}), InvalidArgument);
    CHECK_THROWS_AS((void)port_spectra(TimeSeriesRecord{}, drive, 50.0, {2.45e9}),
                    PostProcessError);
}

TEST_CASE("resonance finder locates dips, depths, and band edges") {
    // Two gaussian dips: -16 dB at 2.45 GHz (half-width 0.35) and -14 dB at
    // 5.6 GHz (half-width 0.5), on a 50 MHz scan from 1 to 8 GHz.
    std::vector<double> freqs, db;
    for (int i = 0; i <= 140; ++i) {
        const double f = 1.0 + 0.05 * i;  // GHz
        const double d1 = (f - 2.45) / 0.35, d2 = (f - 5.6) / 0.5;
        freqs.push_back(f * 1e9);
        db.push_back(-16.0 * std::exp(-d1 * d1) - 14.0 * std::exp(-d2 * d2));
    }

    const auto res = find_resonances(freqs, db, -10.0);
    REQUIRE(res.size() == 2);

    CHECK(res[0].f_res == doctest::Approx(2.45e9).epsilon(1e-3));
    CHECK(res[0].s11_db == doctest::Approx(-16.0).epsilon(1e-6));
    // -10 dB crossings of the first dip: 2.45 +- 0.35*sqrt(ln 1.6).
    const double hw1 = 0.35 * std::sqrt(std::log(1.6));
    CHECK(res[0].f_lo == doctest::Approx((2.45 - hw1) * 1e9).epsilon(3e-3));
    CHECK(res[0].f_hi == doctest::Approx((2.45 + hw1) * 1e9).epsilon(3e-3));

    CHECK(res[1].f_res == doctest::Approx(5.6e9).epsilon(1e-3));
    CHECK(res[1].s11_db == doctest::Approx(-14.0).epsilon(1e-6));
    const double hw2 = 0.5 * std::sqrt(std::log(1.4));
    CHECK(res[1].f_lo == doctest::Approx((5.6 - hw2) * 1e9).epsilon(3e-3));
    CHECK(res[1].f_hi == doctest::Approx((5.6 + hw2) * 1e9).epsilon(3e-3));

    SUBCASE("a stricter threshold can empty the list") {
        CHECK(find_resonances(freqs, db, -20.0).empty());
    }
    SUBCASE("unbracketed band edges clamp to the scan range") {
        // Truncate the scan inside the first dip's -10 dB band.
        std::vector<double> f2(freqs.begin() + 26, freqs.begin() + 36);  // 2.30..2.75 GHz
        std::vector<double> d2(db.begin() + 26, db.begin() + 36);
        const auto r2 = find_resonances(f2, d2, -10.0);
        REQUIRE(r2.size() == 1);
        CHECK(r2[0].f_lo == f2.front());
        CHECK(r2[0].f_hi == doctest::Approx((2.45 + hw1) * 1e9).epsilon(3e-3));
    }
    SUBCASE("malformed scans are rejected") {
        std::vector<double> bad = freqs;
        bad[5] = bad[4];
        CHECK_THROWS_AS((void)find_resonances(bad, db, -10.0), InvalidArgument);
        CHECK_THROWS_AS((void)find_resonances(freqs, {0.0, -1.0}, -10.0), InvalidArgument);
        CHECK(find_resonances({1e9, 2e9}, {0.0, -20.0}, -10.0).empty());
    }
}

TEST_CASE("uniform phasor field gives the closed-form point SAR") {
    // Muscle block in a 100 V/m x-polarized field:
    // SAR = sigma |E|^2 / (2 rho) = 1.95 * 1e4 / (2 * 1090) = 8.944954 W/kg.
    const MaterialGrid mg = tissue_block(15, 1.0e-3, 52.7f, 1.95f, 1090.0f);
    const std::array<std::size_t, 6> box{2, 12, 2, 12, 2, 12};
    const VolumePhasors vp = uniform_ex_phasors(box, 2.45e9, 100.0f);

    const SarField field = point_sar(vp, mg);
    REQUIRE(field.point.nx() == 11);
    REQUIRE(field.point.ny() == 11);
    REQUIRE(field.point.nz() == 11);
    for (std::size_t k = 0; k < 11; ++k)
        for (std::size_t j = 0; j < 11; ++j)
            for (std::size_t i = 0; i < 11; ++i)
                CHECK(field.point(i, j, k) == doctest::Approx(8.944954).epsilon(1e-5));

    SUBCASE("1 g average needs an 11-cell cube of 1 mm muscle voxels") {
        // One cell holds 1.09e-6 kg; 917.4 cells reach a gram, so the
        // smallest odd cube is 11^3, which only fits centered in the box.
        const AveragedSar avg = averaged_sar(field, mg, 1.0e-3);
        REQUIRE(avg.found);
        CHECK(avg.cube_cells == 11);
        CHECK(avg.i == 7);
        CHECK(avg.j == 7);
        CHECK(avg.k == 7);
        CHECK(avg.sar == doctest::Approx(8.944954).epsilon(1e-5));
        CHECK(avg.mass_kg == doctest::Approx(1331.0 * 1.09e-6).epsilon(1e-9));
    }
    SUBCASE("10 g cube does not fit in an 11 mm box") {
        CHECK_FALSE(averaged_sar(field, mg, 10.0e-3).found);
    }
    SUBCASE("report normalizes per watt and applies the limits") {
        const SarReport over = sar_report(vp, mg, 2.0);
        CHECK(over.peak_point == doctest::Approx(8.944954 / 2.0).epsilon(1e-5));
        CHECK(over.sar_1g.sar == doctest::Approx(8.944954 / 2.0).epsilon(1e-5));
        CHECK_FALSE(over.pass_1g);      // 4.47 W/kg > 1.6
        CHECK_FALSE(over.pass_10g);     // cube never fit
        CHECK_FALSE(over.sar_10g.found);

        const SarReport under = sar_report(vp, mg, 10.0);
        CHECK(under.sar_1g.sar == doctest::Approx(0.8944954).epsilon(1e-5));
        CHECK(under.pass_1g);
        CHECK_FALSE(under.pass_10g);

        CHECK_THROWS_AS((void)sar_report(vp, mg, 0.0), PostProcessError);
    }
    SUBCASE("phasor arrays must match the declared box") {
        VolumePhasors bad = vp;
        bad.ex.resize(5, 5, 5);
        CHECK_THROWS_AS((void)point_sar(bad, mg), InvalidArgument);
        VolumePhasors outside = vp;
        outside.box = {10, 20, 2, 12, 2, 12};
        CHECK_THROWS_AS((void)point_sar(outside, mg), InvalidArgument);
    }
}

TEST_CASE("cube-averaged SAR matches a brute-force reference on random fields") {
    const std::size_t n = 14;
    MaterialGrid mg = tissue_block(n, 1.0e-3, 52.7f, 1.95f, 0.0f);
    std::mt19937 rng(20260825u);
    std::uniform_real_distribution<float> rho_d(800.0f, 1600.0f);
    std::uniform_real_distribution<float> sar_d(0.0f, 10.0f);
    std::uniform_real_distribution<float> coin(0.0f, 1.0f);

    SarField field;
    field.box = {1, 12, 1, 12, 1, 12};
    field.point.resize(12, 12, 12, 0.0f);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                if (coin(rng) < 0.25f) {  // carve air pockets
                    mg.flags(i, j, k) = 0;
                    continue;
                }
                mg.rho(i, j, k) = rho_d(rng);
            }
    for (std::size_t k = 0; k < 12; ++k)
        for (std::size_t j = 0; j < 12; ++j)
            for (std::size_t i = 0; i < 12; ++i)
                if (mg.tissue(i + 1, j + 1, k + 1)) field.point(i, j, k) = sar_d(rng);

    // Plain-loop reference with the same rules: smallest odd cube inside the
    // box reaching the mass, peak over centers, first win on ties.
    const double cell_vol = 1e-9;
    auto reference = [&](double target) {
        AveragedSar best;
        for (std::size_t ck = 0; ck < 12; ++ck)
            for (std::size_t cj = 0; cj < 12; ++cj)
                for (std::size_t ci = 0; ci < 12; ++ci) {
                    const std::size_t gi = ci + 1, gj = cj + 1, gk = ck + 1;
                    if (!mg.tissue(gi, gj, gk) || mg.rho(gi, gj, gk) <= 0.0f) continue;
                    for (std::size_t s = 1; s <= 12; s += 2) {
                        const std::size_t h = (s - 1) / 2;
                        if (ci < h || cj < h || ck < h || ci + h >= 12 || cj + h >= 12 ||
                            ck + h >= 12)
                            break;
                        double m_sum = 0.0, p_sum = 0.0;
                        for (std::size_t kk = ck - h; kk <= ck + h; ++kk)
                            for (std::size_t jj = cj - h; jj <= cj + h; ++jj)
                                for (std::size_t ii = ci - h; ii <= ci + h; ++ii) {
                                    if (!mg.tissue(ii + 1, jj + 1, kk + 1)) continue;
                                    const double m =
                                        static_cast<double>(mg.rho(ii + 1, jj + 1, kk + 1)) *
                                        cell_vol;
                                    m_sum += m;
                                    p_sum += static_cast<double>(field.point(ii, jj, kk)) * m;
                                }
                        if (m_sum < target) continue;
                        const double sar = p_sum / m_sum;
                        if (!best.found || sar > best.sar) {
                            best = {true, sar, ci + 1, cj + 1, ck + 1, s, m_sum};
                        }
                        break;
                    }
                }
        return best;
    };

    for (double target : {2.0e-5, 1.0e-4, 4.0e-4}) {
        CAPTURE(target);
        const AveragedSar got = averaged_sar(field, mg, target);
        const AveragedSar ref = reference(target);
        REQUIRE(got.found == ref.found);
        REQUIRE(ref.found);
        CHECK(got.sar == doctest::Approx(ref.sar).epsilon(1e-6));
        CHECK(got.i == ref.i);
        CHECK(got.j == ref.j);
        CHECK(got.k == ref.k);
        CHECK(got.cube_cells == ref.cube_cells);
        CHECK(got.mass_kg == doctest::Approx(ref.mass_kg).epsilon(1e-6));
    }
    // More mass than the whole box holds.
    CHECK_FALSE(averaged_sar(field, mg, 5.0e-3).found);
    CHECK_THROWS_AS((void)averaged_sar(field, mg, 0.0), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Far-field transform against the exact infinitesimal-dipole solution
// ---------------------------------------------------------------------------

namespace {

// Exact fields of a z-directed current element I*dl = 1 A*m at 'src_pos',
// e^{+jwt} time convention (outgoing e^{-jkr}).
void hertzian_fields(double k, const double src_pos[3], double x, double y, double z, cplx e[3],
                     cplx h[3]) {
    const double eta = PhysicalConstants::eta0;
    const double rx = x - src_pos[0], ry = y - src_pos[1], rz = z - src_pos[2];
    const double r = std::sqrt(rx * rx + ry * ry + rz * rz);
    const double ct = rz / r, st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double phi = std::atan2(ry, rx);
    const cplx jkr(0.0, k * r);
    const cplx ph = std::exp(-jkr);
    const cplx inv = 1.0 / jkr;

    const cplx e_r = eta * ct / (2.0 * PhysicalConstants::pi * r * r) * (1.0 + inv) * ph;
    const cplx e_t = cplx(0.0, 1.0) * eta * k * st / (4.0 * PhysicalConstants::pi * r) *
                     (1.0 + inv - 1.0 / (k * r * k * r)) * ph;
    const cplx h_p =
        cplx(0.0, 1.0) * k * st / (4.0 * PhysicalConstants::pi * r) * (1.0 + inv) * ph;

    const double rhat[3] = {rx / r, ry / r, rz / r};
    const double that[3] = {ct * std::cos(phi), ct * std::sin(phi), -st};
    const double phat[3] = {-std::sin(phi), std::cos(phi), 0.0};
    for (int c = 0; c < 3; ++c) {
        e[c] = e_r * rhat[c] + e_t * that[c];
        h[c] = h_p * phat[c];
    }
}

// Closed-box tangential phasors sampled from an analytic field, in the same
// face layout the solver records.
SurfacePhasors sample_surface(const GridSpec& g, const std::array<std::size_t, 6>& box, double f,
                              const std::function<void(double, double, double, cplx*, cplx*)>& fn) {
    SurfacePhasors surf;
    surf.frequency = f;
    surf.box = box;
    const double d[3] = {g.dx, g.dy, g.dz};
    const double o[3] = {g.origin.x, g.origin.y, g.origin.z};
    for (int face = 0; face < 6; ++face) {
        SurfacePhasors::Face fc;
        fc.axis = face / 2;
        fc.positive = face % 2 == 1;
        const int w = fc.axis, u = (w + 1) % 3, v = (w + 2) % 3;
        fc.plane = fc.positive ? box[2 * w + 1] : box[2 * w];
        fc.nu = box[2 * u + 1] - box[2 * u];
        fc.nv = box[2 * v + 1] - box[2 * v];
        for (int c = 0; c < 3; ++c) {
            fc.e[c].assign(fc.nu * fc.nv, {});
            fc.h[c].assign(fc.nu * fc.nv, {});
        }
        for (std::size_t vv = 0; vv < fc.nv; ++vv)
            for (std::size_t uu = 0; uu < fc.nu; ++uu) {
                double pos[3];
                pos[w] = o[w] + static_cast<double>(fc.plane) * d[w];
                pos[u] = o[u] + (static_cast<double>(box[2 * u] + uu) + 0.5) * d[u];
                pos[v] = o[v] + (static_cast<double>(box[2 * v] + vv) + 0.5) * d[v];
                cplx e[3], h[3];
                fn(pos[0], pos[1], pos[2], e, h);
                const std::size_t s = uu + fc.nu * vv;
                // Tangential components only, as the solver stores them.
                fc.e[u][s] = std::complex<float>(static_cast<float>(e[u].real()),
                                                 static_cast<float>(e[u].imag()));
                fc.e[v][s] = std::complex<float>(static_cast<float>(e[v].real()),
                                                 static_cast<float>(e[v].imag()));
                fc.h[u][s] = std::complex<float>(static_cast<float>(h[u].real()),
                                                 static_cast<float>(h[u].imag()));
                fc.h[v][s] = std::complex<float>(static_cast<float>(h[v].real()),
                                                 static_cast<float>(h[v].imag()));
            }
        surf.faces.push_back(std::move(fc));
    }
    return surf;
}

} // namespace

TEST_CASE("far-field transform reproduces the infinitesimal dipole") {
    GridSpec g;
    g.dx = g.dy = g.dz = 5.0e-3;
    g.nx = g.ny = g.nz = 40;
    g.origin = {0.0, 0.0, 0.0};
    const std::array<std::size_t, 6> box{10, 30, 10, 30, 10, 30};
    const double f = 3.0e9;
    const double k = 2.0 * PhysicalConstants::pi * f / PhysicalConstants::c;
    const double center[3] = {0.1, 0.1, 0.1};  // box center, m

    const SurfacePhasors surf =
        sample_surface(g, box, f, [&](double x, double y, double z, cplx* e, cplx* h) {
            hertzian_fields(k, center, x, y, z, e, h);
        });
    const FarField ff(surf, g);
    CHECK(ff.frequency() == f);

    // Total power: eta0 k^2 (I dl)^2 / (12 pi), about 39.5 kW for 1 A*m.
    const double p_exact =
        PhysicalConstants::eta0 * k * k / (12.0 * PhysicalConstants::pi);
    CHECK(ff.radiated_power() == doctest::Approx(p_exact).epsilon(0.02));
    CHECK(surface_power(surf, g) == doctest::Approx(p_exact).epsilon(0.02));

    // Peak directivity 1.5 (1.76 dBi) broadside, sin^2(theta) pattern.
    const double pi = PhysicalConstants::pi;
    CHECK(ff.directivity_dbi(pi / 2, 0.0) == doctest::Approx(1.7609).epsilon(0.06));
    CHECK(ff.directivity_dbi(pi / 4, 1.0) - ff.directivity_dbi(pi / 2, 1.0) ==
          doctest::Approx(-3.0103).epsilon(0.02));
    CHECK(ff.directivity_dbi(pi / 6, 2.5) - ff.directivity_dbi(pi / 2, 2.5) ==
          doctest::Approx(-6.0206).epsilon(0.02));

    // Gain against the quadrature power equals directivity by construction.
    CHECK(ff.gain_dbi(pi / 2, 0.3, ff.radiated_power()) ==
          doctest::Approx(ff.directivity_dbi(pi / 2, 0.3)).epsilon(1e-12));

    SUBCASE("horizontal cut is azimuthally flat") {
        const auto cut = ff.horizontal_cut(10.0);
        REQUIRE(cut.size() == 36);
        double lo = 1e9, hi = -1e9;
        for (const auto& p : cut) {
            lo = std::min(lo, p.dbi);
            hi = std::max(hi, p.dbi);
        }
        CHECK(hi - lo < 0.05);
        CHECK(cut.front().angle_deg == 0.0);
    }
    SUBCASE("vertical cut is symmetric with polar nulls") {
        const auto cut = ff.vertical_cut(5.0);
        REQUIRE(cut.size() == 72);
        for (const auto& p : cut) {
            if (std::abs(std::abs(p.angle_deg) - 90.0) < 0.1)
                CHECK(p.dbi == doctest::Approx(1.7609).epsilon(0.06));
            if (std::abs(p.angle_deg) < 0.1 || std::abs(p.angle_deg - 180.0) < 0.1)
                CHECK(p.dbi < -15.0);
        }
        // Mirror symmetry about the dipole axis.
        const auto at = [&](double a) {
            for (const auto& p : cut)
                if (std::abs(p.angle_deg - a) < 1e-9) return p.dbi;
            FAIL("angle missing from cut");
            return 0.0;
        };
        CHECK(at(45.0) == doctest::Approx(at(-45.0)).epsilon(1e-3));
        CHECK(at(120.0) == doctest::Approx(at(-120.0)).epsilon(1e-3));
    }
    SUBCASE("pattern is invariant under source translation inside the box") {
        const double moved[3] = {0.1 + 7.5e-3, 0.1 - 4.5e-3, 0.1 + 6.0e-3};
        const SurfacePhasors surf2 =
            sample_surface(g, box, f, [&](double x, double y, double z, cplx* e, cplx* h) {
                hertzian_fields(k, moved, x, y, z, e, h);
            });
        const FarField ff2(surf2, g);
        CHECK(ff2.radiated_power() == doctest::Approx(ff.radiated_power()).epsilon(0.01));
        CHECK(ff2.directivity_dbi(pi / 2, 0.0) ==
              doctest::Approx(ff.directivity_dbi(pi / 2, 0.0)).epsilon(0.01));
        CHECK(ff2.directivity_dbi(pi / 3, 2.0) ==
              doctest::Approx(ff.directivity_dbi(pi / 3, 2.0)).epsilon(0.01));
    }
    SUBCASE("malformed surfaces are rejected") {
        SurfacePhasors bad = surf;
        bad.faces.pop_back();
        CHECK_THROWS_AS(FarField(bad, g), InvalidArgument);
        CHECK_THROWS_AS((void)surface_power(bad, g), InvalidArgument);
        SurfacePhasors dc = surf;
        dc.frequency = 0.0;
        CHECK_THROWS_AS(FarField(dc, g), InvalidArgument);
        CHECK_THROWS_AS((void)ff.gain_dbi(0.0, 0.0, 0.0), PostProcessError);
    }
}
