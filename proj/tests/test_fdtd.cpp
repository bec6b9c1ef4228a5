#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"
#include "emsim/fdtd.hpp"

using namespace emsim;

namespace {

// Hand-built uniform grid, bypassing the scene layer.
MaterialGrid uniform_grid(std::size_t nx, std::size_t ny, std::size_t nz, double cell,
                          int pml_cells, float eps_r = 1.0f, float sigma = 0.0f) {
    MaterialGrid mg;
    mg.grid.dx = mg.grid.dy = mg.grid.dz = cell;
    mg.grid.nx = nx;
    mg.grid.ny = ny;
    mg.grid.nz = nz;
    mg.grid.origin = {0.0, 0.0, 0.0};
    mg.grid.pml_cells = pml_cells;
    mg.eps_r.resize(nx, ny, nz, eps_r);
    mg.sigma.resize(nx, ny, nz, sigma);
    mg.rho.resize(nx, ny, nz, 0.0f);
    mg.flags.resize(nx, ny, nz, 0);
    mg.sheets.x.resize(nx + 1, ny, nz, 0);
    mg.sheets.y.resize(nx, ny + 1, nz, 0);
    mg.sheets.z.resize(nx, ny, nz + 1, 0);
    return mg;
}

std::complex<double> dft(const std::vector<float>& v, double dt, double t0, double f) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t n = 0; n < v.size(); ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        acc += static_cast<double>(v[n]) *
               std::exp(std::complex<double>(0.0, -2.0 * M_PI * f * t)) * dt;
    }
    return acc;
}

// Parallel-plate transmission channel along z: field Ex, conducting walls
// normal to x, magnetic walls normal to y, absorbers in z.  Carries an exact
// uniform plane wave, so absorber and material tests reduce to 1-D physics.
SolverSettings tem_channel_settings() {
    SolverSettings st;
    st.boundaries.x_lo = st.boundaries.x_hi = Boundary::Pec;
    st.boundaries.y_lo = st.boundaries.y_hi = Boundary::Pmc;
    st.boundaries.z_lo = st.boundaries.z_hi = Boundary::Cpml;
    return st;
}

void add_tem_plane_source(SolverSettings& st, std::size_t k_plane, const ExcitationSpec& ex) {
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j <= 2; ++j)
            st.soft_sources.push_back(SoftSource{0, i, j, k_plane, ex});
}

} // namespace

TEST_CASE("timestep follows the 3-D stability bound") {
    GridSpec g;
    g.dx = g.dy = g.dz = 0.5e-3;
    CHECK(courant_timestep(g, 0.99) == doctest::Approx(0.953287e-12).epsilon(1e-6));
    // Anisotropic cells: bound dominated by the smallest spacing.
    g.dz = 0.25e-3;
    const double c = PhysicalConstants::c;
    const double want = 0.9 / (c * std::sqrt(2.0 / (0.5e-3 * 0.5e-3) + 16.0e6));
    CHECK(courant_timestep(g, 0.9) == doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(courant_timestep(g, 0.0), InvalidArgument);
    CHECK_THROWS_AS(courant_timestep(g, 1.5), InvalidArgument);
    g.dx = 0.0;
    CHECK_THROWS_AS(courant_timestep(g, 0.9), InvalidArgument);
}

TEST_CASE("closed lossless box conserves the discrete field energy") {
    MaterialGrid mg = uniform_grid(26, 26, 26, 0.5e-3, 0);
    SolverSettings st;
    st.boundaries = BoundarySet::all(Boundary::Pec);
    st.stop.max_steps = 9000;

    SoftSource src;
    src.axis = 2;
    src.i = 13;
    src.j = 13;
    src.k = 13;
    src.excitation.f_center = 4.0e9;
    src.excitation.bandwidth = 6.0e9;
    st.soft_sources.push_back(src);

    ProbeRequest probes;
    probes.energy_history = true;

    const TimeSeriesRecord rec = run_simulation(mg, probes, st);
    REQUIRE(rec.energy.size() == 9000);

    // Source is silent after ~1600 steps; from 2500 on the stored energy
    // must stay constant to numerical round-off.
    double lo = 1e300, hi = 0.0;
    for (std::size_t n = 2500; n < rec.energy.size(); ++n) {
        lo = std::min(lo, rec.energy[n]);
        hi = std::max(hi, rec.energy[n]);
    }
    CHECK(hi > 0.0);
    CHECK((hi - lo) / hi < 1e-3);
}

TEST_CASE("absorbing boundaries drain an impulse from free space") {
    MaterialGrid mg = uniform_grid(40, 40, 40, 0.5e-3, 10);
    SolverSettings st;  // all-sides absorber by default
    st.stop.max_steps = 3000;

    SoftSource src;
    src.axis = 2;
    src.i = 20;
    src.j = 20;
    src.k = 20;
    src.excitation.f_center = 4.0e9;
    src.excitation.bandwidth = 6.0e9;
    st.soft_sources.push_back(src);

    ProbeRequest probes;
    probes.energy_history = true;
    const TimeSeriesRecord rec = run_simulation(mg, probes, st);

    const double peak = *std::max_element(rec.energy.begin(), rec.energy.end());
    const double tail = rec.energy.back();
    REQUIRE(peak > 0.0);
    CHECK(tail / peak < 1e-6);
}

TEST_CASE("absorber reflection stays below -40 dB") {
    // Two identical channel runs that differ only in length: the short one
    // meets its far absorber, the long one is still causally clean at the
    // probe (influence travels at most one cell per step).  The sample-wise
    // difference therefore isolates the reflected wave.
    ExcitationSpec ex;
    ex.f_center = 4.0e9;
    ex.bandwidth = 6.0e9;

    const std::size_t steps = 1800;
    const std::size_t k_src = 15, k_probe = 25;

    std::vector<float> probe[2];
    int run = 0;
    for (std::size_t nz : {std::size_t{70}, std::size_t{1020}}) {
        MaterialGrid mg = uniform_grid(2, 2, nz, 0.5e-3, 10);
        SolverSettings st = tem_channel_settings();
        st.stop.max_steps = steps;
        add_tem_plane_source(st, k_src, ex);

        ProbeRequest probes;
        probes.point_probes.push_back(PointProbe{0, 0, 1, k_probe});
        const TimeSeriesRecord rec = run_simulation(mg, probes, st);
        probe[run++] = rec.point_series.at(0);
    }

    double inc = 0.0, diff = 0.0;
    for (std::size_t n = 0; n < steps; ++n) {
        inc = std::max(inc, std::abs(static_cast<double>(probe[1][n])));
        diff = std::max(diff, std::abs(static_cast<double>(probe[0][n] - probe[1][n])));
    }
    REQUIRE(inc > 0.0);
    CHECK(diff / inc < 1e-2);  // -40 dB
}

TEST_CASE("plane-wave decay in muscle matches the analytic attenuation") {
    // Channel filled with muscle (eps 52.7, sigma 1.95 at 2.4 GHz) from
    // k = 20 through the far absorber.  alpha = 50.1275 Np/m, so two probes
    // 60 mm apart see a field ratio of exp(-3.0077).
    const std::size_t nz = 220;
    MaterialGrid mg = uniform_grid(2, 2, nz, 0.5e-3, 10);
    for (std::size_t k = 20; k < nz; ++k)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < 2; ++i) {
                mg.eps_r(i, j, k) = 52.7f;
                mg.sigma(i, j, k) = 1.95f;
            }

    ExcitationSpec ex;
    ex.f_center = 2.4e9;
    ex.bandwidth = 3.0e9;

    SolverSettings st = tem_channel_settings();
    st.stop.max_steps = 6500;
    add_tem_plane_source(st, 15, ex);

    ProbeRequest probes;
    probes.point_probes.push_back(PointProbe{0, 0, 1, 40});
    probes.point_probes.push_back(PointProbe{0, 0, 1, 160});
    const TimeSeriesRecord rec = run_simulation(mg, probes, st);

    const double t0 = rec.dt;  // first sample is at one full step
    const double e1 = std::abs(dft(rec.point_series[0], rec.dt, t0, 2.4e9));
    const double e2 = std::abs(dft(rec.point_series[1], rec.dt, t0, 2.4e9));
    REQUIRE(e1 > 0.0);

    const double measured = e2 / e1;
    const double expected = std::exp(-50.1275 * 0.060);
    CHECK(measured == doctest::Approx(expected).epsilon(0.025));
}

TEST_CASE("restart from captured fields reproduces the long run exactly") {
    const auto make = [](std::size_t max_steps, std::size_t start,
                         std::optional<FieldSnapshot> init) {
        MaterialGrid mg = uniform_grid(20, 20, 20, 0.5e-3, 0);
        SolverSettings st;
        st.boundaries = BoundarySet::all(Boundary::Pec);
        st.stop.max_steps = max_steps;
        st.start_step = start;
        st.initial_fields = std::move(init);
        SoftSource src;
        src.axis = 2;
        src.i = 10;
        src.j = 9;
        src.k = 11;
        st.soft_sources.push_back(src);

        ProbeRequest probes;
        probes.point_probes.push_back(PointProbe{2, 7, 12, 8});
        probes.capture_final_fields = true;
        return run_simulation(mg, probes, st);
    };

    const TimeSeriesRecord full = make(300, 0, std::nullopt);
    const TimeSeriesRecord half = make(150, 0, std::nullopt);
    REQUIRE(half.final_fields.has_value());
    const TimeSeriesRecord rest = make(150, 150, half.final_fields);

    REQUIRE(full.point_series[0].size() == 300);
    REQUIRE(rest.point_series[0].size() == 150);
    for (std::size_t n = 0; n < 150; ++n) {
        REQUIRE(full.point_series[0][n] == half.point_series[0][n]);
        REQUIRE(full.point_series[0][150 + n] == rest.point_series[0][n]);
    }
    REQUIRE(rest.final_fields.has_value());
    CHECK(full.final_fields->ez == rest.final_fields->ez);
    CHECK(full.final_fields->hy == rest.final_fields->hy);
}

TEST_CASE("checkpoint files round-trip bit for bit") {
    FieldSnapshot f;
    f.nx = 5;
    f.ny = 4;
    f.nz = 3;
    f.ex.resize(4, 4, 3, 0.0f);
    f.ey.resize(5, 3, 3, 0.0f);
    f.ez.resize(5, 4, 2, 0.0f);
    f.hx.resize(5, 3, 2, 0.0f);
    f.hy.resize(4, 4, 2, 0.0f);
    f.hz.resize(4, 3, 3, 0.0f);
    float v = 0.125f;
    for (auto* a : {&f.ex, &f.ey, &f.ez, &f.hx, &f.hy, &f.hz})
        for (std::size_t c = 0; c < a->size(); ++c) (*a)[c] = (v += 0.375f);

    const std::string path = "checkpoint_roundtrip.bin";
    save_checkpoint(f, path);
    const FieldSnapshot g = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(g.nx == f.nx);
    CHECK(g.ny == f.ny);
    CHECK(g.nz == f.nz);
    CHECK(g.ex == f.ex);
    CHECK(g.ey == f.ey);
    CHECK(g.ez == f.ez);
    CHECK(g.hx == f.hx);
    CHECK(g.hy == f.hy);
    CHECK(g.hz == f.hz);

    CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), ParseError);
}

TEST_CASE("results do not depend on the thread count") {
    const auto run = [](int threads) {
        MaterialGrid mg = uniform_grid(24, 24, 24, 0.5e-3, 8);
        SolverSettings st;
        st.threads = threads;
        st.stop.max_steps = 600;
        SoftSource src;
        src.axis = 2;
        src.i = 12;
        src.j = 12;
        src.k = 12;
        st.soft_sources.push_back(src);

        ProbeRequest probes;
        probes.energy_history = true;
        probes.point_probes.push_back(PointProbe{2, 6, 14, 9});
        probes.point_probes.push_back(PointProbe{0, 15, 8, 16});
        return run_simulation(mg, probes, st);
    };

    const TimeSeriesRecord a = run(1);
    const TimeSeriesRecord b = run(4);
    REQUIRE(a.point_series.size() == b.point_series.size());
    for (std::size_t p = 0; p < a.point_series.size(); ++p) {
        REQUIRE(a.point_series[p].size() == b.point_series[p].size());
        for (std::size_t n = 0; n < a.point_series[p].size(); ++n)
            REQUIRE(a.point_series[p][n] == b.point_series[p][n]);
    }
    for (std::size_t n = 0; n < a.energy.size(); ++n)
        REQUIRE(a.energy[n] == b.energy[n]);
}

TEST_CASE("source and observer positions are interchangeable") {
    // Same-component transfer between two points in a uniform reciprocal
    // medium is symmetric; the discrete update preserves this.
    const std::size_t p1[3] = {7, 9, 11}, p2[3] = {14, 12, 6};
    const auto run = [&](const std::size_t* s, const std::size_t* r) {
        MaterialGrid mg = uniform_grid(20, 20, 20, 0.5e-3, 0);
        SolverSettings st;
        st.boundaries = BoundarySet::all(Boundary::Pec);
        st.stop.max_steps = 500;
        SoftSource src;
        src.axis = 2;
        src.i = s[0];
        src.j = s[1];
        src.k = s[2];
        st.soft_sources.push_back(src);
        ProbeRequest probes;
        probes.point_probes.push_back(PointProbe{2, r[0], r[1], r[2]});
        return run_simulation(mg, probes, st);
    };

    const TimeSeriesRecord fwd = run(p1, p2);
    const TimeSeriesRecord rev = run(p2, p1);
    for (double f : {3.0e9, 4.0e9, 5.0e9}) {
        const double m12 = std::abs(dft(fwd.point_series[0], fwd.dt, fwd.dt, f));
        const double m21 = std::abs(dft(rev.point_series[0], rev.dt, rev.dt, f));
        REQUIRE(m12 > 0.0);
        CHECK(m21 / m12 == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("field blow-up raises a diagnostic with the offending step") {
    MaterialGrid mg = uniform_grid(12, 12, 12, 0.5e-3, 0);
    SolverSettings st;
    st.boundaries = BoundarySet::all(Boundary::Pec);
    st.stop.max_steps = 100;
    st.divergence_check_interval = 10;

    // Corrupt start fields, as from a damaged checkpoint.
    FieldSnapshot f;
    f.nx = 13;
    f.ny = 13;
    f.nz = 13;
    f.ex.resize(12, 13, 13, 1e30f);
    f.ey.resize(13, 12, 13, 1e30f);
    f.ez.resize(13, 13, 12, 1e30f);
    f.hx.resize(13, 12, 12, 0.0f);
    f.hy.resize(12, 13, 12, 0.0f);
    f.hz.resize(12, 12, 13, 0.0f);
    st.initial_fields = std::move(f);

    try {
        ProbeRequest probes;
        run_simulation(mg, probes, st);
        FAIL("expected DivergedError");
    } catch (const DivergedError& e) {
        CHECK(e.step == 10);
        CHECK(std::string(e.what()).find("step 10") != std::string::npos);
    }
}

TEST_CASE("volume and surface phasors are captured and finite") {
    MaterialGrid mg = uniform_grid(36, 36, 36, 0.5e-3, 10);
    SolverSettings st;
    st.stop.max_steps = 2200;
    SoftSource src;
    src.axis = 2;
    src.i = 18;
    src.j = 18;
    src.k = 18;
    st.soft_sources.push_back(src);

    ProbeRequest probes;
    probes.volume_freqs = {4.0e9};
    probes.volume_box = {14, 21, 14, 21, 14, 21};
    probes.surface_freqs = {4.0e9};
    probes.surface_box = {12, 24, 12, 24, 12, 24};
    const TimeSeriesRecord rec = run_simulation(mg, probes, st);

    REQUIRE(rec.volume.size() == 1);
    const auto& vp = rec.volume[0];
    CHECK(vp.frequency == doctest::Approx(4.0e9));
    CHECK(vp.ez.size() > 0);
    double vmax = 0.0;
    for (std::size_t c = 0; c < vp.ez.size(); ++c) {
        REQUIRE(std::isfinite(vp.ez[c].real()));
        vmax = std::max(vmax, static_cast<double>(std::abs(vp.ez[c])));
    }
    CHECK(vmax > 0.0);

    REQUIRE(rec.surface.size() == 1);
    REQUIRE(rec.surface[0].faces.size() == 6);
    double smax = 0.0;
    for (const auto& fc : rec.surface[0].faces) {
        REQUIRE(fc.nu * fc.nv > 0);
        for (int c = 0; c < 3; ++c) {
            REQUIRE(fc.e[c].size() == fc.nu * fc.nv);
            REQUIRE(fc.h[c].size() == fc.nu * fc.nv);
            for (const auto& z : fc.e[c]) {
                REQUIRE(std::isfinite(z.real()));
                smax = std::max(smax, static_cast<double>(std::abs(z)));
            }
        }
    }
    CHECK(smax > 0.0);

    // Surface boxes inside the absorber are rejected.
    ProbeRequest bad;
    bad.surface_freqs = {4.0e9};
    bad.surface_box = {5, 30, 12, 24, 12, 24};
    CHECK_THROWS_AS(run_simulation(mg, bad, st), PostProcessError);
}
