#include "emsim/fdtd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"

namespace emsim {

double courant_timestep(const GridSpec& grid, double safety) {
    if (safety <= 0.0 || safety > 1.0)
        throw InvalidArgument("courant_timestep: safety factor must be in (0, 1]");
    check_positive(grid.dx, "dx");
    check_positive(grid.dy, "dy");
    check_positive(grid.dz, "dz");
    const double s = std::sqrt(1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy) +
                               1.0 / (grid.dz * grid.dz));
    return safety / (PhysicalConstants::c * s);
}

// ---------------------------------------------------------------------------
// checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

// Yee-staggered dims of each field component for given node counts.
void yee_dims(const FieldSnapshot& f, std::size_t out[6][3]) {
    const std::size_t nx = f.nx, ny = f.ny, nz = f.nz;
    const std::size_t d[6][3] = {
        {nx - 1, ny, nz},      // ex
        {nx, ny - 1, nz},      // ey
        {nx, ny, nz - 1},      // ez
        {nx, ny - 1, nz - 1},  // hx
        {nx - 1, ny, nz - 1},  // hy
        {nx - 1, ny - 1, nz},  // hz
    };
    std::memcpy(out, d, sizeof(d));
}

} // namespace

void save_checkpoint(const FieldSnapshot& f, const std::string& path) {
    if (f.nx < 2 || f.ny < 2 || f.nz < 2)
        throw InvalidArgument("save_checkpoint: snapshot needs at least 2 nodes per axis");
    std::size_t d[6][3];
    yee_dims(f, d);
    const Array3D<float>* arrays[6] = {&f.ex, &f.ey, &f.ez, &f.hx, &f.hy, &f.hz};
    for (int c = 0; c < 6; ++c)
        if (arrays[c]->nx() != d[c][0] || arrays[c]->ny() != d[c][1] || arrays[c]->nz() != d[c][2])
            throw InvalidArgument("save_checkpoint: field array shape does not match the node dims");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("save_checkpoint: cannot open '" + path + "'");
    os.write("EMCP", 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(f.nx),
                                   static_cast<std::uint32_t>(f.ny),
                                   static_cast<std::uint32_t>(f.nz)};
    os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    for (const Array3D<float>* a : {&f.ex, &f.ey, &f.ez, &f.hx, &f.hy, &f.hz})
        os.write(reinterpret_cast<const char*>(a->data()),
                 static_cast<std::streamsize>(a->size() * sizeof(float)));
    if (!os) throw ParseError("save_checkpoint: write failed for '" + path + "'");
}

FieldSnapshot load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("load_checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "EMCP", 4) != 0)
        throw ParseError("load_checkpoint: '" + path + "' is not a field checkpoint");
    std::uint32_t dims[3];
    is.read(reinterpret_cast<char*>(dims), sizeof(dims));
    FieldSnapshot f;
    f.nx = dims[0];
    f.ny = dims[1];
    f.nz = dims[2];
    if (f.nx < 2 || f.ny < 2 || f.nz < 2)
        throw ParseError("load_checkpoint: '" + path + "' has invalid node dims");
    std::size_t d[6][3];
    yee_dims(f, d);
    Array3D<float>* arrays[6] = {&f.ex, &f.ey, &f.ez, &f.hx, &f.hy, &f.hz};
    for (int c = 0; c < 6; ++c) {
        arrays[c]->resize(d[c][0], d[c][1], d[c][2]);
        is.read(reinterpret_cast<char*>(arrays[c]->data()),
                static_cast<std::streamsize>(arrays[c]->size() * sizeof(float)));
    }
    if (!is) throw ParseError("load_checkpoint: truncated file '" + path + "'");
    return f;
}

// ---------------------------------------------------------------------------
// solver internals
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint16_t kPecIndex = 0;

struct Lut {
    std::vector<float> ca, cb;
    std::map<std::pair<long, long>, std::uint16_t> index;

    std::uint16_t insert(double eps, double sigma, double dt, bool unique_entry = false) {
        if (!unique_entry) {
            const auto key = std::make_pair(std::lround(eps * 1e18), std::lround(sigma * 1e9));
            auto it = index.find(key);
            if (it != index.end()) return it->second;
            const std::uint16_t id = append(eps, sigma, dt);
            index.emplace(key, id);
            return id;
        }
        return append(eps, sigma, dt);
    }

    std::uint16_t append(double eps, double sigma, double dt) {
        const double a = sigma * dt / (2.0 * eps);
        ca.push_back(static_cast<float>((1.0 - a) / (1.0 + a)));
        cb.push_back(static_cast<float>((dt / eps) / (1.0 + a)));
        if (ca.size() > 60000)
            throw InvalidArgument("material table overflow (too many distinct edge materials)");
        return static_cast<std::uint16_t>(ca.size() - 1);
    }
};

// One axis of the absorbing layer: graded profiles at integer (E) and half
// (H) positions, plus 1/(kappa*delta) factors folded into the main update.
struct PmlAxis {
    std::vector<double> inv_ke, inv_kh;
    std::vector<double> be, ce, bh, ch;
    int lo = 0, hi = 0;  // active cells per side
};

PmlAxis build_pml_axis(std::size_t n, double delta, double dt, const CpmlParams& p,
                       bool lo_active, bool hi_active, int cells) {
    PmlAxis ax;
    ax.inv_ke.assign(n + 1, 1.0 / delta);
    ax.inv_kh.assign(n, 1.0 / delta);
    ax.be.assign(n + 1, 0.0);
    ax.ce.assign(n + 1, 0.0);
    ax.bh.assign(n, 0.0);
    ax.ch.assign(n, 0.0);
    ax.lo = lo_active ? cells : 0;
    ax.hi = hi_active ? cells : 0;
    const double m = p.order;
    const double smax = 0.8 * (m + 1.0) / (PhysicalConstants::eta0 * delta) * p.sigma_scale;
    const auto fill = [&](double rho, double& b, double& c, double& inv_k) {
        rho = std::clamp(rho, 0.0, 1.0);
        const double sg = smax * std::pow(rho, m);
        const double kp = 1.0 + (p.kappa_max - 1.0) * std::pow(rho, m);
        const double al = p.alpha_max * (1.0 - rho);
        b = std::exp(-(sg / kp + al) * dt / PhysicalConstants::eps0);
        const double den = sg * kp + kp * kp * al;
        c = den > 0.0 ? sg * (b - 1.0) / den : 0.0;
        inv_k = 1.0 / (kp * delta);
    };
    if (lo_active) {
        for (int i = 0; i <= cells; ++i)
            fill(static_cast<double>(cells - i) / cells, ax.be[i], ax.ce[i], ax.inv_ke[i]);
        for (int i = 0; i < cells; ++i)
            fill((cells - (i + 0.5)) / cells, ax.bh[i], ax.ch[i], ax.inv_kh[i]);
    }
    if (hi_active) {
        const std::size_t s = n - cells;
        for (int i = 0; i <= cells; ++i)
            fill(static_cast<double>(i) / cells, ax.be[s + i], ax.ce[s + i], ax.inv_ke[s + i]);
        for (int i = 0; i < cells; ++i)
            fill((i + 0.5) / cells, ax.bh[s + i], ax.ch[s + i], ax.inv_kh[s + i]);
    }
    return ax;
}

// Sparse post-update term: H[h_index] += coeff * E[e_index], used to rescale
// the curl contribution of edges next to sub-cell thin wires.
struct WireCorrection {
    int h_comp;
    std::size_t h_index;
    int e_comp;
    std::size_t e_index;
    float coeff;
};

struct Solver {
    const MaterialGrid& mg;
    const SolverSettings& st;

    std::size_t nx, ny, nz, NX, NY, NZ;
    double dx, dy, dz, dt, dv;

    Array3D<float> ex, ey, ez, hx, hy, hz;
    Array3D<std::uint16_t> mex, mey, mez;
    Lut lut;
    std::uint16_t src_lut = kPecIndex;
    double src_scale = 0.0;  // 1 / (R * dual-face area) of the port edge

    PmlAxis px, py, pz;
    Array3D<float> p_eyx_lo, p_eyx_hi, p_ezx_lo, p_ezx_hi;  // x layer, E side
    Array3D<float> p_hyx_lo, p_hyx_hi, p_hzx_lo, p_hzx_hi;  // x layer, H side
    Array3D<float> p_exy_lo, p_exy_hi, p_ezy_lo, p_ezy_hi;  // y layer, E side
    Array3D<float> p_hxy_lo, p_hxy_hi, p_hzy_lo, p_hzy_hi;  // y layer, H side
    Array3D<float> p_exz_lo, p_exz_hi, p_eyz_lo, p_eyz_hi;  // z layer, E side
    Array3D<float> p_hxz_lo, p_hxz_hi, p_hyz_lo, p_hyz_hi;  // z layer, H side

    std::vector<WireCorrection> wire_fix;

    // Magnetic-mirror walls, per face.
    bool pmc_x_lo = false, pmc_x_hi = false;
    bool pmc_y_lo = false, pmc_y_hi = false;
    bool pmc_z_lo = false, pmc_z_hi = false;

    // First-order radiating boundary: previous-step tangential planes.
    struct MurFace {
        bool active = false;
        std::vector<float> prev_wall_a, prev_wall_b, prev_in_a, prev_in_b;
    };
    MurFace mur[6];

    std::vector<double> partial;  // per-slice reduction scratch (fixed order)

    Solver(const MaterialGrid& m, const SolverSettings& s) : mg(m), st(s) {
        nx = m.grid.nx; ny = m.grid.ny; nz = m.grid.nz;
        NX = nx + 1; NY = ny + 1; NZ = nz + 1;
        dx = m.grid.dx; dy = m.grid.dy; dz = m.grid.dz;
        dv = dx * dy * dz;
        dt = courant_timestep(m.grid, s.courant);

        ex.resize(NX, NY, NZ); ey.resize(NX, NY, NZ); ez.resize(NX, NY, NZ);
        hx.resize(NX, NY, NZ); hy.resize(NX, NY, NZ); hz.resize(NX, NY, NZ);
        if (s.initial_fields) {
            const FieldSnapshot& f = *s.initial_fields;
            if (f.nx != NX || f.ny != NY || f.nz != NZ)
                throw InvalidArgument("initial fields do not match the grid dimensions");
            ex = f.ex; ey = f.ey; ez = f.ez;
            hx = f.hx; hy = f.hy; hz = f.hz;
        }

        build_coefficients();
        build_pml();
        build_wire_corrections();
    }

    // -- per-edge update coefficients ------------------------------------

    void build_coefficients() {
        lut.append(1.0, 0.0, dt);  // slot 0 is the perfect-conductor entry
        lut.ca[0] = 0.0f;
        lut.cb[0] = 0.0f;

        mex.resize(NX, NY, NZ, kPecIndex);
        mey.resize(NX, NY, NZ, kPecIndex);
        mez.resize(NX, NY, NZ, kPecIndex);

        const auto cell_clamped = [&](long i, long j, long k) {
            i = std::clamp<long>(i, 0, static_cast<long>(nx) - 1);
            j = std::clamp<long>(j, 0, static_cast<long>(ny) - 1);
            k = std::clamp<long>(k, 0, static_cast<long>(nz) - 1);
            return mg.flags.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                  static_cast<std::size_t>(k));
        };

        // Edge material = average over the four touching cells; any conductor
        // cell makes the whole edge perfectly conducting.
        const auto edge_index = [&](int axis, std::size_t i, std::size_t j, std::size_t k) {
            const long ci = static_cast<long>(i), cj = static_cast<long>(j),
                       ck = static_cast<long>(k);
            std::size_t cells[4];
            if (axis == 0) {
                cells[0] = cell_clamped(ci, cj - 1, ck - 1);
                cells[1] = cell_clamped(ci, cj, ck - 1);
                cells[2] = cell_clamped(ci, cj - 1, ck);
                cells[3] = cell_clamped(ci, cj, ck);
            } else if (axis == 1) {
                cells[0] = cell_clamped(ci - 1, cj, ck - 1);
                cells[1] = cell_clamped(ci, cj, ck - 1);
                cells[2] = cell_clamped(ci - 1, cj, ck);
                cells[3] = cell_clamped(ci, cj, ck);
            } else {
                cells[0] = cell_clamped(ci - 1, cj - 1, ck);
                cells[1] = cell_clamped(ci, cj - 1, ck);
                cells[2] = cell_clamped(ci - 1, cj, ck);
                cells[3] = cell_clamped(ci, cj, ck);
            }
            double eps = 0.0, sg = 0.0;
            for (std::size_t c : cells) {
                if (mg.flags[c] & MaterialGrid::kConductor) return kPecIndex;
                eps += mg.eps_r[c];
                sg += mg.sigma[c];
            }
            eps = 0.25 * eps * PhysicalConstants::eps0;
            sg = 0.25 * sg;
            return lut.insert(eps, sg, dt);
        };

        for (std::size_t k = 0; k < NZ; ++k)
            for (std::size_t j = 0; j < NY; ++j)
                for (std::size_t i = 0; i < NX; ++i) {
                    if (i < nx) mex(i, j, k) = edge_index(0, i, j, k);
                    if (j < ny) mey(i, j, k) = edge_index(1, i, j, k);
                    if (k < nz) mez(i, j, k) = edge_index(2, i, j, k);
                }

        // Conductor sheets short their four tangential edges.
        for (std::size_t k = 0; k <= nz; ++k)
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i)
                    if (mg.sheets.z(i, j, k)) {
                        mex(i, j, k) = kPecIndex;
                        mex(i, j + 1, k) = kPecIndex;
                        mey(i, j, k) = kPecIndex;
                        mey(i + 1, j, k) = kPecIndex;
                    }
        for (std::size_t k = 0; k < nz; ++k)
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t i = 0; i <= nx; ++i)
                    if (mg.sheets.x(i, j, k)) {
                        mey(i, j, k) = kPecIndex;
                        mey(i, j, k + 1) = kPecIndex;
                        mez(i, j, k) = kPecIndex;
                        mez(i, j + 1, k) = kPecIndex;
                    }
        for (std::size_t k = 0; k < nz; ++k)
            for (std::size_t j = 0; j <= ny; ++j)
                for (std::size_t i = 0; i < nx; ++i)
                    if (mg.sheets.y(i, j, k)) {
                        mex(i, j, k) = kPecIndex;
                        mex(i, j, k + 1) = kPecIndex;
                        mez(i, j, k) = kPecIndex;
                        mez(i + 1, j, k) = kPecIndex;
                    }

        // Thin wires are conducting edges (with near-field corrections).
        for (const auto& w : mg.wires) edge_array(w.axis)(w.i, w.j, w.k) = kPecIndex;

        // Lumped port: fold the series resistance into the source edge.
        if (mg.has_port) {
            const auto& p = mg.port;
            auto& arr = edge_array(p.axis);
            if (arr(p.i, p.j, p.k) == kPecIndex)
                throw PortResolutionError("port source edge lands on a conductor");
            const double dw = p.axis == 0 ? dx : p.axis == 1 ? dy : dz;
            const double area = dv / dw;
            const std::uint16_t old = arr(p.i, p.j, p.k);
            // Invert the stored coefficients back to the averaged material.
            const double cb0 = lut.cb[old], ca0 = lut.ca[old];
            const double eps = dt / cb0 * (2.0 / (1.0 + ca0));
            const double sg = (1.0 - ca0) / (1.0 + ca0) * 2.0 * eps / dt;
            src_scale = 1.0 / (p.impedance * area);
            src_lut = lut.insert(eps, sg + dw * src_scale, dt, true);
            arr(p.i, p.j, p.k) = src_lut;
        }
    }

    Array3D<std::uint16_t>& edge_array(int axis) {
        return axis == 0 ? mex : axis == 1 ? mey : mez;
    }

    // -- boundaries --------------------------------------------------------

    void build_pml() {
        const int c = mg.grid.pml_cells;
        const auto active = [&](Boundary b) { return b == Boundary::Cpml && c > 0; };
        const std::size_t min_n = 2 * static_cast<std::size_t>(c) + 4;
        const bool ax = active(st.boundaries.x_lo) || active(st.boundaries.x_hi);
        const bool ay = active(st.boundaries.y_lo) || active(st.boundaries.y_hi);
        const bool az = active(st.boundaries.z_lo) || active(st.boundaries.z_hi);
        if ((ax && nx < min_n) || (ay && ny < min_n) || (az && nz < min_n))
            throw InvalidArgument("grid too small for the absorbing layers");
        px = build_pml_axis(nx, dx, dt, st.cpml, active(st.boundaries.x_lo),
                            active(st.boundaries.x_hi), c);
        py = build_pml_axis(ny, dy, dt, st.cpml, active(st.boundaries.y_lo),
                            active(st.boundaries.y_hi), c);
        pz = build_pml_axis(nz, dz, dt, st.cpml, active(st.boundaries.z_lo),
                            active(st.boundaries.z_hi), c);
        const std::size_t sx = static_cast<std::size_t>(c) + 1;
        if (px.lo) { p_eyx_lo.resize(sx, NY, NZ); p_ezx_lo.resize(sx, NY, NZ);
                     p_hyx_lo.resize(sx, NY, NZ); p_hzx_lo.resize(sx, NY, NZ); }
        if (px.hi) { p_eyx_hi.resize(sx, NY, NZ); p_ezx_hi.resize(sx, NY, NZ);
                     p_hyx_hi.resize(sx, NY, NZ); p_hzx_hi.resize(sx, NY, NZ); }
        if (py.lo) { p_exy_lo.resize(NX, sx, NZ); p_ezy_lo.resize(NX, sx, NZ);
                     p_hxy_lo.resize(NX, sx, NZ); p_hzy_lo.resize(NX, sx, NZ); }
        if (py.hi) { p_exy_hi.resize(NX, sx, NZ); p_ezy_hi.resize(NX, sx, NZ);
                     p_hxy_hi.resize(NX, sx, NZ); p_hzy_hi.resize(NX, sx, NZ); }
        if (pz.lo) { p_exz_lo.resize(NX, NY, sx); p_eyz_lo.resize(NX, NY, sx);
                     p_hxz_lo.resize(NX, NY, sx); p_hyz_lo.resize(NX, NY, sx); }
        if (pz.hi) { p_exz_hi.resize(NX, NY, sx); p_eyz_hi.resize(NX, NY, sx);
                     p_hxz_hi.resize(NX, NY, sx); p_hyz_hi.resize(NX, NY, sx); }

        pmc_x_lo = st.boundaries.x_lo == Boundary::Pmc;
        pmc_x_hi = st.boundaries.x_hi == Boundary::Pmc;
        pmc_y_lo = st.boundaries.y_lo == Boundary::Pmc;
        pmc_y_hi = st.boundaries.y_hi == Boundary::Pmc;
        pmc_z_lo = st.boundaries.z_lo == Boundary::Pmc;
        pmc_z_hi = st.boundaries.z_hi == Boundary::Pmc;

        const Boundary bs[6] = {st.boundaries.x_lo, st.boundaries.x_hi, st.boundaries.y_lo,
                                st.boundaries.y_hi, st.boundaries.z_lo, st.boundaries.z_hi};
        const std::size_t plane_sizes[3] = {NY * NZ, NX * NZ, NX * NY};
        for (int f = 0; f < 6; ++f) {
            mur[f].active = bs[f] == Boundary::Mur1;
            if (mur[f].active) {
                const std::size_t n = plane_sizes[f / 2];
                mur[f].prev_wall_a.assign(n, 0.0f);
                mur[f].prev_wall_b.assign(n, 0.0f);
                mur[f].prev_in_a.assign(n, 0.0f);
                mur[f].prev_in_b.assign(n, 0.0f);
            }
        }
    }

    void build_wire_corrections() {
        const double db = dt / PhysicalConstants::mu0;
        for (const auto& w : mg.wires) {
            if (w.radius <= 0.0f) continue;
            const int aw = w.axis, u = (aw + 1) % 3, v = (aw + 2) % 3;
            const double du = u == 0 ? dx : u == 1 ? dy : dz;
            const double dvv = v == 0 ? dx : v == 1 ? dy : dz;
            const long c[3] = {static_cast<long>(w.i), static_cast<long>(w.j),
                               static_cast<long>(w.k)};
            // Radii above the native edge equivalent (~0.135 cells) are left
            // as plain conducting edges; scaling past 1 destabilizes the
            // leapfrog update.
            const auto scale = [&](double delta) {
                const double lg = std::log(delta / w.radius);
                return lg > 2.0 ? 2.0 / lg : 1.0;
            };
            const double su = scale(du), sv = scale(dvv);
            const auto add = [&](int h_comp, long hi_, long hj, long hk, int e_comp, long ei,
                                 long ej, long ek, double coeff) {
                if (hi_ < 0 || hj < 0 || hk < 0 || ei < 0 || ej < 0 || ek < 0) return;
                if (hi_ >= static_cast<long>(NX) || hj >= static_cast<long>(NY) ||
                    hk >= static_cast<long>(NZ) || ei >= static_cast<long>(NX) ||
                    ej >= static_cast<long>(NY) || ek >= static_cast<long>(NZ))
                    return;
                WireCorrection wc;
                wc.h_comp = h_comp;
                wc.h_index = ex.index(static_cast<std::size_t>(hi_), static_cast<std::size_t>(hj),
                                      static_cast<std::size_t>(hk));
                wc.e_comp = e_comp;
                wc.e_index = ex.index(static_cast<std::size_t>(ei), static_cast<std::size_t>(ej),
                                      static_cast<std::size_t>(ek));
                wc.coeff = static_cast<float>(coeff);
                wire_fix.push_back(wc);
            };
            long p[3];
            // H_v faces either side along u couple to the far E_w edge there
            // through +dEw/du in their curl.
            if (su < 1.0) {
                std::copy(c, c + 3, p);
                add(v, p[0], p[1], p[2], aw, p[0] + (u == 0), p[1] + (u == 1), p[2] + (u == 2),
                    db / du * (su - 1.0));
                p[u] -= 1;
                add(v, p[0], p[1], p[2], aw, p[0], p[1], p[2], -db / du * (su - 1.0));
            }
            // H_u faces either side along v carry -dEw/dv.
            if (sv < 1.0) {
                std::copy(c, c + 3, p);
                add(u, p[0], p[1], p[2], aw, p[0] + (v == 0), p[1] + (v == 1), p[2] + (v == 2),
                    -db / dvv * (sv - 1.0));
                p[v] -= 1;
                add(u, p[0], p[1], p[2], aw, p[0], p[1], p[2], db / dvv * (sv - 1.0));
            }
        }
    }

    // -- H update -----------------------------------------------------------

    // Advances H a half step.  When with_energy is set, returns
    // mu0 * sum(H_old * H_new), reduced per slice in fixed order.
    double update_h(bool with_energy) {
        const double db = dt / PhysicalConstants::mu0;
        if (with_energy) partial.assign(nz + 1, 0.0);
#pragma omp parallel for schedule(static)
        for (long kk = 0; kk < static_cast<long>(nz); ++kk) {
            const std::size_t k = static_cast<std::size_t>(kk);
            double acc = 0.0;
            const double idzh = pz.inv_kh[k];
            for (std::size_t j = 0; j < ny; ++j) {
                const double idyh = py.inv_kh[j];
                for (std::size_t i = 0; i <= nx; ++i) {
                    const std::size_t n = hx.index(i, j, k);
                    const float old = hx[n];
                    hx[n] = static_cast<float>(
                        old + db * (idzh * (ey[ey.index(i, j, k + 1)] - ey[n]) -
                                    idyh * (ez[ez.index(i, j + 1, k)] - ez[n])));
                    if (with_energy) acc += static_cast<double>(old) * hx[n];
                }
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t n = hy.index(i, j, k);
                    const float old = hy[n];
                    hy[n] = static_cast<float>(
                        old + db * (px.inv_kh[i] * (ez[ez.index(i + 1, j, k)] - ez[n]) -
                                    idzh * (ex[ex.index(i, j, k + 1)] - ex[n])));
                    if (with_energy) acc += static_cast<double>(old) * hy[n];
                }
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t n = hz.index(i, j, k);
                    const float old = hz[n];
                    hz[n] = static_cast<float>(
                        old + db * (idyh * (ex[ex.index(i, j + 1, k)] - ex[n]) -
                                    px.inv_kh[i] * (ey[ey.index(i + 1, j, k)] - ey[n])));
                    if (with_energy) acc += static_cast<double>(old) * hz[n];
                }
            }
            if (with_energy) partial[k] = acc;
        }
        // Boundary rows not covered above (serial; negligible work).
        {
            double acc = 0.0;
            const std::size_t k = nz;  // Hz on the top node plane
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t n = hz.index(i, j, k);
                    const float old = hz[n];
                    hz[n] = static_cast<float>(
                        old + db * (py.inv_kh[j] * (ex[ex.index(i, j + 1, k)] - ex[n]) -
                                    px.inv_kh[i] * (ey[ey.index(i + 1, j, k)] - ey[n])));
                    if (with_energy) acc += static_cast<double>(old) * hz[n];
                }
            const std::size_t j = ny;  // Hy on the far y node plane
            for (std::size_t k2 = 0; k2 < nz; ++k2)
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t n = hy.index(i, j, k2);
                    const float old = hy[n];
                    hy[n] = static_cast<float>(
                        old + db * (px.inv_kh[i] * (ez[ez.index(i + 1, j, k2)] - ez[n]) -
                                    pz.inv_kh[k2] * (ex[ex.index(i, j, k2 + 1)] - ex[n])));
                    if (with_energy) acc += static_cast<double>(old) * hy[n];
                }
            if (with_energy) partial[nz] += acc;
        }
        if (!with_energy) return 0.0;
        double s = 0.0;
        for (double v : partial) s += v;
        return s * PhysicalConstants::mu0;
    }

    // -- E update -----------------------------------------------------------

    void update_e() {
#pragma omp parallel for schedule(static)
        for (long kk = 1; kk < static_cast<long>(nz); ++kk) {
            const std::size_t k = static_cast<std::size_t>(kk);
            const double idze = pz.inv_ke[k];
            for (std::size_t j = 1; j < ny; ++j) {
                const double idye = py.inv_ke[j];
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t n = ex.index(i, j, k);
                    const std::uint16_t m = mex[n];
                    ex[n] = static_cast<float>(
                        lut.ca[m] * ex[n] +
                        lut.cb[m] * (idye * (hz[n] - hz[hz.index(i, j - 1, k)]) -
                                     idze * (hy[n] - hy[hy.index(i, j, k - 1)])));
                }
                for (std::size_t i = 1; i < nx; ++i) {
                    const std::size_t n = ey.index(i, j, k);
                    const std::uint16_t m = mey[n];
                    ey[n] = static_cast<float>(
                        lut.ca[m] * ey[n] +
                        lut.cb[m] * (idze * (hx[n] - hx[hx.index(i, j, k - 1)]) -
                                     px.inv_ke[i] * (hz[n] - hz[hz.index(i - 1, j, k)])));
                }
                for (std::size_t i = 1; i < nx; ++i) {
                    const std::size_t n = ez.index(i, j, k);
                    const std::uint16_t m = mez[n];
                    ez[n] = static_cast<float>(
                        lut.ca[m] * ez[n] +
                        lut.cb[m] * (px.inv_ke[i] * (hy[n] - hy[hy.index(i - 1, j, k)]) -
                                     idye * (hx[n] - hx[hx.index(i, j - 1, k)])));
                }
            }
        }
        // Ey along the y_lo row (an interior unknown at j = 0).
#pragma omp parallel for schedule(static)
        for (long kk = 1; kk < static_cast<long>(nz); ++kk) {
            const std::size_t k = static_cast<std::size_t>(kk);
            const double idze = pz.inv_ke[k];
            for (std::size_t i = 1; i < nx; ++i) {
                const std::size_t n = ey.index(i, 0, k);
                const std::uint16_t m = mey[n];
                ey[n] = static_cast<float>(
                    lut.ca[m] * ey[n] +
                    lut.cb[m] * (idze * (hx[n] - hx[hx.index(i, 0, k - 1)]) -
                                 px.inv_ke[i] * (hz[n] - hz[hz.index(i - 1, 0, k)])));
            }
        }
        // Ez along the z_lo row (interior unknown at k = 0).
#pragma omp parallel for schedule(static)
        for (long jj = 1; jj < static_cast<long>(ny); ++jj) {
            const std::size_t j = static_cast<std::size_t>(jj);
            const double idye = py.inv_ke[j];
            for (std::size_t i = 1; i < nx; ++i) {
                const std::size_t n = ez.index(i, j, 0);
                const std::uint16_t m = mez[n];
                ez[n] = static_cast<float>(
                    lut.ca[m] * ez[n] +
                    lut.cb[m] * (px.inv_ke[i] * (hy[n] - hy[hy.index(i - 1, j, 0)]) -
                                 idye * (hx[n] - hx[hx.index(i, j - 1, 0)])));
            }
        }
        update_pmc_walls();
    }

    // Magnetic-mirror walls: the wall-tangential E lives on the symmetry
    // plane and sees a doubled one-sided transverse curl (the mirrored H
    // sample is the negative of the adjacent one).
    void update_pmc_walls() {
        for (int side = 0; side < 2; ++side) {
            if (side == 0 ? pmc_y_lo : pmc_y_hi) {
                const std::size_t j = side == 0 ? 0 : ny;
                const std::size_t jh = side == 0 ? 0 : ny - 1;
                const double sgn = side == 0 ? 1.0 : -1.0;
#pragma omp parallel for schedule(static)
                for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
                    const std::size_t k = static_cast<std::size_t>(kk);
                    if (k >= 1 && k < nz) {
                        const double idze = pz.inv_ke[k];
                        for (std::size_t i = 0; i < nx; ++i) {
                            const std::size_t n = ex.index(i, j, k);
                            const std::uint16_t m = mex[n];
                            ex[n] = static_cast<float>(
                                lut.ca[m] * ex[n] +
                                lut.cb[m] * (sgn * 2.0 / dy * hz(i, jh, k) -
                                             idze * (hy(i, j, k) - hy(i, j, k - 1))));
                        }
                    }
                    if (k < nz) {
                        for (std::size_t i = 1; i < nx; ++i) {
                            const std::size_t n = ez.index(i, j, k);
                            const std::uint16_t m = mez[n];
                            ez[n] = static_cast<float>(
                                lut.ca[m] * ez[n] +
                                lut.cb[m] * (px.inv_ke[i] * (hy(i, j, k) - hy(i - 1, j, k)) -
                                             sgn * 2.0 / dy * hx(i, jh, k)));
                        }
                    }
                }
            }
            if (side == 0 ? pmc_x_lo : pmc_x_hi) {
                const std::size_t i = side == 0 ? 0 : nx;
                const std::size_t ih = side == 0 ? 0 : nx - 1;
                const double sgn = side == 0 ? 1.0 : -1.0;
#pragma omp parallel for schedule(static)
                for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
                    const std::size_t k = static_cast<std::size_t>(kk);
                    if (k >= 1 && k < nz) {
                        const double idze = pz.inv_ke[k];
                        for (std::size_t j = 0; j < ny; ++j) {
                            const std::size_t n = ey.index(i, j, k);
                            const std::uint16_t m = mey[n];
                            ey[n] = static_cast<float>(
                                lut.ca[m] * ey[n] +
                                lut.cb[m] * (idze * (hx(i, j, k) - hx(i, j, k - 1)) -
                                             sgn * 2.0 / dx * hz(ih, j, k)));
                        }
                    }
                    if (k < nz) {
                        for (std::size_t j = 1; j < ny; ++j) {
                            const std::size_t n = ez.index(i, j, k);
                            const std::uint16_t m = mez[n];
                            ez[n] = static_cast<float>(
                                lut.ca[m] * ez[n] +
                                lut.cb[m] * (sgn * 2.0 / dx * hy(ih, j, k) -
                                             py.inv_ke[j] * (hx(i, j, k) - hx(i, j - 1, k))));
                        }
                    }
                }
            }
            if (side == 0 ? pmc_z_lo : pmc_z_hi) {
                const std::size_t k = side == 0 ? 0 : nz;
                const std::size_t kh = side == 0 ? 0 : nz - 1;
                const double sgn = side == 0 ? 1.0 : -1.0;
#pragma omp parallel for schedule(static)
                for (long jj = 0; jj < static_cast<long>(NY); ++jj) {
                    const std::size_t j = static_cast<std::size_t>(jj);
                    if (j >= 1 && j < ny) {
                        const double idye = py.inv_ke[j];
                        for (std::size_t i = 0; i < nx; ++i) {
                            const std::size_t n = ex.index(i, j, k);
                            const std::uint16_t m = mex[n];
                            ex[n] = static_cast<float>(
                                lut.ca[m] * ex[n] +
                                lut.cb[m] * (idye * (hz(i, j, k) - hz(i, j - 1, k)) -
                                             sgn * 2.0 / dz * hy(i, j, kh)));
                        }
                    }
                    if (j < ny) {
                        for (std::size_t i = 1; i < nx; ++i) {
                            const std::size_t n = ey.index(i, j, k);
                            const std::uint16_t m = mey[n];
                            ey[n] = static_cast<float>(
                                lut.ca[m] * ey[n] +
                                lut.cb[m] * (sgn * 2.0 / dz * hx(i, j, kh) -
                                             px.inv_ke[i] * (hz(i, j, k) - hz(i - 1, j, k))));
                        }
                    }
                }
            }
        }
    }

    // Electric part of the discrete energy, weighted by the edge
    // permittivity recovered from the update coefficients.
    double energy_e_part() {
        partial.assign(NZ, 0.0);
#pragma omp parallel for schedule(static)
        for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
            const std::size_t k = static_cast<std::size_t>(kk);
            double acc = 0.0;
            for (std::size_t j = 0; j < NY; ++j)
                for (std::size_t i = 0; i < NX; ++i) {
                    const std::size_t n = ex.index(i, j, k);
                    if (i < nx && mex[n] != kPecIndex)
                        acc += dt / lut.cb[mex[n]] * static_cast<double>(ex[n]) * ex[n];
                    if (j < ny && mey[n] != kPecIndex)
                        acc += dt / lut.cb[mey[n]] * static_cast<double>(ey[n]) * ey[n];
                    if (k < nz && mez[n] != kPecIndex)
                        acc += dt / lut.cb[mez[n]] * static_cast<double>(ez[n]) * ez[n];
                }
            partial[k] = acc;
        }
        double s = 0.0;
        for (double v : partial) s += v;
        return s;
    }

    // -- absorbing-layer correction passes -----------------------------------

    void pml_e() {
        // x layers: Ey gets -dHz/dx, Ez gets +dHy/dx.
        const auto ex_slab = [&](std::size_t g0, int cells, Array3D<float>& pey,
                                 Array3D<float>& pez) {
            const std::size_t key0 = pmc_z_lo ? 0 : 1;
            const std::size_t key1 = pmc_z_hi ? nz : nz - 1;  // inclusive Ey k range
            const std::size_t jez0 = pmc_y_lo ? 0 : 1;
            const std::size_t jez1 = pmc_y_hi ? ny : ny - 1;  // inclusive Ez j range
#pragma omp parallel for schedule(static)
            for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
                const std::size_t k = static_cast<std::size_t>(kk);
                for (std::size_t j = 0; j <= ny; ++j)
                    for (int li = 0; li <= cells; ++li) {
                        const std::size_t i = g0 + static_cast<std::size_t>(li);
                        if (i < 1 || i >= nx) continue;
                        const double b = px.be[i], c = px.ce[i];
                        if (j < ny && k >= key0 && k <= key1) {
                            const std::size_t n = ey.index(i, j, k);
                            if (mey[n] != kPecIndex) {
                                float& ps = pey(static_cast<std::size_t>(li), j, k);
                                ps = static_cast<float>(
                                    b * ps + c * (hz[n] - hz[hz.index(i - 1, j, k)]) / dx);
                                ey[n] -= lut.cb[mey[n]] * ps;
                            }
                        }
                        if (k < nz && j >= jez0 && j <= jez1) {
                            const std::size_t n = ez.index(i, j, k);
                            if (mez[n] != kPecIndex) {
                                float& ps = pez(static_cast<std::size_t>(li), j, k);
                                ps = static_cast<float>(
                                    b * ps + c * (hy[n] - hy[hy.index(i - 1, j, k)]) / dx);
                                ez[n] += lut.cb[mez[n]] * ps;
                            }
                        }
                    }
            }
        };
        if (px.lo) ex_slab(0, px.lo, p_eyx_lo, p_ezx_lo);
        if (px.hi) ex_slab(nx - static_cast<std::size_t>(px.hi), px.hi, p_eyx_hi, p_ezx_hi);

        // y layers: Ex gets +dHz/dy, Ez gets -dHx/dy.
        const auto ey_slab = [&](std::size_t g0, int cells, Array3D<float>& pex,
                                 Array3D<float>& pez) {
            const std::size_t kex0 = pmc_z_lo ? 0 : 1;
            const std::size_t kex1 = pmc_z_hi ? nz : nz - 1;  // inclusive Ex k range
            const std::size_t iez0 = pmc_x_lo ? 0 : 1;
            const std::size_t iez1 = pmc_x_hi ? nx : nx - 1;  // inclusive Ez i range
#pragma omp parallel for schedule(static)
            for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
                const std::size_t k = static_cast<std::size_t>(kk);
                for (int lj = 0; lj <= cells; ++lj) {
                    const std::size_t j = g0 + static_cast<std::size_t>(lj);
                    if (j < 1 || j >= ny) continue;
                    const double b = py.be[j], c = py.ce[j];
                    for (std::size_t i = 0; i <= nx; ++i) {
                        if (i < nx && k >= kex0 && k <= kex1) {
                            const std::size_t n = ex.index(i, j, k);
                            if (mex[n] != kPecIndex) {
                                float& ps = pex(i, static_cast<std::size_t>(lj), k);
                                ps = static_cast<float>(
                                    b * ps + c * (hz[n] - hz[hz.index(i, j - 1, k)]) / dy);
                                ex[n] += lut.cb[mex[n]] * ps;
                            }
                        }
                        if (k < nz && i >= iez0 && i <= iez1) {
                            const std::size_t n = ez.index(i, j, k);
                            if (mez[n] != kPecIndex) {
                                float& ps = pez(i, static_cast<std::size_t>(lj), k);
                                ps = static_cast<float>(
                                    b * ps + c * (hx[n] - hx[hx.index(i, j - 1, k)]) / dy);
                                ez[n] -= lut.cb[mez[n]] * ps;
                            }
                        }
                    }
                }
            }
        };
        if (py.lo) ey_slab(0, py.lo, p_exy_lo, p_ezy_lo);
        if (py.hi) ey_slab(ny - static_cast<std::size_t>(py.hi), py.hi, p_exy_hi, p_ezy_hi);

        // z layers: Ex gets -dHy/dz, Ey gets +dHx/dz.  Wall rows join in when
        // the transverse wall is a magnetic mirror, since those edges are
        // live unknowns inside the layer.
        const auto ez_slab = [&](std::size_t g0, int cells, Array3D<float>& pex,
                                 Array3D<float>& pey) {
            const std::size_t jx0 = pmc_y_lo ? 0 : 1;
            const std::size_t jx1 = pmc_y_hi ? ny : ny - 1;  // inclusive Ex j range
            const std::size_t iy0 = pmc_x_lo ? 0 : 1;
            const std::size_t iy1 = pmc_x_hi ? nx : nx - 1;  // inclusive Ey i range
#pragma omp parallel for schedule(static)
            for (long lk = 0; lk <= cells; ++lk) {
                const std::size_t k = g0 + static_cast<std::size_t>(lk);
                if (k < 1 || k >= nz) continue;
                const double b = pz.be[k], c = pz.ce[k];
                for (std::size_t j = 0; j <= ny; ++j)
                    for (std::size_t i = 0; i <= nx; ++i) {
                        if (i < nx && j >= jx0 && j <= jx1) {
                            const std::size_t n = ex.index(i, j, k);
                            if (mex[n] != kPecIndex) {
                                float& ps = pex(i, j, static_cast<std::size_t>(lk));
                                ps = static_cast<float>(
                                    b * ps + c * (hy[n] - hy[hy.index(i, j, k - 1)]) / dz);
                                ex[n] -= lut.cb[mex[n]] * ps;
                            }
                        }
                        if (j < ny && i >= iy0 && i <= iy1) {
                            const std::size_t n = ey.index(i, j, k);
                            if (mey[n] != kPecIndex) {
                                float& ps = pey(i, j, static_cast<std::size_t>(lk));
                                ps = static_cast<float>(
                                    b * ps + c * (hx[n] - hx[hx.index(i, j, k - 1)]) / dz);
                                ey[n] += lut.cb[mey[n]] * ps;
                            }
                        }
                    }
            }
        };
        if (pz.lo) ez_slab(0, pz.lo, p_exz_lo, p_eyz_lo);
        if (pz.hi) ez_slab(nz - static_cast<std::size_t>(pz.hi), pz.hi, p_exz_hi, p_eyz_hi);
    }

    void pml_h() {
        const double db = dt / PhysicalConstants::mu0;
        // x layers: Hy gets +dEz/dx, Hz gets -dEy/dx (half positions).
        const auto hx_slab = [&](std::size_t g0, int cells, Array3D<float>& phy,
                                 Array3D<float>& phz) {
#pragma omp parallel for schedule(static)
            for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
                const std::size_t k = static_cast<std::size_t>(kk);
                for (std::size_t j = 0; j <= ny; ++j)
                    for (int li = 0; li < cells; ++li) {
                        const std::size_t i = g0 + static_cast<std::size_t>(li);
                        const double b = px.bh[i], c = px.ch[i];
                        if (k < nz) {  // Hy: j in [0..ny], k in [0..nz-1]
                            const std::size_t n = hy.index(i, j, k);
                            float& ps = phy(static_cast<std::size_t>(li), j, k);
                            ps = static_cast<float>(
                                b * ps + c * (ez[ez.index(i + 1, j, k)] - ez[n]) / dx);
                            hy[n] += static_cast<float>(db * ps);
                        }
                        if (j < ny) {  // Hz: j in [0..ny-1], k in [0..nz]
                            const std::size_t n = hz.index(i, j, k);
                            float& ps = phz(static_cast<std::size_t>(li), j, k);
                            ps = static_cast<float>(
                                b * ps + c * (ey[ey.index(i + 1, j, k)] - ey[n]) / dx);
                            hz[n] -= static_cast<float>(db * ps);
                        }
                    }
            }
        };
        if (px.lo) hx_slab(0, px.lo, p_hyx_lo, p_hzx_lo);
        if (px.hi) hx_slab(nx - static_cast<std::size_t>(px.hi), px.hi, p_hyx_hi, p_hzx_hi);

        // y layers: Hx gets -dEz/dy, Hz gets +dEx/dy.
        const auto hy_slab = [&](std::size_t g0, int cells, Array3D<float>& phx,
                                 Array3D<float>& phz) {
#pragma omp parallel for schedule(static)
            for (long kk = 0; kk < static_cast<long>(NZ); ++kk) {
                const std::size_t k = static_cast<std::size_t>(kk);
                for (int lj = 0; lj < cells; ++lj) {
                    const std::size_t j = g0 + static_cast<std::size_t>(lj);
                    const double b = py.bh[j], c = py.ch[j];
                    for (std::size_t i = 0; i <= nx; ++i) {
                        if (k < nz) {  // Hx: i in [0..nx], k in [0..nz-1]
                            const std::size_t n = hx.index(i, j, k);
                            float& ps = phx(i, static_cast<std::size_t>(lj), k);
                            ps = static_cast<float>(
                                b * ps + c * (ez[ez.index(i, j + 1, k)] - ez[n]) / dy);
                            hx[n] -= static_cast<float>(db * ps);
                        }
                        if (i < nx) {  // Hz: i in [0..nx-1], k in [0..nz]
                            const std::size_t n = hz.index(i, j, k);
                            float& ps = phz(i, static_cast<std::size_t>(lj), k);
                            ps = static_cast<float>(
                                b * ps + c * (ex[ex.index(i, j + 1, k)] - ex[n]) / dy);
                            hz[n] += static_cast<float>(db * ps);
                        }
                    }
                }
            }
        };
        if (py.lo) hy_slab(0, py.lo, p_hxy_lo, p_hzy_lo);
        if (py.hi) hy_slab(ny - static_cast<std::size_t>(py.hi), py.hi, p_hxy_hi, p_hzy_hi);

        // z layers: Hx gets +dEy/dz, Hy gets -dEx/dz.
        const auto hz_slab = [&](std::size_t g0, int cells, Array3D<float>& phx,
                                 Array3D<float>& phy) {
#pragma omp parallel for schedule(static)
            for (long lk = 0; lk < cells; ++lk) {
                const std::size_t k = g0 + static_cast<std::size_t>(lk);
                const double b = pz.bh[k], c = pz.ch[k];
                for (std::size_t j = 0; j <= ny; ++j)
                    for (std::size_t i = 0; i <= nx; ++i) {
                        if (j < ny) {  // Hx: i in [0..nx], j in [0..ny-1]
                            const std::size_t n = hx.index(i, j, k);
                            float& ps = phx(i, j, static_cast<std::size_t>(lk));
                            ps = static_cast<float>(
                                b * ps + c * (ey[ey.index(i, j, k + 1)] - ey[n]) / dz);
                            hx[n] += static_cast<float>(db * ps);
                        }
                        if (i < nx) {  // Hy: i in [0..nx-1], j in [0..ny]
                            const std::size_t n = hy.index(i, j, k);
                            float& ps = phy(i, j, static_cast<std::size_t>(lk));
                            ps = static_cast<float>(
                                b * ps + c * (ex[ex.index(i, j, k + 1)] - ex[n]) / dz);
                            hy[n] -= static_cast<float>(db * ps);
                        }
                    }
            }
        };
        if (pz.lo) hz_slab(0, pz.lo, p_hxz_lo, p_hyz_lo);
        if (pz.hi) hz_slab(nz - static_cast<std::size_t>(pz.hi), pz.hi, p_hxz_hi, p_hyz_hi);
    }

    // -- first-order radiating boundary ------------------------------------

    void mur_capture() {
        const auto cap = [&](int f, int axis, std::size_t wall, std::size_t in) {
            MurFace& mf = mur[f];
            if (!mf.active) return;
            if (axis == 0) {
                for (std::size_t k = 0; k < NZ; ++k)
                    for (std::size_t j = 0; j < NY; ++j) {
                        const std::size_t s = j + NY * k;
                        mf.prev_wall_a[s] = ey(wall, j, k);
                        mf.prev_in_a[s] = ey(in, j, k);
                        mf.prev_wall_b[s] = ez(wall, j, k);
                        mf.prev_in_b[s] = ez(in, j, k);
                    }
            } else if (axis == 1) {
                for (std::size_t k = 0; k < NZ; ++k)
                    for (std::size_t i = 0; i < NX; ++i) {
                        const std::size_t s = i + NX * k;
                        mf.prev_wall_a[s] = ex(i, wall, k);
                        mf.prev_in_a[s] = ex(i, in, k);
                        mf.prev_wall_b[s] = ez(i, wall, k);
                        mf.prev_in_b[s] = ez(i, in, k);
                    }
            } else {
                for (std::size_t j = 0; j < NY; ++j)
                    for (std::size_t i = 0; i < NX; ++i) {
                        const std::size_t s = i + NX * j;
                        mf.prev_wall_a[s] = ex(i, j, wall);
                        mf.prev_in_a[s] = ex(i, j, in);
                        mf.prev_wall_b[s] = ey(i, j, wall);
                        mf.prev_in_b[s] = ey(i, j, in);
                    }
            }
        };
        cap(0, 0, 0, 1); cap(1, 0, nx, nx - 1);
        cap(2, 1, 0, 1); cap(3, 1, ny, ny - 1);
        cap(4, 2, 0, 1); cap(5, 2, nz, nz - 1);
    }

    void mur_apply() {
        const auto apply = [&](int f, int axis, std::size_t wall, std::size_t in, double delta) {
            MurFace& mf = mur[f];
            if (!mf.active) return;
            const double cdt = PhysicalConstants::c * dt;
            const double g = (cdt - delta) / (cdt + delta);
            if (axis == 0) {
                for (std::size_t k = 0; k < NZ; ++k)
                    for (std::size_t j = 0; j < NY; ++j) {
                        const std::size_t s = j + NY * k;
                        if (j < ny)
                            ey(wall, j, k) = static_cast<float>(
                                mf.prev_in_a[s] + g * (ey(in, j, k) - mf.prev_wall_a[s]));
                        if (k < nz)
                            ez(wall, j, k) = static_cast<float>(
                                mf.prev_in_b[s] + g * (ez(in, j, k) - mf.prev_wall_b[s]));
                    }
            } else if (axis == 1) {
                for (std::size_t k = 0; k < NZ; ++k)
                    for (std::size_t i = 0; i < NX; ++i) {
                        const std::size_t s = i + NX * k;
                        if (i < nx)
                            ex(i, wall, k) = static_cast<float>(
                                mf.prev_in_a[s] + g * (ex(i, in, k) - mf.prev_wall_a[s]));
                        if (k < nz)
                            ez(i, wall, k) = static_cast<float>(
                                mf.prev_in_b[s] + g * (ez(i, in, k) - mf.prev_wall_b[s]));
                    }
            } else {
                for (std::size_t j = 0; j < NY; ++j)
                    for (std::size_t i = 0; i < NX; ++i) {
                        const std::size_t s = i + NX * j;
                        if (i < nx)
                            ex(i, j, wall) = static_cast<float>(
                                mf.prev_in_a[s] + g * (ex(i, j, in) - mf.prev_wall_a[s]));
                        if (j < ny)
                            ey(i, j, wall) = static_cast<float>(
                                mf.prev_in_b[s] + g * (ey(i, j, in) - mf.prev_wall_b[s]));
                    }
            }
        };
        apply(0, 0, 0, 1, dx); apply(1, 0, nx, nx - 1, dx);
        apply(2, 1, 0, 1, dy); apply(3, 1, ny, ny - 1, dy);
        apply(4, 2, 0, 1, dz); apply(5, 2, nz, nz - 1, dz);
    }

    // -- port quantities ------------------------------------------------------

    double port_voltage() const {
        const auto& p = mg.port;
        const double dw = p.axis == 0 ? dx : p.axis == 1 ? dy : dz;
        const float e = p.axis == 0   ? ex(p.i, p.j, p.k)
                        : p.axis == 1 ? ey(p.i, p.j, p.k)
                                      : ez(p.i, p.j, p.k);
        return -p.sign * static_cast<double>(e) * dw;
    }

    // Conduction + displacement current through the dual face around the
    // source edge, positive along +axis, from the four surrounding H samples.
    double port_current() const {
        const auto& p = mg.port;
        const std::size_t i = p.i, j = p.j, k = p.k;
        double loop = 0.0;
        if (p.axis == 2) {
            loop = (hx(i, j - 1, k) - hx(i, j, k)) * dx + (hy(i, j, k) - hy(i - 1, j, k)) * dy;
        } else if (p.axis == 0) {
            loop = (hy(i, j, k - 1) - hy(i, j, k)) * dy + (hz(i, j, k) - hz(i, j - 1, k)) * dz;
        } else {
            loop = (hz(i - 1, j, k) - hz(i, j, k)) * dz + (hx(i, j, k) - hx(i, j, k - 1)) * dx;
        }
        return p.sign * loop;
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// run_simulation
// ---------------------------------------------------------------------------

TimeSeriesRecord run_simulation(const MaterialGrid& mgrid, const ProbeRequest& probes,
                                const SolverSettings& settings) {
#ifdef _OPENMP
    if (settings.threads > 0) omp_set_num_threads(settings.threads);
#endif
    Solver sv(mgrid, settings);
    const std::size_t nx = sv.nx, ny = sv.ny, nz = sv.nz;
    const double dt = sv.dt;

    TimeSeriesRecord rec;
    rec.dt = dt;
    rec.t_first_v = (static_cast<double>(settings.start_step) + 1.0) * dt;
    rec.t_first_i = (static_cast<double>(settings.start_step) + 0.5) * dt;

    // Decimation stride for the running transforms; the excitation carries no
    // energy above its band, so quarter-period sampling of the highest
    // requested frequency is alias-free.
    double f_top = 0.0;
    for (double f : probes.volume_freqs) f_top = std::max(f_top, f);
    for (double f : probes.surface_freqs) f_top = std::max(f_top, f);
    std::size_t stride = probes.dft_stride;
    if (stride == 0)
        stride = f_top > 0.0
                     ? std::max<std::size_t>(1, static_cast<std::size_t>(1.0 / (4.0 * f_top * dt)))
                     : 1;

    for (double f : probes.volume_freqs) {
        VolumePhasors vp;
        vp.frequency = f;
        vp.box = probes.volume_box;
        if (vp.box[1] >= nx || vp.box[3] >= ny || vp.box[5] >= nz || vp.box[0] > vp.box[1] ||
            vp.box[2] > vp.box[3] || vp.box[4] > vp.box[5])
            throw InvalidArgument("volume phasor box out of range");
        const std::size_t bx = vp.box[1] - vp.box[0] + 2;
        const std::size_t by = vp.box[3] - vp.box[2] + 2;
        const std::size_t bz = vp.box[5] - vp.box[4] + 2;
        vp.ex.resize(bx, by, bz);
        vp.ey.resize(bx, by, bz);
        vp.ez.resize(bx, by, bz);
        rec.volume.push_back(std::move(vp));
    }

    const auto& sb = probes.surface_box;
    if (!probes.surface_freqs.empty()) {
        const std::size_t lo = static_cast<std::size_t>(mgrid.grid.pml_cells) + 1;
        if (sb[0] < lo || sb[2] < lo || sb[4] < lo || sb[1] + lo > nx || sb[3] + lo > ny ||
            sb[5] + lo > nz || sb[0] >= sb[1] || sb[2] >= sb[3] || sb[4] >= sb[5])
            throw PostProcessError("far-field surface must lie strictly inside the absorber");
        // Equivalence currents are only meaningful when the surface encloses
        // the whole radiator, and the sampling stencil reaches one cell either
        // side of each face, so every conducting cell, sheet face, wire edge
        // and the port edge must sit inside the box with one cell to spare.
        const std::size_t lo_n[3] = {sb[0], sb[2], sb[4]};
        const std::size_t hi_n[3] = {sb[1], sb[3], sb[5]};
        const auto cell_enclosed = [&](std::size_t ci, std::size_t cj, std::size_t ck) {
            const std::size_t c3[3] = {ci, cj, ck};
            for (int w = 0; w < 3; ++w)
                if (c3[w] < lo_n[w] + 1 || c3[w] + 2 > hi_n[w]) return false;
            return true;
        };
        const auto require_enclosed = [&](std::size_t ci, std::size_t cj, std::size_t ck) {
            if (!cell_enclosed(ci, cj, ck))
                throw PostProcessError(
                    "far-field surface must enclose every conductor with one cell of "
                    "clearance");
        };
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t k = 0; k < nz; ++k)
                    if (mgrid.conductor(i, j, k)) require_enclosed(i, j, k);
        // A sheet face bounds two cells along its normal; both must qualify.
        const auto check_sheet = [&](const Array3D<std::uint8_t>& faces, int axis) {
            for (std::size_t i = 0; i < faces.nx(); ++i)
                for (std::size_t j = 0; j < faces.ny(); ++j)
                    for (std::size_t k = 0; k < faces.nz(); ++k) {
                        if (!faces(i, j, k)) continue;
                        std::size_t c3[3] = {i, j, k};
                        require_enclosed(c3[0], c3[1], c3[2]);
                        if (c3[axis] == 0)
                            throw PostProcessError(
                                "far-field surface must enclose every conductor with one "
                                "cell of clearance");
                        --c3[axis];
                        require_enclosed(c3[0], c3[1], c3[2]);
                    }
        };
        check_sheet(mgrid.sheets.x, 0);
        check_sheet(mgrid.sheets.y, 1);
        check_sheet(mgrid.sheets.z, 2);
        // A grid edge touches the four cells around it plus the one it spans.
        const auto check_edge = [&](int axis, std::size_t i, std::size_t j, std::size_t k) {
            const int u = (axis + 1) % 3, v = (axis + 2) % 3;
            const std::size_t n3[3] = {i, j, k};
            for (std::size_t du = 0; du < 2; ++du)
                for (std::size_t dv = 0; dv < 2; ++dv) {
                    std::size_t c3[3] = {n3[0], n3[1], n3[2]};
                    if (c3[u] < 1 + du || c3[v] < 1 + dv)
                        throw PostProcessError(
                            "far-field surface must enclose every conductor with one "
                            "cell of clearance");
                    c3[u] -= du;
                    c3[v] -= dv;
                    require_enclosed(c3[0], c3[1], c3[2]);
                }
        };
        for (const auto& w : mgrid.wires) check_edge(w.axis, w.i, w.j, w.k);
        if (mgrid.has_port)
            check_edge(mgrid.port.axis, mgrid.port.i, mgrid.port.j, mgrid.port.k);
    }
    for (double f : probes.surface_freqs) {
        SurfacePhasors sp;
        sp.frequency = f;
        sp.box = sb;
        for (int face = 0; face < 6; ++face) {
            SurfacePhasors::Face fc;
            fc.axis = face / 2;
            fc.positive = face % 2;
            const int u = (fc.axis + 1) % 3, v = (fc.axis + 2) % 3;
            const std::size_t lo_n[3] = {sb[0], sb[2], sb[4]};
            const std::size_t hi_n[3] = {sb[1], sb[3], sb[5]};
            fc.plane = fc.positive ? hi_n[fc.axis] : lo_n[fc.axis];
            fc.nu = hi_n[u] - lo_n[u];
            fc.nv = hi_n[v] - lo_n[v];
            for (int c = 0; c < 3; ++c) {
                fc.e[c].assign(fc.nu * fc.nv, {0.0f, 0.0f});
                fc.h[c].assign(fc.nu * fc.nv, {0.0f, 0.0f});
            }
            sp.faces.push_back(std::move(fc));
        }
        rec.surface.push_back(std::move(sp));
    }

    rec.point_series.assign(probes.point_probes.size(), {});
    for (const auto& pp : probes.point_probes)
        if (pp.i >= sv.NX || pp.j >= sv.NY || pp.k >= sv.NZ)
            throw InvalidArgument("point probe outside the grid");

    const double amp_ref = [&] {
        double a = 0.0;
        if (mgrid.has_port) a = std::max(a, std::abs(mgrid.port.excitation.amplitude));
        for (const auto& s : settings.soft_sources)
            a = std::max(a, std::abs(s.excitation.amplitude));
        return a > 0.0 ? a : 1.0;
    }();
    const double diverge_limit = 1e6 * amp_ref / std::min({sv.dx, sv.dy, sv.dz});

    const double floor_lin = settings.stop.energy_floor_db < 0.0
                                 ? std::pow(10.0, settings.stop.energy_floor_db / 20.0)
                                 : 0.0;
    double v_peak = 0.0;
    const double t_source_done = mgrid.has_port ? 2.0 * mgrid.port.excitation.delay() : 0.0;

    const std::size_t max_steps = settings.stop.max_steps;
    std::size_t step = 0;
    for (; step < max_steps; ++step) {
        const double t_h = (static_cast<double>(settings.start_step + step) + 0.5) * dt;
        const double t_e = (static_cast<double>(settings.start_step + step) + 1.0) * dt;

        double e_part = 0.0;
        if (probes.energy_history) e_part = sv.energy_e_part();
        const double h_part = sv.update_h(probes.energy_history);
        if (probes.energy_history) rec.energy.push_back(0.5 * (e_part + h_part) * sv.dv);

        sv.pml_h();
        for (const auto& wc : sv.wire_fix) {
            float* h = wc.h_comp == 0   ? sv.hx.data()
                       : wc.h_comp == 1 ? sv.hy.data()
                                        : sv.hz.data();
            const float* e = wc.e_comp == 0   ? sv.ex.data()
                             : wc.e_comp == 1 ? sv.ey.data()
                                              : sv.ez.data();
            h[wc.h_index] += wc.coeff * e[wc.e_index];
        }

        if (mgrid.has_port) {
            rec.i_port.push_back(sv.port_current());
            rec.v_source.push_back(mgrid.port.excitation.value(t_h));
        }

        sv.mur_capture();
        sv.update_e();
        sv.pml_e();

        if (mgrid.has_port) {
            const auto& p = mgrid.port;
            auto& arr = p.axis == 0 ? sv.ex : p.axis == 1 ? sv.ey : sv.ez;
            const double vs = p.excitation.value(t_h);
            arr(p.i, p.j, p.k) -=
                static_cast<float>(sv.lut.cb[sv.src_lut] * vs * sv.src_scale * p.sign);
        }
        for (const auto& ss : settings.soft_sources) {
            auto& arr = ss.axis == 0 ? sv.ex : ss.axis == 1 ? sv.ey : sv.ez;
            arr(ss.i, ss.j, ss.k) += static_cast<float>(ss.excitation.value(t_e));
        }
        sv.mur_apply();

        if (mgrid.has_port) {
            const double v = sv.port_voltage();
            rec.v_port.push_back(v);
            v_peak = std::max(v_peak, std::abs(v));
        }

        if ((!rec.volume.empty() || !rec.surface.empty()) && step % stride == 0) {
            const double w = static_cast<double>(stride) * dt;
            for (auto& vp : rec.volume) {
                const double ph = -2.0 * PhysicalConstants::pi * vp.frequency * t_e;
                const std::complex<float> fac(static_cast<float>(w * std::cos(ph)),
                                              static_cast<float>(w * std::sin(ph)));
                const std::size_t i0 = vp.box[0], j0 = vp.box[2], k0 = vp.box[4];
#pragma omp parallel for schedule(static)
                for (long kk = 0; kk < static_cast<long>(vp.ex.nz()); ++kk) {
                    const std::size_t k = static_cast<std::size_t>(kk);
                    for (std::size_t j = 0; j < vp.ex.ny(); ++j)
                        for (std::size_t i = 0; i < vp.ex.nx(); ++i) {
                            // Each component has one fewer slot along its own
                            // axis; skip the padding slot there.
                            if (i0 + i < sv.nx)
                                vp.ex(i, j, k) += fac * sv.ex(i0 + i, j0 + j, k0 + k);
                            if (j0 + j < sv.ny)
                                vp.ey(i, j, k) += fac * sv.ey(i0 + i, j0 + j, k0 + k);
                            if (k0 + k < sv.nz)
                                vp.ez(i, j, k) += fac * sv.ez(i0 + i, j0 + j, k0 + k);
                        }
                }
            }
            for (auto& sp : rec.surface) {
                const double phe = -2.0 * PhysicalConstants::pi * sp.frequency * t_e;
                const double phh = -2.0 * PhysicalConstants::pi * sp.frequency * t_h;
                const std::complex<float> fe(static_cast<float>(w * std::cos(phe)),
                                             static_cast<float>(w * std::sin(phe)));
                const std::complex<float> fh(static_cast<float>(w * std::cos(phh)),
                                             static_cast<float>(w * std::sin(phh)));
                for (auto& fc : sp.faces) {
                    const int w_ax = fc.axis, u = (w_ax + 1) % 3, v = (w_ax + 2) % 3;
                    const std::size_t lo_n[3] = {sp.box[0], sp.box[2], sp.box[4]};
                    const std::size_t plane = fc.plane;
#pragma omp parallel for schedule(static)
                    for (long vv = 0; vv < static_cast<long>(fc.nv); ++vv) {
                        std::size_t idx3[3];
                        for (std::size_t uu = 0; uu < fc.nu; ++uu) {
                            idx3[w_ax] = plane;
                            idx3[u] = lo_n[u] + uu;
                            idx3[v] = lo_n[v] + static_cast<std::size_t>(vv);
                            const std::size_t i = idx3[0], j = idx3[1], k = idx3[2];
                            const std::size_t s = uu + fc.nu * static_cast<std::size_t>(vv);
                            float et[3] = {0, 0, 0};
                            float ht[3] = {0, 0, 0};
                            // Tangential E: two-edge average onto the
                            // face-cell center; tangential H: four-sample
                            // average across the plane.
                            if (w_ax == 2) {
                                et[0] = 0.5f * (sv.ex(i, j, k) + sv.ex(i, j + 1, k));
                                et[1] = 0.5f * (sv.ey(i, j, k) + sv.ey(i + 1, j, k));
                                ht[0] = 0.25f * (sv.hx(i, j, k - 1) + sv.hx(i, j, k) +
                                                 sv.hx(i + 1, j, k - 1) + sv.hx(i + 1, j, k));
                                ht[1] = 0.25f * (sv.hy(i, j, k - 1) + sv.hy(i, j, k) +
                                                 sv.hy(i, j + 1, k - 1) + sv.hy(i, j + 1, k));
                            } else if (w_ax == 0) {
                                et[1] = 0.5f * (sv.ey(i, j, k) + sv.ey(i, j, k + 1));
                                et[2] = 0.5f * (sv.ez(i, j, k) + sv.ez(i, j + 1, k));
                                ht[1] = 0.25f * (sv.hy(i - 1, j, k) + sv.hy(i, j, k) +
                                                 sv.hy(i - 1, j + 1, k) + sv.hy(i, j + 1, k));
                                ht[2] = 0.25f * (sv.hz(i - 1, j, k) + sv.hz(i, j, k) +
                                                 sv.hz(i - 1, j, k + 1) + sv.hz(i, j, k + 1));
                            } else {
                                et[2] = 0.5f * (sv.ez(i, j, k) + sv.ez(i + 1, j, k));
                                et[0] = 0.5f * (sv.ex(i, j, k) + sv.ex(i, j, k + 1));
                                ht[2] = 0.25f * (sv.hz(i, j - 1, k) + sv.hz(i, j, k) +
                                                 sv.hz(i, j - 1, k + 1) + sv.hz(i, j, k + 1));
                                ht[0] = 0.25f * (sv.hx(i, j - 1, k) + sv.hx(i, j, k) +
                                                 sv.hx(i + 1, j - 1, k) + sv.hx(i + 1, j, k));
                            }
                            for (int cmp = 0; cmp < 3; ++cmp) {
                                fc.e[cmp][s] += fe * et[cmp];
                                fc.h[cmp][s] += fh * ht[cmp];
                            }
                        }
                    }
                }
            }
        }

        for (std::size_t pi = 0; pi < probes.point_probes.size(); ++pi) {
            const auto& pp = probes.point_probes[pi];
            const auto& arr = pp.axis == 0 ? sv.ex : pp.axis == 1 ? sv.ey : sv.ez;
            rec.point_series[pi].push_back(arr(pp.i, pp.j, pp.k));
        }

        if (settings.divergence_check_interval > 0 &&
            (step + 1) % settings.divergence_check_interval == 0) {
            float peak = 0.0f;
#pragma omp parallel for schedule(static) reduction(max : peak)
            for (long n = 0; n < static_cast<long>(sv.ex.size()); ++n) {
                const std::size_t m = static_cast<std::size_t>(n);
                peak = std::max(peak, std::abs(sv.ex[m]));
                peak = std::max(peak, std::abs(sv.ey[m]));
                peak = std::max(peak, std::abs(sv.ez[m]));
            }
            if (!(static_cast<double>(peak) < diverge_limit))
                throw DivergedError("field update diverged at step " + std::to_string(step + 1),
                                    step + 1);
        }

        // Early stop once the port response has rung down below the floor.
        if (mgrid.has_port && floor_lin > 0.0 && t_e > t_source_done &&
            rec.v_port.size() >= 1024 && (step + 1) % 256 == 0) {
            double recent = 0.0;
            for (std::size_t s2 = rec.v_port.size() - 1024; s2 < rec.v_port.size(); ++s2)
                recent = std::max(recent, std::abs(rec.v_port[s2]));
            if (recent < v_peak * floor_lin) {
                ++step;
                break;
            }
        }
    }

    rec.steps = step;
    rec.metadata["grid"] =
        std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
    rec.metadata["dt_s"] = std::to_string(dt);
    rec.metadata["steps"] = std::to_string(rec.steps);
    rec.metadata["dft_stride"] = std::to_string(stride);
    rec.metadata["threads"] = std::to_string(settings.threads);

    if (probes.capture_final_fields) {
        FieldSnapshot f;
        f.nx = sv.NX;
        f.ny = sv.NY;
        f.nz = sv.NZ;
        f.ex = sv.ex; f.ey = sv.ey; f.ez = sv.ez;
        f.hx = sv.hx; f.hy = sv.hy; f.hz = sv.hz;
        rec.final_fields = std::move(f);
    }
    return rec;
}

}  // namespace emsim
