#include "emsim/voxelize.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include "emsim/errors.hpp"

namespace emsim {

namespace {

enum class Render { Dielectric, VolumetricPec, SheetPec, ShellPec, ThinWire, Cut };

double cell_size(const GridSpec& g, int axis) {
    return axis == 0 ? g.dx : axis == 1 ? g.dy : g.dz;
}

double origin_of(const GridSpec& g, int axis) {
    return axis == 0 ? g.origin.x : axis == 1 ? g.origin.y : g.origin.z;
}

std::size_t count_of(const GridSpec& g, int axis) {
    return axis == 0 ? g.nx : axis == 1 ? g.ny : g.nz;
}

double coord_of(const Vec3& p, int axis) {
    return axis == 0 ? p.x : axis == 1 ? p.y : p.z;
}

// Thinnest axis of a box (sheet normal for thin conducting boxes).
int box_thin_axis(const Shape& s) {
    const double ex = s.box_max.x - s.box_min.x;
    const double ey = s.box_max.y - s.box_min.y;
    const double ez = s.box_max.z - s.box_min.z;
    if (ex <= ey && ex <= ez) return 0;
    if (ey <= ex && ey <= ez) return 1;
    return 2;
}

Render classify(const Shape& s, const GridSpec& g, bool bent_scene) {
    if (s.sheet_cut) return Render::Cut;
    const bool bent = bent_scene && s.bendable;
    if (!s.material.pec) return Render::Dielectric;
    if (s.kind == ShapeKind::Wire) {
        // Below 1.5 cells a cylinder through a node line can miss every cell
        // centre, so fall back to the subcell thin-wire model there.
        const double perp = std::min({g.dx, g.dy, g.dz});
        return s.diameter >= 1.5 * perp ? Render::VolumetricPec : Render::ThinWire;
    }
    if (s.is_sheet()) return bent ? Render::ShellPec : Render::SheetPec;
    if (s.kind == ShapeKind::Box) {
        const int w = box_thin_axis(s);
        const double ext = coord_of(s.box_max, w) - coord_of(s.box_min, w);
        if (ext < cell_size(g, w)) return bent ? Render::ShellPec : Render::SheetPec;
    }
    return Render::VolumetricPec;
}

// Sheet normal and plane position of a SheetPec / ShellPec shape.
void sheet_plane(const Shape& s, int& axis, double& plane) {
    if (s.is_sheet()) {
        axis = s.axis;
        plane = coord_of(s.center, axis);
    } else {
        axis = box_thin_axis(s);
        plane = 0.5 * (coord_of(s.box_min, axis) + coord_of(s.box_max, axis));
    }
}

struct CutTest {
    const std::vector<Shape>* shapes;
    std::vector<std::size_t> cut_indices;
    // True if a higher-priority cut covers the point (planar frame).
    bool wins(const Vec3& planar, int priority, std::size_t idx) const {
        for (std::size_t c : cut_indices) {
            const Shape& cut = (*shapes)[c];
            if (std::make_pair(cut.priority, c) <= std::make_pair(priority, idx)) continue;
            if (cut.contains(planar)) return true;
        }
        return false;
    }
};

long snap_index(double coord, double origin, double h) {
    return std::lround((coord - origin) / h);
}

} // namespace

MaterialGrid voxelize(const Scene& scene, const GridSpec& grid, double budget_bytes) {
    validate_scene(scene);
    if (grid.nx == 0 || grid.ny == 0 || grid.nz == 0)
        throw InvalidArgument("voxelize: empty grid");

    const double est_bytes = static_cast<double>(grid.cells()) * 64.0;
    if (est_bytes > budget_bytes) {
        throw MemoryBudgetError("voxelize: estimated footprint " +
                                std::to_string(est_bytes / 1.0e6) + " MB (grid " +
                                std::to_string(grid.nx) + "x" + std::to_string(grid.ny) + "x" +
                                std::to_string(grid.nz) + ") exceeds the budget of " +
                                std::to_string(budget_bytes / 1.0e6) + " MB");
    }

    MaterialGrid mg;
    mg.grid = grid;
    mg.eps_r.resize(grid.nx, grid.ny, grid.nz, static_cast<float>(scene.background.eps_r));
    mg.sigma.resize(grid.nx, grid.ny, grid.nz, static_cast<float>(scene.background.sigma));
    mg.rho.resize(grid.nx, grid.ny, grid.nz, static_cast<float>(scene.background.rho));
    mg.flags.resize(grid.nx, grid.ny, grid.nz, 0);
    mg.sheets.x.resize(grid.nx + 1, grid.ny, grid.nz, 0);
    mg.sheets.y.resize(grid.nx, grid.ny + 1, grid.nz, 0);
    mg.sheets.z.resize(grid.nx, grid.ny, grid.nz + 1, 0);
    mg.notes = scene.notes;

    const bool bent = scene.bend.enabled;
    std::vector<Render> render(scene.shapes.size());
    CutTest cuts{&scene.shapes, {}};
    for (std::size_t idx = 0; idx < scene.shapes.size(); ++idx) {
        render[idx] = classify(scene.shapes[idx], grid, bent);
        if (render[idx] == Render::Cut) cuts.cut_indices.push_back(idx);
    }

    // --- cell-center classification -------------------------------------
#pragma omp parallel for schedule(static)
    for (long kk = 0; kk < static_cast<long>(grid.nz); ++kk) {
        const std::size_t k = static_cast<std::size_t>(kk);
        for (std::size_t j = 0; j < grid.ny; ++j) {
            for (std::size_t i = 0; i < grid.nx; ++i) {
                const Vec3 center = grid.cell_center(i, j, k);
                const Vec3 planar = bent ? bend_inverse(scene.bend, center) : center;
                int best_pr = INT_MIN;
                long best_idx = -1;
                bool conductor = false;
                for (std::size_t idx = 0; idx < scene.shapes.size(); ++idx) {
                    const Shape& s = scene.shapes[idx];
                    const Vec3& p = (bent && s.bendable) ? planar : center;
                    switch (render[idx]) {
                        case Render::Dielectric:
                            if (s.contains(p) &&
                                (s.priority > best_pr ||
                                 (s.priority == best_pr && static_cast<long>(idx) > best_idx))) {
                                best_pr = s.priority;
                                best_idx = static_cast<long>(idx);
                            }
                            break;
                        case Render::VolumetricPec:
                            if (s.contains(p)) conductor = true;
                            break;
                        case Render::ShellPec: {
                            int w;
                            double plane;
                            sheet_plane(s, w, plane);
                            if (s.shell_contains(p, 0.5 * cell_size(grid, w)) &&
                                !cuts.wins(p, s.priority, idx))
                                conductor = true;
                            break;
                        }
                        default:
                            break;
                    }
                }
                if (best_idx >= 0) {
                    const Material& m = scene.shapes[static_cast<std::size_t>(best_idx)].material;
                    mg.eps_r(i, j, k) = static_cast<float>(m.eps_r);
                    mg.sigma(i, j, k) = static_cast<float>(m.sigma);
                    mg.rho(i, j, k) = static_cast<float>(m.rho);
                }
                std::uint8_t f = 0;
                if (conductor) {
                    f |= MaterialGrid::kConductor;
                } else if (mg.rho(i, j, k) > 0.0f) {
                    f |= MaterialGrid::kTissue;
                }
                mg.flags(i, j, k) = f;
            }
        }
    }

    // --- conductor sheets snapped to faces -------------------------------
    for (std::size_t idx = 0; idx < scene.shapes.size(); ++idx) {
        if (render[idx] != Render::SheetPec) continue;
        const Shape& s = scene.shapes[idx];
        int w;
        double plane;
        sheet_plane(s, w, plane);
        const long kp = snap_index(plane, origin_of(grid, w), cell_size(grid, w));
        if (kp < 0 || kp > static_cast<long>(count_of(grid, w))) continue;  // outside the grid
        const int u = (w + 1) % 3, v = (w + 2) % 3;
        Vec3 mn, mx;
        s.bounds(mn, mx);
        const auto range = [&](int ax, double lo, double hi, std::size_t& c0, std::size_t& c1) {
            const double org = origin_of(grid, ax), h = cell_size(grid, ax);
            const long a = static_cast<long>(std::floor((lo - org) / h));
            const long b = static_cast<long>(std::ceil((hi - org) / h));
            c0 = static_cast<std::size_t>(std::clamp<long>(a, 0, static_cast<long>(count_of(grid, ax)) - 1));
            c1 = static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(count_of(grid, ax)) - 1));
        };
        std::size_t u0, u1, v0, v1;
        range(u, coord_of(mn, u), coord_of(mx, u), u0, u1);
        range(v, coord_of(mn, v), coord_of(mx, v), v0, v1);
        const double tol = 0.5 * cell_size(grid, w) * (1.0 + 1e-9);
        for (std::size_t cv = v0; cv <= v1; ++cv) {
            for (std::size_t cu = u0; cu <= u1; ++cu) {
                double coords[3];
                coords[w] = origin_of(grid, w) + static_cast<double>(kp) * cell_size(grid, w);
                coords[u] = origin_of(grid, u) + (static_cast<double>(cu) + 0.5) * cell_size(grid, u);
                coords[v] = origin_of(grid, v) + (static_cast<double>(cv) + 0.5) * cell_size(grid, v);
                const Vec3 p{coords[0], coords[1], coords[2]};
                if (!s.shell_contains(p, tol)) continue;
                if (cuts.wins(p, s.priority, idx)) continue;
                if (w == 0) mg.sheets.x(static_cast<std::size_t>(kp), cu, cv) = 1;
                else if (w == 1) mg.sheets.y(cv, static_cast<std::size_t>(kp), cu) = 1;
                else mg.sheets.z(cu, cv, static_cast<std::size_t>(kp)) = 1;
            }
        }
    }

    // --- thin wires as edge chains ---------------------------------------
    const auto add_wire_chain = [&](const Vec3& pa, const Vec3& pb, double radius) {
        long ia[3], ib[3];
        for (int w = 0; w < 3; ++w) {
            ia[w] = snap_index(coord_of(pa, w), origin_of(grid, w), cell_size(grid, w));
            ib[w] = snap_index(coord_of(pb, w), origin_of(grid, w), cell_size(grid, w));
        }
        int axis = -1;
        for (int w = 0; w < 3; ++w) {
            if (ia[w] != ib[w]) {
                if (axis >= 0)
                    throw GeometryError("thin wire does not resolve to an axis-aligned edge chain");
                axis = w;
            }
        }
        if (axis < 0) throw GeometryError("thin wire collapses to a point on this grid");
        for (int w = 0; w < 3; ++w) {
            const long n = static_cast<long>(count_of(grid, w));
            const long lo = std::min(ia[w], ib[w]), hi = std::max(ia[w], ib[w]);
            if (lo < 0 || hi > n)
                throw GeometryError("thin wire extends outside the grid");
        }
        const long k0 = std::min(ia[axis], ib[axis]);
        const long k1 = std::max(ia[axis], ib[axis]);
        for (long e = k0; e < k1; ++e) {
            ThinWireEdge edge;
            edge.axis = axis;
            long c[3] = {ia[0], ia[1], ia[2]};
            c[axis] = e;
            edge.i = static_cast<std::size_t>(c[0]);
            edge.j = static_cast<std::size_t>(c[1]);
            edge.k = static_cast<std::size_t>(c[2]);
            edge.radius = static_cast<float>(radius);
            mg.wires.push_back(edge);
        }
    };

    for (std::size_t idx = 0; idx < scene.shapes.size(); ++idx) {
        if (render[idx] != Render::ThinWire) continue;
        const Shape& s = scene.shapes[idx];
        const bool map = bent && s.bendable;
        const Vec3 pa = map ? bend_forward(scene.bend, s.wire_a) : s.wire_a;
        const Vec3 pb = map ? bend_forward(scene.bend, s.wire_b) : s.wire_b;
        add_wire_chain(pa, pb, 0.5 * s.diameter);
    }

    // --- port -------------------------------------------------------------
    if (scene.has_port) {
        const Vec3 pa = bend_forward(scene.bend, scene.port.a);
        const Vec3 pb = bend_forward(scene.bend, scene.port.b);
        long ia[3], ib[3];
        for (int w = 0; w < 3; ++w) {
            ia[w] = snap_index(coord_of(pa, w), origin_of(grid, w), cell_size(grid, w));
            ib[w] = snap_index(coord_of(pb, w), origin_of(grid, w), cell_size(grid, w));
            const long n = static_cast<long>(count_of(grid, w));
            if (std::min(ia[w], ib[w]) < 0 || std::max(ia[w], ib[w]) > n)
                throw PortResolutionError("port segment extends outside the grid");
        }
        int axis = -1;
        for (int w = 0; w < 3; ++w) {
            if (ia[w] != ib[w]) {
                if (axis >= 0) throw PortResolutionError("port segment is not axis-aligned");
                axis = w;
            }
        }
        if (axis < 0)
            throw PortResolutionError("port segment spans no grid edge at this resolution");

        ResolvedPort rp;
        rp.axis = axis;
        rp.sign = ib[axis] > ia[axis] ? 1.0 : -1.0;
        long edge[3] = {ia[0], ia[1], ia[2]};
        edge[axis] = rp.sign > 0 ? ia[axis] : ia[axis] - 1;
        rp.i = static_cast<std::size_t>(edge[0]);
        rp.j = static_cast<std::size_t>(edge[1]);
        rp.k = static_cast<std::size_t>(edge[2]);
        rp.impedance = scene.port.impedance;
        rp.excitation = scene.port.excitation;
        mg.port = rp;
        mg.has_port = true;

        // Feed conductor from one edge past the source up to endpoint b.
        const long span = std::abs(ib[axis] - ia[axis]);
        if (span > 1) {
            const double perp = std::min({grid.dx, grid.dy, grid.dz});
            const long dir = ib[axis] > ia[axis] ? 1 : -1;
            if (scene.port.wire_diameter >= 1.5 * perp) {
                // Volumetric feed: cells between node ia+dir and node ib.
                const long n_lo = std::min(ia[axis] + dir, ib[axis]);
                const long n_hi = std::max(ia[axis] + dir, ib[axis]);
                const int u = (axis + 1) % 3, v = (axis + 2) % 3;
                const double r = 0.5 * scene.port.wire_diameter;
                const double cu_axis = origin_of(grid, u) + static_cast<double>(ia[u]) * cell_size(grid, u);
                const double cv_axis = origin_of(grid, v) + static_cast<double>(ia[v]) * cell_size(grid, v);
                const long u0 = std::max<long>(0, static_cast<long>(std::floor((cu_axis - r - origin_of(grid, u)) / cell_size(grid, u))));
                const long u1 = std::min<long>(static_cast<long>(count_of(grid, u)) - 1,
                                               static_cast<long>(std::ceil((cu_axis + r - origin_of(grid, u)) / cell_size(grid, u))));
                const long v0 = std::max<long>(0, static_cast<long>(std::floor((cv_axis - r - origin_of(grid, v)) / cell_size(grid, v))));
                const long v1 = std::min<long>(static_cast<long>(count_of(grid, v)) - 1,
                                               static_cast<long>(std::ceil((cv_axis + r - origin_of(grid, v)) / cell_size(grid, v))));
                for (long cw = n_lo; cw < n_hi; ++cw) {
                    for (long cv2 = v0; cv2 <= v1; ++cv2) {
                        for (long cu2 = u0; cu2 <= u1; ++cu2) {
                            const double du = origin_of(grid, u) + (static_cast<double>(cu2) + 0.5) * cell_size(grid, u) - cu_axis;
                            const double dv = origin_of(grid, v) + (static_cast<double>(cv2) + 0.5) * cell_size(grid, v) - cv_axis;
                            if (du * du + dv * dv > r * r) continue;
                            long c[3];
                            c[axis] = cw;
                            c[u] = cu2;
                            c[v] = cv2;
                            if (c[0] < 0 || c[1] < 0 || c[2] < 0) continue;
                            if (c[0] >= static_cast<long>(grid.nx) || c[1] >= static_cast<long>(grid.ny) ||
                                c[2] >= static_cast<long>(grid.nz))
                                continue;
                            auto& f = mg.flags(static_cast<std::size_t>(c[0]), static_cast<std::size_t>(c[1]),
                                               static_cast<std::size_t>(c[2]));
                            f = static_cast<std::uint8_t>((f | MaterialGrid::kConductor) &
                                                          ~MaterialGrid::kTissue);
                        }
                    }
                }
            } else {
                // Single-edge feed chain.
                for (long e = 1; e < span; ++e) {
                    ThinWireEdge we;
                    we.axis = axis;
                    long c[3] = {ia[0], ia[1], ia[2]};
                    c[axis] = ia[axis] + dir * e + (dir < 0 ? -1 : 0);
                    we.i = static_cast<std::size_t>(c[0]);
                    we.j = static_cast<std::size_t>(c[1]);
                    we.k = static_cast<std::size_t>(c[2]);
                    we.radius = static_cast<float>(0.5 * scene.port.wire_diameter);
                    mg.wires.push_back(we);
                }
            }
        }
    }

    // --- bookkeeping -------------------------------------------------------
    {
        Vec3 mn, mx;
        scene.bounds(mn, mx);
        const double gx0 = grid.origin.x, gx1 = grid.node_x(grid.nx);
        const double gy0 = grid.origin.y, gy1 = grid.node_y(grid.ny);
        const double gz0 = grid.origin.z, gz1 = grid.node_z(grid.nz);
        if (mn.x < gx0 - 1e-12 || mx.x > gx1 + 1e-12 || mn.y < gy0 - 1e-12 ||
            mx.y > gy1 + 1e-12 || mn.z < gz0 - 1e-12 || mx.z > gz1 + 1e-12)
            mg.notes.push_back("scene extends beyond the grid and was clipped at the boundary");
    }
    return mg;
}

} // namespace emsim
