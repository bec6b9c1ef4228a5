#include "emsim/grid.hpp"

#include <algorithm>
#include <cmath>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"

namespace emsim {

GridSpec make_grid(const Scene& scene, double cell, double padding, int pml_cells) {
    check_positive(cell, "cell size");
    check_nonnegative(padding, "padding");
    if (pml_cells < 0) throw InvalidArgument("make_grid: pml_cells must be >= 0");

    Vec3 mn, mx;
    scene.bounds(mn, mx);

    GridSpec g;
    g.dx = g.dy = g.dz = cell;
    g.pml_cells = pml_cells;
    g.padding = padding;

    const double lo[3] = {mn.x, mn.y, mn.z};
    const double hi[3] = {mx.x, mx.y, mx.z};
    std::size_t n[3];
    double org[3];
    for (int w = 0; w < 3; ++w) {
        // The 1e-9 (cell units) tolerance keeps exactly-aligned scene planes
        // from spilling into an extra cell due to round-off.
        const long first = static_cast<long>(std::floor((lo[w] - padding) / cell + 1e-9)) - pml_cells;
        const long last = static_cast<long>(std::ceil((hi[w] + padding) / cell - 1e-9)) + pml_cells;
        org[w] = static_cast<double>(first) * cell;
        n[w] = static_cast<std::size_t>(last - first);
    }
    g.origin = {org[0], org[1], org[2]};
    g.nx = n[0];
    g.ny = n[1];
    g.nz = n[2];
    return g;
}

std::vector<std::string> grid_warnings(const GridSpec& grid, const Scene& scene, double f_max) {
    std::vector<std::string> warnings;
    if (f_max <= 0.0) return warnings;
    double eps_max = scene.background.eps_r;
    for (const auto& s : scene.shapes)
        if (!s.material.pec) eps_max = std::max(eps_max, s.material.eps_r);
    const double lambda_min = PhysicalConstants::c / (f_max * std::sqrt(eps_max));
    const double h = std::max({grid.dx, grid.dy, grid.dz});
    if (h > lambda_min / 20.0) {
        warnings.push_back("cell size " + std::to_string(h * 1e3) + " mm exceeds lambda/20 = " +
                           std::to_string(lambda_min / 20.0 * 1e3) + " mm at " +
                           std::to_string(f_max / 1e9) + " GHz in eps_r = " +
                           std::to_string(eps_max));
    }
    if (grid.pml_cells > 0 && grid.pml_cells < 6)
        warnings.push_back("absorbing layer thinner than 6 cells; reflections may be high");
    return warnings;
}

} // namespace emsim
