#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "emsim/geometry.hpp"
#include "emsim/vec3.hpp"

namespace emsim {

// Uniform rectilinear grid.  Nodes are at origin + (i*dx, j*dy, k*dz) for
// i in [0, nx] etc.; cell (i,j,k) spans nodes (i..i+1, j..j+1, k..k+1).
struct GridSpec {
    double dx = 0.5e-3, dy = 0.5e-3, dz = 0.5e-3;
    std::size_t nx = 0, ny = 0, nz = 0;  // cell counts
    Vec3 origin;                         // scene coordinates of node (0,0,0)
    int pml_cells = 10;
    double padding = 5e-3;  // free-space margin between structure and absorber

    std::size_t cells() const { return nx * ny * nz; }
    double node_x(std::size_t i) const { return origin.x + static_cast<double>(i) * dx; }
    double node_y(std::size_t j) const { return origin.y + static_cast<double>(j) * dy; }
    double node_z(std::size_t k) const { return origin.z + static_cast<double>(k) * dz; }
    Vec3 cell_center(std::size_t i, std::size_t j, std::size_t k) const {
        return {node_x(i) + 0.5 * dx, node_y(j) + 0.5 * dy, node_z(k) + 0.5 * dz};
    }
};

// Builds a grid covering the scene with the given free-space padding plus
// pml_cells of absorber on every face.  The origin is snapped to integer
// cell multiples so scene coordinate planes at multiples of the cell size
// land exactly on node planes.
GridSpec make_grid(const Scene& scene, double cell, double padding = 5e-3, int pml_cells = 10);

// Sampling-quality warnings: cell size vs lambda/20 in the densest dielectric
// at the highest analysis frequency.
std::vector<std::string> grid_warnings(const GridSpec& grid, const Scene& scene, double f_max);

} // namespace emsim
