#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emsim/array3d.hpp"
#include "emsim/excitation.hpp"
#include "emsim/geometry.hpp"
#include "emsim/grid.hpp"

namespace emsim {

// Conductor-sheet face masks per orientation.  z(i,j,k) marks the face in
// node plane k spanning cell (i,j) in x-y (dims nx, ny, nz+1); x and y are
// the rotations of that.
struct SheetFaces {
    Array3D<std::uint8_t> x, y, z;
};

// Sub-cell wire on a single grid edge; radius 0 means a plain conducting
// edge, radius > 0 requests the thin-wire-corrected update around it.
// Edge (axis,i,j,k) starts at node (i,j,k) and runs one cell along axis.
struct ThinWireEdge {
    int axis;
    std::size_t i, j, k;
    float radius;
    bool operator==(const ThinWireEdge&) const = default;
};

// Grid-resolved lumped port: the source edge with its circuit parameters.
struct ResolvedPort {
    int axis = 2;
    std::size_t i = 0, j = 0, k = 0;  // lower node of the source edge
    double sign = 1.0;                // +1 when endpoint b lies along +axis from a
    double impedance = 50.0;
    ExcitationSpec excitation;
};

struct MaterialGrid {
    static constexpr std::uint8_t kConductor = 1;
    static constexpr std::uint8_t kTissue = 2;

    GridSpec grid;
    Array3D<float> eps_r, sigma, rho;  // per cell
    Array3D<std::uint8_t> flags;       // per cell, kConductor | kTissue
    SheetFaces sheets;
    std::vector<ThinWireEdge> wires;
    bool has_port = false;
    ResolvedPort port;
    std::vector<std::string> notes;

    bool conductor(std::size_t i, std::size_t j, std::size_t k) const {
        return flags(i, j, k) & kConductor;
    }
    bool tissue(std::size_t i, std::size_t j, std::size_t k) const {
        return flags(i, j, k) & kTissue;
    }
};

// Rasterizes the scene onto the grid: cell-center material sampling with
// priority override, conductor sheets snapped to Yee faces (volumetric
// one-cell shells when the scene is bent), thin wires as edge chains, and
// the port resolved to a source edge plus its feed conductor.
// budget_bytes bounds the estimated solver memory footprint.
MaterialGrid voxelize(const Scene& scene, const GridSpec& grid, double budget_bytes = 4.0e9);

} // namespace emsim
