#pragma once

#include "emsim/geometry.hpp"

namespace emsim {

// Button antenna stack-up, bottom to top:
//   conducting ground sheet (square), felt layer, air gap, laminate disc,
//   circular top patch with an off-center slot, probe feed and shorting via.
// All lengths in meters.  The slot / offset values ship with defaults tuned
// for dual-band operation near 2.45 and 5.6 GHz on this solver's grid.
struct StackupParams {
    // ground
    double ground_side = 45e-3;
    double ground_thickness = 0.17e-3;
    double sheet_sigma = 1.18e5;  // conducting-fabric conductivity (recorded; sheet treated as PEC)
    // felt layer on the ground
    double felt_thickness = 1.50e-3;
    double felt_eps = 1.4;
    double felt_tan_delta = 0.044;
    // air gap between felt and the laminate
    double air_gap = 3.76e-3;
    // laminate disc carrying the patch
    double rogers_thickness = 1.574e-3;
    double rogers_eps = 2.2;
    double rogers_tan_delta = 0.0009;
    double rogers_radius = 9.5e-3;
    // top patch
    double patch_radius = 8e-3;
    double patch_offset_y = 0.0;  // patch center relative to the ground center
    // rectangular slot cut from the patch (length along x, width along y)
    double slot_length = 12e-3;
    double slot_width = 1e-3;
    double slot_offset_y = 0.0;
    // optional staircase cuts on the +x patch edge (0 disables)
    int stair_steps = 0;
    double stair_size = 1e-3;
    // feed probe and shorting via (offsets along y from the patch axis)
    double probe_diameter = 1.27e-3;
    double feed_offset = 3e-3;
    double via_diameter = 1.22e-3;
    double via_offset = -3e-3;
    bool via_enabled = true;
    // lumped port and loss conversion
    double port_impedance = 50.0;
    double loss_ref_freq = 2.45e9;  // tan-delta -> sigma reference
};

Scene build_button_stackup(const StackupParams& params = {});

// Layered chest model appended under the antenna at the given separation:
// 200 x 200 x 50 mm slab of skin (4 mm), fat (8 mm) and muscle filling the
// remaining 38 mm.  band_hz selects the tissue dielectric data (2.4 / 5.6 GHz).
Scene build_chest_phantom(Scene antenna, double gap, double band_hz = 2.4e9);

// Muscle-equivalent arm cylinder (radius 50 mm, length 150 mm); the antenna
// is bent around it at radius R = 50 mm + gap so the ground hugs the arm.
Scene build_arm_phantom(Scene antenna, double gap, double band_hz = 2.4e9);

// Fixed slab dimensions of the chest model (m).
inline constexpr double kChestSlabSide = 200e-3;
inline constexpr double kChestSlabDepth = 50e-3;
inline constexpr double kSkinThickness = 4e-3;
inline constexpr double kFatThickness = 8e-3;
inline constexpr double kArmRadius = 50e-3;
inline constexpr double kArmLength = 150e-3;

} // namespace emsim
