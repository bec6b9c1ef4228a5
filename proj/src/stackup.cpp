#include "emsim/stackup.hpp"

#include <cmath>
#include <limits>

#include "emsim/errors.hpp"

namespace emsim {

namespace {

// Shape priorities inside the button scene.  Dielectrics sit below
// conductors; slot cuts must outrank the patch they perforate.
constexpr int kPrioTissue = 1;
constexpr int kPrioDielectric = 10;
constexpr int kPrioConductor = 20;
constexpr int kPrioCut = 30;

double scene_floor_z(const Scene& s) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& sh : s.shapes) {
        Vec3 mn, mx;
        sh.bounds(mn, mx);
        lo = std::min(lo, mn.z);
    }
    return lo;
}

} // namespace

Scene build_button_stackup(const StackupParams& p) {
    check_positive(p.ground_side, "ground side");
    check_positive(p.ground_thickness, "ground thickness");
    check_positive(p.felt_thickness, "felt thickness");
    check_nonnegative(p.air_gap, "air gap");
    check_positive(p.rogers_thickness, "laminate thickness");
    check_positive(p.rogers_radius, "laminate radius");
    check_positive(p.patch_radius, "patch radius");
    check_positive(p.probe_diameter, "probe diameter");
    if (p.via_enabled) check_positive(p.via_diameter, "via diameter");
    if (p.rogers_radius < p.patch_radius)
        throw GeometryError("button stackup: patch radius exceeds the laminate disc");
    if (std::abs(p.feed_offset) >= p.patch_radius)
        throw GeometryError("button stackup: feed offset lands outside the patch");
    if (p.via_enabled && std::abs(p.via_offset) >= p.patch_radius)
        throw GeometryError("button stackup: via offset lands outside the patch");

    const double half = 0.5 * p.ground_side;
    const double z_felt_top = p.felt_thickness;
    const double z_rogers_bot = z_felt_top + p.air_gap;
    const double z_top = z_rogers_bot + p.rogers_thickness;

    Scene s;
    s.name = "button";

    const Material felt = Material::lossy("felt", p.felt_eps, p.felt_tan_delta, p.loss_ref_freq);
    const Material rogers =
        Material::lossy("rogers", p.rogers_eps, p.rogers_tan_delta, p.loss_ref_freq);
    const Material sheet = Material::conductor("shieldit", p.sheet_sigma);
    const Material metal = Material::conductor("copper", 5.8e7);

    // Ground sheet (thin conducting fabric) and felt layer, full footprint.
    s.shapes.push_back(Shape::box({-half, -half, -p.ground_thickness}, {half, half, 0.0}, sheet,
                                  kPrioConductor));
    s.shapes.push_back(
        Shape::box({-half, -half, 0.0}, {half, half, z_felt_top}, felt, kPrioDielectric));

    // Button body: laminate disc above the air gap, patch on top.
    s.shapes.push_back(Shape::cylinder(2, {0.0, 0.0, z_rogers_bot}, p.rogers_radius,
                                       p.rogers_thickness, rogers, kPrioDielectric));
    s.shapes.push_back(
        Shape::disc(2, {0.0, p.patch_offset_y, z_top}, p.patch_radius, metal, kPrioConductor));

    if (p.slot_length > 0.0 && p.slot_width > 0.0) {
        Shape slot = Shape::box(
            {-0.5 * p.slot_length, p.slot_offset_y - 0.5 * p.slot_width, z_top - 1e-3},
            {0.5 * p.slot_length, p.slot_offset_y + 0.5 * p.slot_width, z_top + 1e-3},
            Material::vacuum(), kPrioCut);
        slot.sheet_cut = true;
        s.shapes.push_back(slot);
    }
    for (int i = 0; i < p.stair_steps; ++i) {
        // Square bites of growing depth along the +x patch edge.
        const double x0 = p.patch_radius - (i + 1) * p.stair_size;
        Shape step = Shape::box(
            {x0, p.patch_offset_y + i * p.stair_size, z_top - 1e-3},
            {p.patch_radius + p.stair_size, p.patch_offset_y + (i + 1) * p.stair_size, z_top + 1e-3},
            Material::vacuum(), kPrioCut);
        step.sheet_cut = true;
        s.shapes.push_back(step);
    }

    if (p.via_enabled) {
        s.shapes.push_back(Shape::wire({0.0, p.via_offset, 0.0}, {0.0, p.via_offset, z_top},
                                       p.via_diameter, metal, kPrioConductor + 5));
    }

    s.port.a = {0.0, p.feed_offset, 0.0};
    s.port.b = {0.0, p.feed_offset, z_top};
    s.port.impedance = p.port_impedance;
    s.port.wire_diameter = p.probe_diameter;
    s.has_port = true;

    validate_scene(s);
    return s;
}

Scene build_chest_phantom(Scene antenna, double gap, double band_hz) {
    check_nonnegative(gap, "chest gap");
    const double top = scene_floor_z(antenna) - gap;  // skin surface
    const double half = 0.5 * kChestSlabSide;

    const Material skin = tissue_material("skin", band_hz);
    const Material fat = tissue_material("fat", band_hz);
    const Material muscle = tissue_material("muscle", band_hz);

    const double z_fat = top - kSkinThickness;
    const double z_muscle = z_fat - kFatThickness;
    const double z_bottom = top - kChestSlabDepth;

    Scene s = std::move(antenna);
    for (Shape sh : {
             Shape::box({-half, -half, z_fat}, {half, half, top}, skin, kPrioTissue),
             Shape::box({-half, -half, z_muscle}, {half, half, z_fat}, fat, kPrioTissue),
             Shape::box({-half, -half, z_bottom}, {half, half, z_muscle}, muscle, kPrioTissue),
         }) {
        sh.bendable = false;
        s.shapes.push_back(sh);
    }
    s.name += "_on_chest";
    s.notes.push_back("chest slab: muscle layer extended 30 -> 38 mm to fill the 50 mm slab");
    validate_scene(s);
    return s;
}

Scene build_arm_phantom(Scene antenna, double gap, double band_hz) {
    check_nonnegative(gap, "arm gap");
    const double radius = kArmRadius + gap;
    Scene s = bend_scene(std::move(antenna), radius);

    const Material muscle = tissue_material("muscle", band_hz);
    Shape arm = Shape::cylinder(1, {0.0, -0.5 * kArmLength, s.bend.z_ref - radius}, kArmRadius,
                                kArmLength, muscle, kPrioTissue);
    arm.bendable = false;
    s.shapes.push_back(arm);
    s.name += "_on_arm";
    s.notes.push_back("arm model: muscle-equivalent cylinder, antenna bent at R = arm radius + gap");
    validate_scene(s);
    return s;
}

} // namespace emsim
