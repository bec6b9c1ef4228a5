#pragma once

#include <string>
#include <vector>

#include "emsim/excitation.hpp"
#include "emsim/material.hpp"
#include "emsim/vec3.hpp"

namespace emsim {

enum class ShapeKind { Box, Cylinder, Disc, Annulus, Wire };

// Axis-aligned geometric primitive carrying a material and a priority.
// Overlaps resolve to the higher (priority, insertion index) pair.
// Disc and annulus are zero-thickness sheets (used for metallization);
// boxes whose extent along one axis is under a cell are also treated as
// sheets when their material is a conductor.
struct Shape {
    ShapeKind kind = ShapeKind::Box;
    Material material;
    int priority = 0;
    // Sheet cut-outs (slots) clear conductor sheet faces where they overlap a
    // lower-priority sheet; they never affect volumetric classification.
    bool sheet_cut = false;
    // Shapes added before a bend is applied follow the cylindrical wrap;
    // phantom bodies added afterwards stay put.
    bool bendable = true;

    // box
    Vec3 box_min, box_max;
    // cylinder / disc / annulus
    int axis = 2;       // 0=x 1=y 2=z
    Vec3 center;        // cylinder: base-face center; disc/annulus: sheet-plane center
    double radius = 0.0;
    double inner_radius = 0.0;  // annulus
    double length = 0.0;        // cylinder extent along +axis
    // wire
    Vec3 wire_a, wire_b;  // axis-aligned endpoints
    double diameter = 0.0;

    static Shape box(const Vec3& mn, const Vec3& mx, Material m, int priority = 0);
    static Shape cylinder(int axis, const Vec3& base_center, double radius, double length,
                          Material m, int priority = 0);
    static Shape disc(int axis, const Vec3& center, double radius, Material m, int priority = 0);
    static Shape annulus(int axis, const Vec3& center, double r_inner, double r_outer,
                         Material m, int priority = 0);
    static Shape wire(const Vec3& a, const Vec3& b, double diameter, Material m, int priority = 0);

    bool is_sheet() const { return kind == ShapeKind::Disc || kind == ShapeKind::Annulus; }

    // Volumetric containment (zero-thickness sheets contain nothing; use
    // shell_contains for those).
    bool contains(const Vec3& p) const;
    // Sheet containment thickened to +-half_thickness about the sheet plane
    // (bent-sheet shells and face snapping).
    bool shell_contains(const Vec3& p, double half_thickness) const;
    // Exact axis-aligned bounds of the unbent shape.
    void bounds(Vec3& mn, Vec3& mx) const;
};

// Lumped resistive source port on an axis-aligned segment.  The first grid
// edge from endpoint a carries the series voltage source; the remainder of
// the segment up to b is rendered as a conducting feed (a wire of
// wire_diameter, or a single-edge chain when wire_diameter is 0).
struct PortSpec {
    Vec3 a, b;
    double impedance = 50.0;
    double wire_diameter = 0.0;
    ExcitationSpec excitation;
};

// Cylindrical wrap of the planar scene: planar x maps to arc length on a
// cylinder of radius `radius` whose axis is parallel to y and passes through
// (x=0, z=z_ref - radius).  Planar z=z_ref hugs the cylinder; layer
// thickness is preserved radially.
struct BendSpec {
    bool enabled = false;
    double radius = 0.0;
    double z_ref = 0.0;
};

Vec3 bend_forward(const BendSpec& b, const Vec3& planar);
Vec3 bend_inverse(const BendSpec& b, const Vec3& bent);

struct Scene {
    std::string name;
    Material background;  // default vacuum
    std::vector<Shape> shapes;
    PortSpec port;
    bool has_port = false;
    BendSpec bend;
    std::vector<std::string> notes;  // propagated into run manifests

    // Bounds over all shapes (bent shapes mapped through the wrap) and the
    // port segment.
    void bounds(Vec3& mn, Vec3& mx) const;
    // Extent of bendable shapes along z (stack thickness seen by bend_scene).
    double bendable_thickness() const;
};

// Validates scene invariants (port inside bounds, positive dimensions);
// throws GeometryError / InvalidArgument.
void validate_scene(const Scene& s);

// Applies a cylindrical bend of radius R to every bendable shape; z_ref is
// the lowest z of the bendable content, so the stack's bottom face hugs the
// cylinder.  Throws InvalidArgument if R <= the bendable stack thickness.
Scene bend_scene(Scene s, double radius);

} // namespace emsim
