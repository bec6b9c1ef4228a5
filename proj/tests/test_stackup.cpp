#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "emsim/cavity_model.hpp"
#include "emsim/errors.hpp"
#include "emsim/stackup.hpp"

using namespace emsim;

namespace {

const Shape* find_shape(const Scene& s, ShapeKind kind, const std::string& mat) {
    for (const auto& sh : s.shapes)
        if (sh.kind == kind && sh.material.name == mat) return &sh;
    return nullptr;
}

} // namespace

TEST_CASE("button stack assembles at the documented heights") {
    const StackupParams p;
    const Scene s = build_button_stackup(p);
    CHECK(s.name == "button");
    CHECK(s.has_port);

    // Layer arithmetic: felt 1.50 + air 3.76 + laminate 1.574 -> patch plane
    // at 6.834 mm above the ground sheet's top face.
    const double z_top = p.felt_thickness + p.air_gap + p.rogers_thickness;
    CHECK(z_top == doctest::Approx(6.834e-3).epsilon(1e-12));

    const Shape* patch = find_shape(s, ShapeKind::Disc, "copper");
    REQUIRE(patch != nullptr);
    CHECK(patch->center.z == doctest::Approx(z_top));
    CHECK(patch->radius == doctest::Approx(p.patch_radius));

    const Shape* ground = find_shape(s, ShapeKind::Box, "shieldit");
    REQUIRE(ground != nullptr);
    CHECK(ground->material.pec);
    CHECK(ground->box_max.z == doctest::Approx(0.0));
    CHECK(ground->box_min.z == doctest::Approx(-p.ground_thickness));
    CHECK(ground->box_max.x - ground->box_min.x == doctest::Approx(45e-3));

    const Shape* lam = find_shape(s, ShapeKind::Cylinder, "rogers");
    REQUIRE(lam != nullptr);
    CHECK(lam->center.z == doctest::Approx(p.felt_thickness + p.air_gap));
    CHECK(lam->length == doctest::Approx(p.rogers_thickness));

    // Full extent including the ground sheet: 7.004 mm.
    Vec3 mn, mx;
    s.bounds(mn, mx);
    CHECK(mx.z - mn.z == doctest::Approx(7.004e-3).epsilon(1e-9));

    // Feed port spans ground plane to patch at the feed offset.
    CHECK(s.port.a.y == doctest::Approx(p.feed_offset));
    CHECK(s.port.a.z == doctest::Approx(0.0));
    CHECK(s.port.b.z == doctest::Approx(z_top));
    CHECK(s.port.impedance == doctest::Approx(50.0));
    CHECK(s.port.wire_diameter == doctest::Approx(1.27e-3));
}

TEST_CASE("stack permittivity model matches the series-capacitor value") {
    const StackupParams p;
    const std::vector<cavity::Layer> layers = {
        {p.felt_thickness, p.felt_eps},
        {p.air_gap, 1.0},
        {p.rogers_thickness, p.rogers_eps},
    };
    CHECK(cavity::effective_permittivity(layers) == doctest::Approx(1.232043).epsilon(1e-6));
    CHECK(cavity::total_height(layers) == doctest::Approx(6.834e-3).epsilon(1e-12));
}

TEST_CASE("optional patch features can be disabled or varied") {
    StackupParams p;
    p.slot_length = 0.0;  // no slot
    p.via_enabled = false;
    const Scene s = build_button_stackup(p);
    for (const auto& sh : s.shapes) {
        CHECK(!sh.sheet_cut);
        CHECK(sh.kind != ShapeKind::Wire);
    }

    StackupParams q;
    q.stair_steps = 3;
    const Scene s2 = build_button_stackup(q);
    int cuts = 0;
    for (const auto& sh : s2.shapes)
        if (sh.sheet_cut) ++cuts;
    CHECK(cuts == 4);  // slot + 3 stair bites

    // Shorting via present by default.
    const Scene s3 = build_button_stackup({});
    const Shape* via = find_shape(s3, ShapeKind::Wire, "copper");
    REQUIRE(via != nullptr);
    CHECK(via->diameter == doctest::Approx(1.22e-3));
    CHECK(via->wire_a.y == doctest::Approx(-3e-3));
}

TEST_CASE("stackup parameter validation") {
    StackupParams p;
    p.patch_radius = 12e-3;  // larger than the 9.5 mm laminate disc
    CHECK_THROWS_AS(build_button_stackup(p), GeometryError);

    StackupParams q;
    q.feed_offset = 9e-3;  // outside the 8 mm patch
    CHECK_THROWS_AS(build_button_stackup(q), GeometryError);

    StackupParams r;
    r.felt_thickness = -1e-3;
    CHECK_THROWS_AS(build_button_stackup(r), InvalidArgument);
}

TEST_CASE("chest phantom layers sit below the antenna") {
    const double gap = 3e-3;
    Scene s = build_chest_phantom(build_button_stackup({}), gap, 2.4e9);
    CHECK(s.name == "button_on_chest");
    CHECK(!s.bend.enabled);

    // Antenna floor is the ground sheet bottom at -0.17 mm; skin starts one
    // gap below, then 4 mm skin, 8 mm fat, muscle to 50 mm total depth.
    const double top = -0.17e-3 - gap;
    int tissue_boxes = 0;
    for (const auto& sh : s.shapes) {
        if (sh.material.rho <= 0.0) continue;
        ++tissue_boxes;
        CHECK(!sh.bendable);
        CHECK(sh.box_max.z <= top + 1e-12);
    }
    CHECK(tissue_boxes == 3);

    Vec3 mn, mx;
    s.bounds(mn, mx);
    CHECK(mn.z == doctest::Approx(top - 50e-3));
    CHECK(mx.x - mn.x == doctest::Approx(200e-3));

    const Shape* skin = nullptr;
    for (const auto& sh : s.shapes)
        if (sh.material.name == "skin") skin = &sh;
    REQUIRE(skin != nullptr);
    CHECK(skin->box_max.z == doctest::Approx(top));
    CHECK(skin->box_max.z - skin->box_min.z == doctest::Approx(4e-3));

    CHECK_THROWS_AS(build_chest_phantom(build_button_stackup({}), -1e-3, 2.4e9), InvalidArgument);
}

TEST_CASE("arm phantom bends the antenna around a muscle cylinder") {
    const double gap = 3e-3;
    Scene s = build_arm_phantom(build_button_stackup({}), gap, 2.4e9);
    CHECK(s.name == "button_on_arm");
    CHECK(s.bend.enabled);
    CHECK(s.bend.radius == doctest::Approx(50e-3 + gap));
    CHECK(s.bend.z_ref == doctest::Approx(-0.17e-3));  // ground sheet bottom

    const Shape* arm = find_shape(s, ShapeKind::Cylinder, "muscle");
    REQUIRE(arm != nullptr);
    CHECK(arm->axis == 1);
    CHECK(arm->radius == doctest::Approx(50e-3));
    CHECK(arm->length == doctest::Approx(150e-3));
    CHECK(!arm->bendable);
    // Arm surface touches the bend cylinder minus the gap: its axis sits at
    // z_ref - (R_arm + gap).
    CHECK(arm->center.z == doctest::Approx(s.bend.z_ref - (50e-3 + gap)));

    // Tissue properties come from the 2.4 GHz table.
    CHECK(arm->material.eps_r == doctest::Approx(52.7).epsilon(1e-6));
    CHECK(arm->material.sigma == doctest::Approx(1.95).epsilon(1e-6));
}
