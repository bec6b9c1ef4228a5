#include "emsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emsim/errors.hpp"

namespace emsim {

namespace {

double axis_of(const Vec3& p, int axis) {
    return axis == 0 ? p.x : axis == 1 ? p.y : p.z;
}

// Distance from p to the line through c along `axis`, measured in-plane.
double inplane_dist(const Vec3& p, const Vec3& c, int axis) {
    const double du = axis_of(p, (axis + 1) % 3) - axis_of(c, (axis + 1) % 3);
    const double dv = axis_of(p, (axis + 2) % 3) - axis_of(c, (axis + 2) % 3);
    return std::sqrt(du * du + dv * dv);
}

int wire_axis(const Vec3& a, const Vec3& b) {
    const bool dx = a.x != b.x, dy = a.y != b.y, dz = a.z != b.z;
    if (dx + dy + dz != 1)
        throw InvalidArgument("wire endpoints must differ along exactly one axis");
    return dx ? 0 : dy ? 1 : 2;
}

void check_axis(int axis) {
    if (axis < 0 || axis > 2) throw InvalidArgument("axis must be 0, 1 or 2");
}

} // namespace

Shape Shape::box(const Vec3& mn, const Vec3& mx, Material m, int priority) {
    if (!(mn.x < mx.x && mn.y < mx.y && mn.z < mx.z))
        throw InvalidArgument("box: min must be strictly below max on every axis");
    Shape s;
    s.kind = ShapeKind::Box;
    s.box_min = mn;
    s.box_max = mx;
    s.material = std::move(m);
    s.priority = priority;
    return s;
}

Shape Shape::cylinder(int axis, const Vec3& base_center, double radius, double length,
                      Material m, int priority) {
    check_axis(axis);
    check_positive(radius, "cylinder radius");
    check_positive(length, "cylinder length");
    Shape s;
    s.kind = ShapeKind::Cylinder;
    s.axis = axis;
    s.center = base_center;
    s.radius = radius;
    s.length = length;
    s.material = std::move(m);
    s.priority = priority;
    return s;
}

Shape Shape::disc(int axis, const Vec3& center, double radius, Material m, int priority) {
    check_axis(axis);
    check_positive(radius, "disc radius");
    Shape s;
    s.kind = ShapeKind::Disc;
    s.axis = axis;
    s.center = center;
    s.radius = radius;
    s.material = std::move(m);
    s.priority = priority;
    return s;
}

Shape Shape::annulus(int axis, const Vec3& center, double r_inner, double r_outer,
                     Material m, int priority) {
    check_axis(axis);
    check_nonnegative(r_inner, "annulus inner radius");
    check_positive(r_outer, "annulus outer radius");
    if (r_inner >= r_outer) throw InvalidArgument("annulus: inner radius must be < outer");
    Shape s;
    s.kind = ShapeKind::Annulus;
    s.axis = axis;
    s.center = center;
    s.inner_radius = r_inner;
    s.radius = r_outer;
    s.material = std::move(m);
    s.priority = priority;
    return s;
}

Shape Shape::wire(const Vec3& a, const Vec3& b, double diameter, Material m, int priority) {
    check_positive(diameter, "wire diameter");
    Shape s;
    s.kind = ShapeKind::Wire;
    s.axis = wire_axis(a, b);
    s.wire_a = a;
    s.wire_b = b;
    s.diameter = diameter;
    s.material = std::move(m);
    s.priority = priority;
    return s;
}

bool Shape::contains(const Vec3& p) const {
    switch (kind) {
        case ShapeKind::Box:
            return p.x >= box_min.x && p.x <= box_max.x && p.y >= box_min.y &&
                   p.y <= box_max.y && p.z >= box_min.z && p.z <= box_max.z;
        case ShapeKind::Cylinder: {
            const double w = axis_of(p, axis) - axis_of(center, axis);
            return w >= 0.0 && w <= length && inplane_dist(p, center, axis) <= radius;
        }
        case ShapeKind::Wire: {
            const double lo = std::min(axis_of(wire_a, axis), axis_of(wire_b, axis));
            const double hi = std::max(axis_of(wire_a, axis), axis_of(wire_b, axis));
            const double w = axis_of(p, axis);
            return w >= lo && w <= hi && inplane_dist(p, wire_a, axis) <= 0.5 * diameter;
        }
        case ShapeKind::Disc:
        case ShapeKind::Annulus:
            return false;  // zero thickness
    }
    return false;
}

bool Shape::shell_contains(const Vec3& p, double half_thickness) const {
    switch (kind) {
        case ShapeKind::Disc: {
            if (std::abs(axis_of(p, axis) - axis_of(center, axis)) > half_thickness) return false;
            return inplane_dist(p, center, axis) <= radius;
        }
        case ShapeKind::Annulus: {
            if (std::abs(axis_of(p, axis) - axis_of(center, axis)) > half_thickness) return false;
            const double d = inplane_dist(p, center, axis);
            return d >= inner_radius && d <= radius;
        }
        case ShapeKind::Box: {
            // Thin boxes behave as sheets along their thinnest axis.
            const double ex = box_max.x - box_min.x;
            const double ey = box_max.y - box_min.y;
            const double ez = box_max.z - box_min.z;
            int thin = 2;
            if (ex <= ey && ex <= ez) thin = 0;
            else if (ey <= ex && ey <= ez) thin = 1;
            const Vec3 mid = (box_min + box_max) * 0.5;
            if (std::abs(axis_of(p, thin) - axis_of(mid, thin)) > half_thickness) return false;
            const int u = (thin + 1) % 3, v = (thin + 2) % 3;
            return axis_of(p, u) >= axis_of(box_min, u) && axis_of(p, u) <= axis_of(box_max, u) &&
                   axis_of(p, v) >= axis_of(box_min, v) && axis_of(p, v) <= axis_of(box_max, v);
        }
        default:
            return contains(p);
    }
}

void Shape::bounds(Vec3& mn, Vec3& mx) const {
    switch (kind) {
        case ShapeKind::Box:
            mn = box_min;
            mx = box_max;
            return;
        case ShapeKind::Cylinder:
        case ShapeKind::Disc:
        case ShapeKind::Annulus: {
            const double len = kind == ShapeKind::Cylinder ? length : 0.0;
            double lo[3], hi[3];
            for (int w = 0; w < 3; ++w) {
                const double c = axis_of(center, w);
                if (w == axis) {
                    lo[w] = c;
                    hi[w] = c + len;
                } else {
                    lo[w] = c - radius;
                    hi[w] = c + radius;
                }
            }
            mn = {lo[0], lo[1], lo[2]};
            mx = {hi[0], hi[1], hi[2]};
            return;
        }
        case ShapeKind::Wire: {
            const double r = 0.5 * diameter;
            mn = {std::min(wire_a.x, wire_b.x), std::min(wire_a.y, wire_b.y),
                  std::min(wire_a.z, wire_b.z)};
            mx = {std::max(wire_a.x, wire_b.x), std::max(wire_a.y, wire_b.y),
                  std::max(wire_a.z, wire_b.z)};
            for (int w = 0; w < 3; ++w) {
                if (w == axis) continue;
                if (w == 0) { mn.x -= r; mx.x += r; }
                if (w == 1) { mn.y -= r; mx.y += r; }
                if (w == 2) { mn.z -= r; mx.z += r; }
            }
            return;
        }
    }
}

Vec3 bend_forward(const BendSpec& b, const Vec3& planar) {
    if (!b.enabled) return planar;
    const double theta = planar.x / b.radius;
    const double r = b.radius + (planar.z - b.z_ref);
    return {r * std::sin(theta), planar.y, b.z_ref - b.radius + r * std::cos(theta)};
}

Vec3 bend_inverse(const BendSpec& b, const Vec3& bent) {
    if (!b.enabled) return bent;
    const double w = bent.z - b.z_ref + b.radius;
    const double r = std::sqrt(bent.x * bent.x + w * w);
    const double theta = std::atan2(bent.x, w);
    return {b.radius * theta, bent.y, b.z_ref + (r - b.radius)};
}

namespace {

void accumulate_bent_bounds(const BendSpec& bend, const Vec3& smn, const Vec3& smx,
                            Vec3& mn, Vec3& mx) {
    // Sample the bbox surface along the bend direction; the arc bulge peaks
    // at planar x = 0, so include that plane when spanned.
    std::vector<double> xs;
    const int n = 17;
    for (int i = 0; i < n; ++i) xs.push_back(smn.x + (smx.x - smn.x) * i / (n - 1));
    if (smn.x < 0.0 && smx.x > 0.0) xs.push_back(0.0);
    for (double x : xs)
        for (double y : {smn.y, smx.y})
            for (double z : {smn.z, smx.z}) {
                const Vec3 q = bend_forward(bend, {x, y, z});
                mn.x = std::min(mn.x, q.x); mx.x = std::max(mx.x, q.x);
                mn.y = std::min(mn.y, q.y); mx.y = std::max(mx.y, q.y);
                mn.z = std::min(mn.z, q.z); mx.z = std::max(mx.z, q.z);
            }
}

} // namespace

void Scene::bounds(Vec3& mn, Vec3& mx) const {
    const double inf = std::numeric_limits<double>::infinity();
    mn = {inf, inf, inf};
    mx = {-inf, -inf, -inf};
    for (const auto& s : shapes) {
        if (s.sheet_cut) continue;  // cuts remove material; no extent of their own
        Vec3 smn, smx;
        s.bounds(smn, smx);
        if (bend.enabled && s.bendable) {
            accumulate_bent_bounds(bend, smn, smx, mn, mx);
        } else {
            mn.x = std::min(mn.x, smn.x); mx.x = std::max(mx.x, smx.x);
            mn.y = std::min(mn.y, smn.y); mx.y = std::max(mx.y, smx.y);
            mn.z = std::min(mn.z, smn.z); mx.z = std::max(mx.z, smx.z);
        }
    }
    if (has_port) {
        for (const Vec3& p : {bend_forward(bend, port.a), bend_forward(bend, port.b)}) {
            mn.x = std::min(mn.x, p.x); mx.x = std::max(mx.x, p.x);
            mn.y = std::min(mn.y, p.y); mx.y = std::max(mx.y, p.y);
            mn.z = std::min(mn.z, p.z); mx.z = std::max(mx.z, p.z);
        }
    }
    if (shapes.empty() && !has_port) {
        mn = {0, 0, 0};
        mx = {0, 0, 0};
    }
}

double Scene::bendable_thickness() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : shapes) {
        if (!s.bendable || s.sheet_cut) continue;
        Vec3 mn, mx;
        s.bounds(mn, mx);
        lo = std::min(lo, mn.z);
        hi = std::max(hi, mx.z);
    }
    return hi > lo ? hi - lo : 0.0;
}

void validate_scene(const Scene& s) {
    if (s.shapes.empty() && !s.has_port)
        throw GeometryError("scene '" + s.name + "' is empty");
    if (s.has_port) {
        Vec3 mn, mx;
        s.bounds(mn, mx);
        const double eps = 1e-12;
        for (const Vec3& p : {bend_forward(s.bend, s.port.a), bend_forward(s.bend, s.port.b)}) {
            if (p.x < mn.x - eps || p.x > mx.x + eps || p.y < mn.y - eps || p.y > mx.y + eps ||
                p.z < mn.z - eps || p.z > mx.z + eps)
                throw GeometryError("scene '" + s.name + "': port endpoint outside bounding box");
        }
        wire_axis(s.port.a, s.port.b);  // throws if the segment is not axis-aligned
    }
}

Scene bend_scene(Scene s, double radius) {
    check_positive(radius, "bend radius");
    if (s.bend.enabled) throw InvalidArgument("bend_scene: scene is already bent");
    const double thickness = s.bendable_thickness();
    if (radius <= thickness)
        throw InvalidArgument("bend_scene: radius must exceed the stack thickness");
    double z_lo = std::numeric_limits<double>::infinity();
    for (const auto& sh : s.shapes) {
        if (!sh.bendable || sh.sheet_cut) continue;
        Vec3 mn, mx;
        sh.bounds(mn, mx);
        z_lo = std::min(z_lo, mn.z);
    }
    s.bend.enabled = true;
    s.bend.radius = radius;
    s.bend.z_ref = z_lo;
    return s;
}

} // namespace emsim
