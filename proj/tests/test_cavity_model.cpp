#include <doctest.h>

#include "emsim/cavity_model.hpp"
#include "emsim/errors.hpp"

using namespace emsim;
using namespace emsim::cavity;

TEST_CASE("patch radius design equation reproduces reference sizes") {
    // 2.45 GHz patch on 1.574 mm / eps 2.2 laminate.
    const double a24 = patch_radius_for_frequency(2.45e9, 2.2, 1.574e-3);
    CHECK(a24 * 1e3 == doctest::Approx(23.135927).epsilon(1e-6));
    // 5.6 GHz on the same laminate.
    const double a56 = patch_radius_for_frequency(5.6e9, 2.2, 1.574e-3);
    CHECK(a56 * 1e3 == doctest::Approx(9.752502).epsilon(1e-6));
    // Higher frequency must always mean a smaller patch.
    CHECK(a56 < a24);
}

TEST_CASE("effective radius expands the physical radius by the fringing term") {
    const double a = 23.135927e-3;
    const double ae = effective_radius(a, 2.2, 1.574e-3);
    CHECK(ae * 1e3 == doctest::Approx(24.228747).epsilon(1e-6));
    CHECK(ae > a);
    // Thinner substrate -> less fringing -> a_e closer to a.
    const double ae_thin = effective_radius(a, 2.2, 0.5e-3);
    CHECK(ae_thin < ae);
    CHECK(ae_thin > a);
}

TEST_CASE("design and analysis round-trip near the target frequency") {
    // The design equation uses the first-pass radius inside its own fringing
    // term, so the round trip is close but not exact.
    const double f0 = 2.45e9;
    const double a = patch_radius_for_frequency(f0, 2.2, 1.574e-3);
    const double fr = resonant_frequency(a, 2.2, 1.574e-3);
    CHECK(fr / 1e9 == doctest::Approx(2.444553).epsilon(1e-6));
    CHECK(std::abs(fr - f0) / f0 < 0.005);

    // 8 mm patch on the laminate alone lands near 6.7 GHz.
    CHECK(resonant_frequency(8e-3, 2.2, 1.574e-3) / 1e9 ==
          doctest::Approx(6.705075).epsilon(1e-6));
}

TEST_CASE("layered substrate combines as series capacitors") {
    const std::vector<Layer> stack = {
        {1.50e-3, 1.4},   // felt
        {3.76e-3, 1.0},   // air gap
        {1.574e-3, 2.2},  // laminate
    };
    CHECK(effective_permittivity(stack) == doctest::Approx(1.232043).epsilon(1e-6));
    CHECK(total_height(stack) * 1e3 == doctest::Approx(6.834));
    // A single layer is its own effective medium.
    CHECK(effective_permittivity({{1e-3, 2.2}}) == doctest::Approx(2.2));
    // Order cannot matter.
    const std::vector<Layer> rev = {stack[2], stack[1], stack[0]};
    CHECK(effective_permittivity(rev) == doctest::Approx(effective_permittivity(stack)));
    CHECK_THROWS_AS(effective_permittivity({}), InvalidArgument);
    CHECK_THROWS_AS(effective_permittivity({{0.0, 2.2}}), InvalidArgument);
    CHECK_THROWS_AS(effective_permittivity({{1e-3, 0.5}}), InvalidArgument);
}

TEST_CASE("cavity-model argument validation") {
    CHECK_THROWS_AS(patch_radius_for_frequency(0.0, 2.2, 1.574e-3), InvalidArgument);
    CHECK_THROWS_AS(patch_radius_for_frequency(2.45e9, 0.5, 1.574e-3), InvalidArgument);
    CHECK_THROWS_AS(patch_radius_for_frequency(2.45e9, 2.2, 0.0), InvalidArgument);
    CHECK_THROWS_AS(effective_radius(0.0, 2.2, 1.574e-3), InvalidArgument);
    CHECK_THROWS_AS(resonant_frequency(8e-3, 2.2, -1.0), InvalidArgument);
}
