#include "emsim/material.hpp"

#include <cmath>
#include <map>

#include "emsim/constants.hpp"
#include "emsim/errors.hpp"

namespace emsim {

Material Material::vacuum() { return Material{}; }

Material Material::dielectric(std::string name, double eps_r, double sigma) {
    check_positive(eps_r, "eps_r");
    check_nonnegative(sigma, "sigma");
    Material m;
    m.name = std::move(name);
    m.eps_r = eps_r;
    m.sigma = sigma;
    return m;
}

Material Material::lossy(std::string name, double eps_r, double tan_delta, double f_ref_hz) {
    Material m = dielectric(std::move(name), eps_r);
    m.sigma = effective_conductivity(eps_r, tan_delta, f_ref_hz);
    return m;
}

Material Material::tissue(std::string name, double eps_r, double sigma, double rho) {
    Material m = dielectric(std::move(name), eps_r, sigma);
    check_positive(rho, "rho");
    m.rho = rho;
    return m;
}

Material Material::conductor(std::string name, double sigma) {
    check_positive(sigma, "sigma");
    Material m;
    m.name = std::move(name);
    m.sigma = sigma;
    m.pec = true;
    return m;
}

double effective_conductivity(double eps_r, double tan_delta, double f_ref_hz) {
    check_positive(eps_r, "eps_r");
    check_nonnegative(tan_delta, "tan_delta");
    if (f_ref_hz <= 0.0)
        throw InvalidArgument("effective_conductivity: reference frequency must be > 0");
    return 2.0 * PhysicalConstants::pi * f_ref_hz * PhysicalConstants::eps0 * eps_r * tan_delta;
}

namespace {

struct TissuePoint {
    double eps_r;
    double sigma;
};

struct TissueEntry {
    TissuePoint at_2g4;
    TissuePoint at_5g6;
    double rho;
};

// Dielectric properties of body tissues near 2.4 and 5.6 GHz
// (parametric-model values commonly used for wearable-antenna studies).
const std::map<std::string, TissueEntry>& tissue_table() {
    static const std::map<std::string, TissueEntry> table = {
        {"skin",   {{38.0, 1.46}, {35.1, 3.72}, 1109.0}},
        {"fat",    {{5.28, 0.10}, {4.95, 0.29}, 911.0}},
        {"muscle", {{52.7, 1.95}, {48.2, 6.00}, 1090.0}},
    };
    return table;
}

} // namespace

Material tissue_material(const std::string& name, double band_hz) {
    if (band_hz <= 0.0)
        throw InvalidArgument("tissue_material: band frequency must be > 0");
    const auto& table = tissue_table();
    auto it = table.find(name);
    if (it == table.end())
        throw InvalidArgument("tissue_material: unknown tissue '" + name + "'");
    const bool lower = std::abs(band_hz - 2.4e9) <= std::abs(band_hz - 5.6e9);
    const TissuePoint& p = lower ? it->second.at_2g4 : it->second.at_5g6;
    return Material::tissue(name, p.eps_r, p.sigma, it->second.rho);
}

std::vector<std::string> tissue_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : tissue_table()) names.push_back(k);
    return names;
}

} // namespace emsim
