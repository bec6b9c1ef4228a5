#pragma once

#include <string>
#include <vector>

namespace emsim {

// Electromagnetic material at a fixed evaluation frequency (non-dispersive
// inside a run; tabulated tissue data is looked up per-band before voxelizing).
struct Material {
    std::string name = "vacuum";
    double eps_r = 1.0;   // relative permittivity
    double sigma = 0.0;   // electric conductivity, S/m
    double rho = 0.0;     // mass density kg/m^3; 0 means "not tissue" (excluded from SAR)
    bool pec = false;     // perfect electric conductor (sheet/wire shortcut)

    static Material vacuum();
    static Material dielectric(std::string name, double eps_r, double sigma = 0.0);
    // Loss specified as tan(delta) at a reference frequency; converted to an
    // equivalent conductivity sigma = 2*pi*f_ref*eps0*eps_r*tan_delta.
    static Material lossy(std::string name, double eps_r, double tan_delta, double f_ref_hz);
    static Material tissue(std::string name, double eps_r, double sigma, double rho);
    static Material conductor(std::string name, double sigma);
};

// tan(delta) -> sigma conversion used throughout; throws on f_ref <= 0.
double effective_conductivity(double eps_r, double tan_delta, double f_ref_hz);

// Dielectric constants of the tabulated body tissues near the two bands of
// interest.  band_hz is snapped to the nearest tabulated point (2.4 / 5.6 GHz).
// Throws for unknown tissue names.
Material tissue_material(const std::string& name, double band_hz);

// All tissue names accepted by tissue_material, in deterministic order.
std::vector<std::string> tissue_names();

} // namespace emsim
