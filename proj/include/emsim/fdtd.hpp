#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emsim/array3d.hpp"
#include "emsim/excitation.hpp"
#include "emsim/voxelize.hpp"

namespace emsim {

// Courant-limited timestep dt = safety / (c * sqrt(1/dx^2 + 1/dy^2 + 1/dz^2)).
double courant_timestep(const GridSpec& grid, double safety = 0.99);

enum class Boundary { Cpml, Pec, Pmc, Mur1 };

struct BoundarySet {
    Boundary x_lo = Boundary::Cpml, x_hi = Boundary::Cpml;
    Boundary y_lo = Boundary::Cpml, y_hi = Boundary::Cpml;
    Boundary z_lo = Boundary::Cpml, z_hi = Boundary::Cpml;
    static BoundarySet all(Boundary b) { return {b, b, b, b, b, b}; }
};

// Polynomial-graded convolutional absorbing layer.
struct CpmlParams {
    int order = 3;
    double sigma_scale = 1.0;  // multiple of the standard optimum 0.8*(m+1)/(eta0*dx)
    double kappa_max = 10.0;
    double alpha_max = 0.24;
};

struct StopCriterion {
    std::size_t max_steps = 40000;
    // Stop early once the port-voltage envelope has fallen this far below its
    // peak (checked after the source has played out).  0 disables.
    double energy_floor_db = -60.0;
};

// Additive (soft) E-field source on a single edge.
struct SoftSource {
    int axis = 2;
    std::size_t i = 0, j = 0, k = 0;
    ExcitationSpec excitation;
};

struct PointProbe {
    int axis = 2;
    std::size_t i = 0, j = 0, k = 0;  // E edge to record every step
};

struct ProbeRequest {
    std::vector<double> volume_freqs;            // E phasors over volume_box
    std::array<std::size_t, 6> volume_box{};     // cell bounds i0,i1,j0,j1,k0,k1 (inclusive)
    std::vector<double> surface_freqs;           // tangential E/H phasors on the box surface
    std::array<std::size_t, 6> surface_box{};    // node bounds i0,i1,j0,j1,k0,k1
    std::vector<PointProbe> point_probes;
    std::size_t dft_stride = 0;                  // 0 = auto from the highest requested frequency
    bool energy_history = false;
    bool capture_final_fields = false;
};

struct FieldSnapshot {
    std::size_t nx = 0, ny = 0, nz = 0;  // node dims
    Array3D<float> ex, ey, ez, hx, hy, hz;
};

struct SolverSettings {
    double courant = 0.99;
    BoundarySet boundaries;
    CpmlParams cpml;
    StopCriterion stop;
    int threads = 1;
    std::size_t divergence_check_interval = 500;
    std::vector<SoftSource> soft_sources;
    std::size_t start_step = 0;                   // waveform time offset when restarting
    std::optional<FieldSnapshot> initial_fields;  // resume from a checkpoint
};

// E-field phasors on the edges of a cell box (arrays span box+1 nodes).
struct VolumePhasors {
    double frequency = 0.0;
    std::array<std::size_t, 6> box{};  // cell bounds, inclusive
    Array3D<std::complex<float>> ex, ey, ez;
};

// Tangential E/H phasors sampled at face-cell centers of a closed node box;
// the normal components are stored as zero.
struct SurfacePhasors {
    struct Face {
        int axis = 2;                  // face normal axis
        bool positive = false;         // outward normal sign
        std::size_t plane = 0;         // node plane index
        std::size_t nu = 0, nv = 0;    // sample counts along (axis+1)%3, (axis+2)%3
        std::array<std::vector<std::complex<float>>, 3> e, h;  // per component
    };
    double frequency = 0.0;
    std::array<std::size_t, 6> box{};  // node bounds
    std::vector<Face> faces;           // -x,+x,-y,+y,-z,+z
};

// Little-endian binary field checkpoint: magic "EMCP", u32 node dims, then
// the six float32 arrays in x-fastest order (ex, ey, ez, hx, hy, hz).
void save_checkpoint(const FieldSnapshot& f, const std::string& path);
FieldSnapshot load_checkpoint(const std::string& path);

struct TimeSeriesRecord {
    double dt = 0.0;
    std::size_t steps = 0;
    // Port samples: v_port[s] is V at t=(start+s+1)*dt, i_port[s] is I at
    // t=(start+s+1/2)*dt, v_source[s] the drive at the I timestamp.
    std::vector<double> v_port, i_port, v_source;
    double t_first_v = 0.0, t_first_i = 0.0;
    std::vector<VolumePhasors> volume;
    std::vector<SurfacePhasors> surface;
    std::vector<std::vector<float>> point_series;  // per probe, every step
    std::vector<double> energy;                    // per step when requested
    std::optional<FieldSnapshot> final_fields;
    std::map<std::string, std::string> metadata;
};

// Leapfrog Yee update over the voxelized grid until the stop criterion hits.
// Deterministic for fixed inputs, independent of the thread count.
TimeSeriesRecord run_simulation(const MaterialGrid& mgrid, const ProbeRequest& probes,
                                const SolverSettings& settings);

} // namespace emsim
