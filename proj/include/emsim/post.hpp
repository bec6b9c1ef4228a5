#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "emsim/excitation.hpp"
#include "emsim/fdtd.hpp"
#include "emsim/grid.hpp"
#include "emsim/voxelize.hpp"

namespace emsim {

// ---------------------------------------------------------------------------
// Port spectra / reflection coefficient
// ---------------------------------------------------------------------------

struct PortSpectrum {
    std::vector<double> freqs;
    std::vector<std::complex<double>> v;    // port voltage spectrum (V*s)
    std::vector<std::complex<double>> i;    // port current spectrum (A*s)
    std::vector<std::complex<double>> z;    // input impedance V/I (ohm)
    std::vector<std::complex<double>> s11;  // vs z_ref
    std::vector<double> s11_db;             // 20*log10|s11|, floored at -80 dB
    double z_ref = 50.0;
    // Accepted power density 0.5*Re(V * conj(I)); SAR and gain figures are
    // normalized per watt with this.
    std::vector<double> p_accepted;
};

// Discrete Fourier transforms of the recorded port series at the requested
// frequencies.  Every frequency must lie inside the drive's usable band
// (within 40 dB of its spectral peak); the staggered V/I timestamps recorded
// by the solver are honoured.
PortSpectrum port_spectra(const TimeSeriesRecord& rec, const ExcitationSpec& drive,
                          double z_ref, const std::vector<double>& freqs);

// One matched-band dip of a reflection curve.
struct Resonance {
    double f_res = 0.0;    // parabolic-refined minimum location
    double s11_db = 0.0;   // depth at the minimum sample
    double f_lo = 0.0;     // band edges where the curve crosses threshold_db
    double f_hi = 0.0;     // (clamped to the scan range when not bracketed)
};

// Local minima of s11_db at or below threshold_db, in ascending frequency.
// Endpoints of the scan are not eligible minima.
std::vector<Resonance> find_resonances(const std::vector<double>& freqs,
                                       const std::vector<double>& s11_db,
                                       double threshold_db = -10.0);

// ---------------------------------------------------------------------------
// Specific absorption rate
// ---------------------------------------------------------------------------

// Regulatory averaging limits, W/kg.
inline constexpr double kSarLimit1g = 1.6;
inline constexpr double kSarLimit10g = 2.0;

// Per-cell SAR sigma*|E|^2/(2*rho) over the phasor box; zero outside tissue.
// E is interpolated to cell centers from the edge phasors.  Values carry the
// run's spectral drive scale; divide by the accepted power at the same
// frequency to normalize.
struct SarField {
    std::array<std::size_t, 6> box{};  // cell bounds, inclusive
    Array3D<float> point;              // (i1-i0+1) x ... cells
};
SarField point_sar(const VolumePhasors& vol, const MaterialGrid& mg);

// Cube-averaged SAR: for every tissue cell, the smallest odd whole-cell cube
// centered there that (a) stays inside the field box and (b) holds at least
// target_mass_kg of tissue.  Reports the peak over all centers; ties resolve
// to the lowest linear cell index.
struct AveragedSar {
    bool found = false;
    double sar = 0.0;             // W/kg at the run's drive scale
    std::size_t i = 0, j = 0, k = 0;  // peak cube center (grid cells)
    std::size_t cube_cells = 0;       // cube side, cells
    double mass_kg = 0.0;             // tissue mass inside the peak cube
};
AveragedSar averaged_sar(const SarField& field, const MaterialGrid& mg, double target_mass_kg);

// Point + 1 g + 10 g summary normalized to 1 W accepted power, with
// pass/fail against the averaging limits.
struct SarReport {
    double p_accepted_w = 0.0;
    double peak_point = 0.0;  // W/kg per W accepted
    std::size_t peak_i = 0, peak_j = 0, peak_k = 0;
    AveragedSar sar_1g, sar_10g;  // .sar normalized per W accepted
    bool pass_1g = false, pass_10g = false;
};
SarReport sar_report(const VolumePhasors& vol, const MaterialGrid& mg, double p_accepted_w);

// ---------------------------------------------------------------------------
// Near-field to far-field transform
// ---------------------------------------------------------------------------

// Radiating equivalent of the tangential fields recorded on a closed box.
// Directivity and normalized patterns are independent of the drive scale.
class FarField {
  public:
    FarField(const SurfacePhasors& surf, const GridSpec& grid);

    double frequency() const { return freq_; }
    // Radiation intensity U(theta, phi), W/sr at the run's drive scale.
    double intensity(double theta_rad, double phi_rad) const;
    // Total radiated power from sphere quadrature (cached on first use).
    double radiated_power() const;
    double directivity_dbi(double theta_rad, double phi_rad) const;
    // Partial gain against an explicit accepted power at the same scale.
    double gain_dbi(double theta_rad, double phi_rad, double p_accepted) const;

    struct CutPoint {
        double angle_deg = 0.0;
        double dbi = 0.0;
    };
    // Principal-plane directivity cuts in 'step_deg' increments.  The
    // vertical cut is a signed elevation sweep, angle a in [-180, 180):
    // theta = |a|, phi = 0 for a >= 0 and 180 deg otherwise.  The horizontal
    // cut sweeps phi in [0, 360) at theta = 90 deg.
    std::vector<CutPoint> vertical_cut(double step_deg = 1.0) const;
    std::vector<CutPoint> horizontal_cut(double step_deg = 1.0) const;

  private:
    struct Source {  // one face sample: position and J/M moments * dA
        double x, y, z;
        std::complex<double> j[3], m[3];
    };
    std::vector<Source> srcs_;
    double freq_ = 0.0;
    double k_ = 0.0;
    mutable double p_rad_ = -1.0;
};

// Real power leaving the box: 0.5 * Re(E x H*) . n integrated over the six
// faces.  Should agree with FarField::radiated_power for a lossless exterior.
double surface_power(const SurfacePhasors& surf, const GridSpec& grid);

} // namespace emsim
