#pragma once

namespace emsim {

// Gaussian-modulated sinusoid drive waveform:
//   s(t) = A * exp(-(t-t0)^2 / (2 tau^2)) * sin(2*pi*f_center*(t-t0))
// The sine carrier gives an exact spectral null at DC; bandwidth is the
// two-sided width at which the spectrum is 40 dB below its peak.
struct ExcitationSpec {
    double f_center = 4.0e9;    // Hz
    double bandwidth = 6.0e9;   // Hz, -40 dB two-sided width (default covers 1..7 GHz)
    double amplitude = 1.0;     // V
    double delay_factor = 4.5;  // t0 as a multiple of tau

    double tau() const;         // gaussian width from the -40 dB bandwidth
    double delay() const;       // t0 = delay_factor * tau
    double value(double t) const;

    // Magnitude of the analytic Fourier transform at f (arbitrary common
    // scale); used to check that an analysis band sits inside the
    // excitation's usable spectral support.
    double spectrum_mag(double f) const;
};

} // namespace emsim
