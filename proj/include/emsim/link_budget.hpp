#pragma once

namespace emsim::link {

// Log-distance path-loss link budget.  Powers in dBm, gains in dBi.
struct LinkParams {
    double tx_power_dbm = 20.0;
    double tx_gain_dbi = 2.0;
    double rx_gain_dbi = 2.0;
    double freq_hz = 2.45e9;
    double path_loss_exponent = 2.0;  // n; 2 = free space
    double fade_margin_db = 0.0;
    double ref_distance_m = 1.0;      // d0 for the log-distance model
    double rx_sensitivity_dbm = -90.0;
};

// Free-space path loss in dB at distance d (m) and frequency f (Hz):
//   FSPL = 20 log10(d) + 20 log10(f) + 20 log10(4*pi/c)
double free_space_path_loss_db(double distance_m, double freq_hz);

// Path loss of the log-distance model: FSPL(d0) + 10 n log10(d/d0).
double path_loss_db(const LinkParams& p, double distance_m);

// Received power at distance d: Pt + Gt + Gr - PL(d) - fade.
double received_power_dbm(const LinkParams& p, double distance_m);

// Link margin above receiver sensitivity at distance d.
double link_margin_db(const LinkParams& p, double distance_m);

// Largest distance with received power >= sensitivity (closed form).
double max_range_m(const LinkParams& p);

// On-body wearable link defaults used for the range claim:
// 20 dBm TX, 2 dBi antennas both ends, n = 3.3, 10 dB fade margin,
// -90 dBm sensitivity at 2.45 GHz.
LinkParams body_area_preset();

} // namespace emsim::link
