#include "emsim/link_budget.hpp"

#include <cmath>

#include "emsim/errors.hpp"

namespace emsim::link {

namespace {

// Rounded 20*log10(4*pi/c) constant of the dBm/MHz-style FSPL formula;
// the conventional -147.55 is kept so results match published budgets.
constexpr double kFsplOffsetDb = -147.55;

void check(const LinkParams& p) {
    check_positive(p.freq_hz, "frequency");
    check_positive(p.path_loss_exponent, "path loss exponent");
    check_positive(p.ref_distance_m, "reference distance");
    check_nonnegative(p.fade_margin_db, "fade margin");
}

} // namespace

double free_space_path_loss_db(double distance_m, double freq_hz) {
    check_positive(distance_m, "distance");
    check_positive(freq_hz, "frequency");
    return 20.0 * std::log10(distance_m) + 20.0 * std::log10(freq_hz) + kFsplOffsetDb;
}

double path_loss_db(const LinkParams& p, double distance_m) {
    check(p);
    if (distance_m < p.ref_distance_m)
        throw InvalidArgument("path_loss_db: distance must be >= the reference distance");
    return free_space_path_loss_db(p.ref_distance_m, p.freq_hz) +
           10.0 * p.path_loss_exponent * std::log10(distance_m / p.ref_distance_m);
}

double received_power_dbm(const LinkParams& p, double distance_m) {
    return p.tx_power_dbm + p.tx_gain_dbi + p.rx_gain_dbi - path_loss_db(p, distance_m) -
           p.fade_margin_db;
}

double link_margin_db(const LinkParams& p, double distance_m) {
    return received_power_dbm(p, distance_m) - p.rx_sensitivity_dbm;
}

double max_range_m(const LinkParams& p) {
    check(p);
    const double budget = p.tx_power_dbm + p.tx_gain_dbi + p.rx_gain_dbi - p.fade_margin_db -
                          p.rx_sensitivity_dbm - free_space_path_loss_db(p.ref_distance_m, p.freq_hz);
    const double range = p.ref_distance_m * std::pow(10.0, budget / (10.0 * p.path_loss_exponent));
    // No feasible distance at or beyond d0: report zero range rather than throwing.
    return range >= p.ref_distance_m ? range : 0.0;
}

LinkParams body_area_preset() {
    LinkParams p;
    p.tx_power_dbm = 20.0;
    p.tx_gain_dbi = 2.0;
    p.rx_gain_dbi = 2.0;
    p.freq_hz = 2.45e9;
    p.path_loss_exponent = 3.3;
    p.fade_margin_db = 10.0;
    p.ref_distance_m = 1.0;
    p.rx_sensitivity_dbm = -90.0;
    return p;
}

} // namespace emsim::link
