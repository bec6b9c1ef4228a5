#include "emsim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "emsim/errors.hpp"
#include "emsim/fdtd.hpp"
#include "emsim/grid.hpp"
#include "emsim/material.hpp"
#include "emsim/voxelize.hpp"

namespace emsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string Scenario::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

// ---------------------------------------------------------------------------
// Config reading helpers
// ---------------------------------------------------------------------------

[[noreturn]] void bad(const std::string& msg) { throw ParseError("scenario config: " + msg); }

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            bad("unknown key '" + key + "' in " + where);
    }
}

double num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) bad(std::string("'") + key + "' must be a number");
    return v.get<double>();
}

bool flag(const json& obj, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) bad(std::string("'") + key + "' must be true or false");
    return v.get<bool>();
}

std::string str(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) bad(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<double> num_list(const json& obj, const char* key) {
    std::vector<double> out;
    if (!obj.contains(key)) return out;
    const json& v = obj.at(key);
    if (!v.is_array()) bad(std::string("'") + key + "' must be an array of numbers");
    for (const json& e : v) {
        if (!e.is_number()) bad(std::string("'") + key + "' must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical form: every resolved parameter in SI, keys sorted by nlohmann's
// object ordering, dumped without whitespace.  Two configs that resolve to
// the same physics hash identically; any parameter change changes the hash.
// ---------------------------------------------------------------------------

const char* kind_name(EnvironmentKind k) {
    switch (k) {
        case EnvironmentKind::FreeSpace: return "free_space";
        case EnvironmentKind::Chest: return "chest";
        default: return "arm";
    }
}

json canonical_json(const Scenario& s) {
    json c;
    c["name"] = s.name;
    json env;
    env["kind"] = kind_name(s.environment);
    if (s.environment != EnvironmentKind::FreeSpace) {
        env["gap"] = s.gap;
        env["tissue_band"] = s.tissue_band;
        if (!s.tissue.empty()) {
            json t;
            for (const auto& [name, o] : s.tissue)
                t[name] = {{"eps_r", o.eps_r}, {"sigma", o.sigma}, {"rho", o.rho}};
            env["tissue"] = t;
        }
    }
    c["environment"] = env;
    const StackupParams& b = s.button;
    c["button"] = {{"ground_side", b.ground_side},
                   {"ground_thickness", b.ground_thickness},
                   {"sheet_sigma", b.sheet_sigma},
                   {"felt_thickness", b.felt_thickness},
                   {"felt_eps", b.felt_eps},
                   {"felt_tan_delta", b.felt_tan_delta},
                   {"air_gap", b.air_gap},
                   {"laminate_thickness", b.rogers_thickness},
                   {"laminate_eps", b.rogers_eps},
                   {"laminate_tan_delta", b.rogers_tan_delta},
                   {"laminate_radius", b.rogers_radius},
                   {"patch_radius", b.patch_radius},
                   {"patch_offset_y", b.patch_offset_y},
                   {"slot_length", b.slot_length},
                   {"slot_width", b.slot_width},
                   {"slot_offset_y", b.slot_offset_y},
                   {"stair_steps", b.stair_steps},
                   {"stair_size", b.stair_size},
                   {"probe_diameter", b.probe_diameter},
                   {"feed_offset", b.feed_offset},
                   {"via_diameter", b.via_diameter},
                   {"via_offset", b.via_offset},
                   {"via_enabled", b.via_enabled},
                   {"port_impedance", b.port_impedance},
                   {"loss_ref_freq", b.loss_ref_freq}};
    c["drive"] = {{"f_center", s.drive.f_center}, {"bandwidth", s.drive.bandwidth}};
    c["grid"] = {{"cell", s.grid.cell},
                 {"padding", s.grid.padding},
                 {"pml_cells", s.grid.pml_cells},
                 {"budget_bytes", s.grid.budget_bytes}};
    // threads is an execution knob, not a physics parameter: results are
    // bitwise identical across worker counts, so it stays out of the hash.
    c["solver"] = {{"max_steps", s.solver.max_steps},
                   {"early_stop_db", s.solver.early_stop_db},
                   {"courant", s.solver.courant}};
    json an;
    an["band"] = {s.analysis.band_lo, s.analysis.band_hi};
    an["points"] = s.analysis.points;
    an["threshold_db"] = s.analysis.threshold_db;
    an["pattern_freqs"] = s.analysis.pattern_freqs;
    an["sar"] = s.analysis.sar;
    if (s.analysis.sar) an["sar_freq"] = s.analysis.sar_freq;
    an["link"] = s.analysis.link;
    c["analysis"] = an;
    if (s.analysis.link) {
        const link::LinkParams& l = s.link;
        c["link"] = {{"tx_power_dbm", l.tx_power_dbm},
                     {"tx_gain_dbi", l.tx_gain_dbi},
                     {"rx_gain_dbi", l.rx_gain_dbi},
                     {"freq", l.freq_hz},
                     {"path_loss_exponent", l.path_loss_exponent},
                     {"fade_margin_db", l.fade_margin_db},
                     {"ref_distance_m", l.ref_distance_m},
                     {"rx_sensitivity_dbm", l.rx_sensitivity_dbm},
                     {"max_distance_m", s.link_max_distance}};
    }
    if (s.sweep.enabled)
        c["sweep"] = {{"parameter", s.sweep.parameter},
                      {"values", s.sweep.values},
                      {"workers", s.sweep.workers}};
    return c;
}

// ---------------------------------------------------------------------------
// Sweepable numeric fields, addressed by their config path
// ---------------------------------------------------------------------------

const std::map<std::string, std::function<void(Scenario&, double)>>& sweep_setters() {
    static const std::map<std::string, std::function<void(Scenario&, double)>> table = {
        {"button.feed_offset_mm", [](Scenario& s, double v) { s.button.feed_offset = v * 1e-3; }},
        {"button.via_offset_mm", [](Scenario& s, double v) { s.button.via_offset = v * 1e-3; }},
        {"button.patch_radius_mm",
         [](Scenario& s, double v) { s.button.patch_radius = v * 1e-3; }},
        {"button.patch_offset_y_mm",
         [](Scenario& s, double v) { s.button.patch_offset_y = v * 1e-3; }},
        {"button.slot_length_mm", [](Scenario& s, double v) { s.button.slot_length = v * 1e-3; }},
        {"button.slot_width_mm", [](Scenario& s, double v) { s.button.slot_width = v * 1e-3; }},
        {"button.slot_offset_y_mm",
         [](Scenario& s, double v) { s.button.slot_offset_y = v * 1e-3; }},
        {"button.air_gap_mm", [](Scenario& s, double v) { s.button.air_gap = v * 1e-3; }},
        {"button.felt_thickness_mm",
         [](Scenario& s, double v) { s.button.felt_thickness = v * 1e-3; }},
        {"button.laminate_radius_mm",
         [](Scenario& s, double v) { s.button.rogers_radius = v * 1e-3; }},
        {"environment.gap_mm", [](Scenario& s, double v) { s.gap = v * 1e-3; }},
        {"environment.tissue_band_ghz", [](Scenario& s, double v) { s.tissue_band = v * 1e9; }},
        {"grid.cell_mm", [](Scenario& s, double v) { s.grid.cell = v * 1e-3; }},
        {"grid.padding_mm", [](Scenario& s, double v) { s.grid.padding = v * 1e-3; }},
        {"drive.f_center_ghz", [](Scenario& s, double v) { s.drive.f_center = v * 1e9; }},
        {"drive.bandwidth_ghz", [](Scenario& s, double v) { s.drive.bandwidth = v * 1e9; }},
        {"solver.courant", [](Scenario& s, double v) { s.solver.courant = v; }},
        {"solver.early_stop_db", [](Scenario& s, double v) { s.solver.early_stop_db = v; }},
        {"link.tx_power_dbm", [](Scenario& s, double v) { s.link.tx_power_dbm = v; }},
        {"link.path_loss_exponent",
         [](Scenario& s, double v) { s.link.path_loss_exponent = v; }},
        {"link.fade_margin_db", [](Scenario& s, double v) { s.link.fade_margin_db = v; }},
        {"link.rx_sensitivity_dbm",
         [](Scenario& s, double v) { s.link.rx_sensitivity_dbm = v; }},
    };
    return table;
}

// ---------------------------------------------------------------------------
// Parse-time sanity checks
// ---------------------------------------------------------------------------

void validate_scenario(const Scenario& s) {
    check_positive(s.grid.cell, "grid.cell_mm");
    check_nonnegative(s.grid.padding, "grid.padding_mm");
    if (s.grid.pml_cells < 1) bad("grid.pml_cells must be >= 1");
    check_positive(s.grid.budget_bytes, "grid.budget_gb");
    if (s.solver.max_steps < 100) bad("solver.max_steps must be >= 100");
    if (!(s.solver.courant > 0.0 && s.solver.courant <= 1.0))
        bad("solver.courant must be in (0, 1]");
    if (s.solver.threads < 1) bad("solver.threads must be >= 1");
    if (s.solver.early_stop_db > 0.0) bad("solver.early_stop_db must be <= 0");
    check_positive(s.drive.f_center, "drive.f_center_ghz");
    check_positive(s.drive.bandwidth, "drive.bandwidth_ghz");
    if (!(s.analysis.band_lo > 0.0 && s.analysis.band_hi > s.analysis.band_lo))
        bad("analysis.band_ghz must be an increasing positive pair");
    if (s.analysis.points < 3) bad("analysis.points must be >= 3");
    if (s.analysis.threshold_db >= 0.0) bad("analysis.threshold_db must be < 0");

    // Everything analysed must sit inside the drive's usable (-40 dB) band.
    // Slightly under the -40 dB support limit so band edges that land exactly
    // on it (the default band does) are still admitted; must stay at least as
    // permissive as the check inside port_spectra.
    const double support = 0.99e-2 * s.drive.spectrum_mag(s.drive.f_center);
    const auto in_band = [&](double f) { return s.drive.spectrum_mag(f) >= support; };
    if (!in_band(s.analysis.band_lo) || !in_band(s.analysis.band_hi))
        bad("analysis.band_ghz exceeds the drive's usable bandwidth");
    for (double f : s.analysis.pattern_freqs) {
        check_positive(f, "analysis.pattern_freqs_ghz entry");
        if (!in_band(f)) bad("pattern frequency outside the drive's usable bandwidth");
    }
    if (s.analysis.sar) {
        if (s.environment == EnvironmentKind::FreeSpace)
            bad("analysis.sar requires a chest or arm environment");
        if (!in_band(s.analysis.sar_freq))
            bad("sar frequency outside the drive's usable bandwidth");
    }
    if (s.environment != EnvironmentKind::FreeSpace) {
        check_nonnegative(s.gap, "environment.gap_mm");
        check_positive(s.tissue_band, "environment.tissue_band_ghz");
    }
    for (const auto& [name, o] : s.tissue) {
        if (!(o.eps_r >= 1.0)) bad("tissue '" + name + "': eps_r must be >= 1");
        check_nonnegative(o.sigma, "tissue sigma");
        check_positive(o.rho, "tissue rho");
    }
    if (s.analysis.link) {
        check_positive(s.link.freq_hz, "link.freq_ghz");
        check_positive(s.link.ref_distance_m, "link.ref_distance_m");
        check_positive(s.link.path_loss_exponent, "link.path_loss_exponent");
        check_positive(s.link_max_distance, "link.max_distance_m");
    }
    if (s.sweep.enabled) {
        if (!sweep_setters().count(s.sweep.parameter))
            bad("sweep.parameter '" + s.sweep.parameter +
                "' is not a sweepable field; see sweepable_parameters()");
        if (s.sweep.values.empty()) bad("sweep.values must not be empty");
        for (double v : s.sweep.values)
            if (!std::isfinite(v)) bad("sweep.values must be finite");
        if (s.sweep.workers < 1) bad("sweep.workers must be >= 1");
    }
}

Scenario from_json(const json& root, const std::string& name_hint) {
    if (!root.is_object()) bad("top level must be an object");
    check_keys(root, "the top level",
               {"name", "environment", "button", "drive", "grid", "solver", "analysis", "link",
                "sweep"});

    Scenario s;
    s.name = str(root, "name", name_hint);
    if (s.name.empty()) bad("'name' must not be empty");

    if (root.contains("environment")) {
        const json& env = root.at("environment");
        if (!env.is_object()) bad("'environment' must be an object");
        check_keys(env, "environment", {"kind", "gap_mm", "tissue_band_ghz", "tissue"});
        const std::string kind = str(env, "kind", "free_space");
        if (kind == "free_space")
            s.environment = EnvironmentKind::FreeSpace;
        else if (kind == "chest")
            s.environment = EnvironmentKind::Chest;
        else if (kind == "arm")
            s.environment = EnvironmentKind::Arm;
        else
            bad("environment.kind must be free_space, chest, or arm");
        if (s.environment == EnvironmentKind::FreeSpace) {
            for (const char* k : {"gap_mm", "tissue_band_ghz", "tissue"})
                if (env.contains(k))
                    bad(std::string("environment.") + k + " is only valid for chest or arm");
        } else {
            s.gap = num(env, "gap_mm", 3.0) * 1e-3;
            s.tissue_band = num(env, "tissue_band_ghz", 2.4) * 1e9;
            if (env.contains("tissue")) {
                const json& t = env.at("tissue");
                if (!t.is_object()) bad("environment.tissue must be an object");
                const auto known = tissue_names();
                for (const auto& [tname, props] : t.items()) {
                    if (std::find(known.begin(), known.end(), tname) == known.end())
                        bad("unknown tissue '" + tname + "' in environment.tissue");
                    if (!props.is_object()) bad("tissue '" + tname + "' must be an object");
                    check_keys(props, "environment.tissue." + tname, {"eps_r", "sigma", "rho"});
                    const Material base = tissue_material(tname, s.tissue_band);
                    TissueOverride o;
                    o.eps_r = num(props, "eps_r", base.eps_r);
                    o.sigma = num(props, "sigma", base.sigma);
                    o.rho = num(props, "rho", base.rho);
                    s.tissue[tname] = o;
                }
            }
        }
    }

    if (root.contains("button")) {
        const json& b = root.at("button");
        if (!b.is_object()) bad("'button' must be an object");
        check_keys(b, "button",
                   {"ground_side_mm", "ground_thickness_mm", "sheet_sigma", "felt_thickness_mm",
                    "felt_eps", "felt_tan_delta", "air_gap_mm", "laminate_thickness_mm",
                    "laminate_eps", "laminate_tan_delta", "laminate_radius_mm", "patch_radius_mm",
                    "patch_offset_y_mm", "slot_length_mm", "slot_width_mm", "slot_offset_y_mm",
                    "stair_steps", "stair_size_mm", "probe_diameter_mm", "feed_offset_mm",
                    "via_diameter_mm", "via_offset_mm", "via_enabled", "port_impedance",
                    "loss_ref_ghz"});
        StackupParams& p = s.button;
        p.ground_side = num(b, "ground_side_mm", p.ground_side * 1e3) * 1e-3;
        p.ground_thickness = num(b, "ground_thickness_mm", p.ground_thickness * 1e3) * 1e-3;
        p.sheet_sigma = num(b, "sheet_sigma", p.sheet_sigma);
        p.felt_thickness = num(b, "felt_thickness_mm", p.felt_thickness * 1e3) * 1e-3;
        p.felt_eps = num(b, "felt_eps", p.felt_eps);
        p.felt_tan_delta = num(b, "felt_tan_delta", p.felt_tan_delta);
        p.air_gap = num(b, "air_gap_mm", p.air_gap * 1e3) * 1e-3;
        p.rogers_thickness = num(b, "laminate_thickness_mm", p.rogers_thickness * 1e3) * 1e-3;
        p.rogers_eps = num(b, "laminate_eps", p.rogers_eps);
        p.rogers_tan_delta = num(b, "laminate_tan_delta", p.rogers_tan_delta);
        p.rogers_radius = num(b, "laminate_radius_mm", p.rogers_radius * 1e3) * 1e-3;
        p.patch_radius = num(b, "patch_radius_mm", p.patch_radius * 1e3) * 1e-3;
        p.patch_offset_y = num(b, "patch_offset_y_mm", p.patch_offset_y * 1e3) * 1e-3;
        p.slot_length = num(b, "slot_length_mm", p.slot_length * 1e3) * 1e-3;
        p.slot_width = num(b, "slot_width_mm", p.slot_width * 1e3) * 1e-3;
        p.slot_offset_y = num(b, "slot_offset_y_mm", p.slot_offset_y * 1e3) * 1e-3;
        p.stair_steps = static_cast<int>(num(b, "stair_steps", p.stair_steps));
        p.stair_size = num(b, "stair_size_mm", p.stair_size * 1e3) * 1e-3;
        p.probe_diameter = num(b, "probe_diameter_mm", p.probe_diameter * 1e3) * 1e-3;
        p.feed_offset = num(b, "feed_offset_mm", p.feed_offset * 1e3) * 1e-3;
        p.via_diameter = num(b, "via_diameter_mm", p.via_diameter * 1e3) * 1e-3;
        p.via_offset = num(b, "via_offset_mm", p.via_offset * 1e3) * 1e-3;
        p.via_enabled = flag(b, "via_enabled", p.via_enabled);
        p.port_impedance = num(b, "port_impedance", p.port_impedance);
        p.loss_ref_freq = num(b, "loss_ref_ghz", p.loss_ref_freq / 1e9) * 1e9;
    }

    if (root.contains("drive")) {
        const json& d = root.at("drive");
        if (!d.is_object()) bad("'drive' must be an object");
        check_keys(d, "drive", {"f_center_ghz", "bandwidth_ghz"});
        s.drive.f_center = num(d, "f_center_ghz", s.drive.f_center / 1e9) * 1e9;
        s.drive.bandwidth = num(d, "bandwidth_ghz", s.drive.bandwidth / 1e9) * 1e9;
    }

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        if (!g.is_object()) bad("'grid' must be an object");
        check_keys(g, "grid", {"cell_mm", "padding_mm", "pml_cells", "budget_gb"});
        s.grid.cell = num(g, "cell_mm", s.grid.cell * 1e3) * 1e-3;
        s.grid.padding = num(g, "padding_mm", s.grid.padding * 1e3) * 1e-3;
        s.grid.pml_cells = static_cast<int>(num(g, "pml_cells", s.grid.pml_cells));
        s.grid.budget_bytes = num(g, "budget_gb", s.grid.budget_bytes / 1e9) * 1e9;
    }

    if (root.contains("solver")) {
        const json& so = root.at("solver");
        if (!so.is_object()) bad("'solver' must be an object");
        check_keys(so, "solver", {"max_steps", "early_stop_db", "courant", "threads"});
        const double steps = num(so, "max_steps", static_cast<double>(s.solver.max_steps));
        if (steps < 0.0) bad("solver.max_steps must be positive");
        s.solver.max_steps = static_cast<std::size_t>(steps);
        s.solver.early_stop_db = num(so, "early_stop_db", s.solver.early_stop_db);
        s.solver.courant = num(so, "courant", s.solver.courant);
        s.solver.threads = static_cast<int>(num(so, "threads", s.solver.threads));
    }

    if (root.contains("analysis")) {
        const json& a = root.at("analysis");
        if (!a.is_object()) bad("'analysis' must be an object");
        check_keys(a, "analysis",
                   {"band_ghz", "points", "threshold_db", "pattern_freqs_ghz", "sar",
                    "sar_freq_ghz", "link"});
        if (a.contains("band_ghz")) {
            const auto band = num_list(a, "band_ghz");
            if (band.size() != 2) bad("analysis.band_ghz must be [lo, hi]");
            s.analysis.band_lo = band[0] * 1e9;
            s.analysis.band_hi = band[1] * 1e9;
        }
        s.analysis.points =
            static_cast<std::size_t>(num(a, "points", static_cast<double>(s.analysis.points)));
        s.analysis.threshold_db = num(a, "threshold_db", s.analysis.threshold_db);
        for (double f : num_list(a, "pattern_freqs_ghz"))
            s.analysis.pattern_freqs.push_back(f * 1e9);
        s.analysis.sar = flag(a, "sar", s.analysis.sar);
        s.analysis.sar_freq = num(a, "sar_freq_ghz", s.analysis.sar_freq / 1e9) * 1e9;
        s.analysis.link = flag(a, "link", s.analysis.link);
    }

    if (root.contains("link")) {
        const json& l = root.at("link");
        if (!l.is_object()) bad("'link' must be an object");
        check_keys(l, "link",
                   {"tx_power_dbm", "tx_gain_dbi", "rx_gain_dbi", "freq_ghz",
                    "path_loss_exponent", "fade_margin_db", "ref_distance_m",
                    "rx_sensitivity_dbm", "max_distance_m"});
        link::LinkParams& lp = s.link;
        lp.tx_power_dbm = num(l, "tx_power_dbm", lp.tx_power_dbm);
        lp.tx_gain_dbi = num(l, "tx_gain_dbi", lp.tx_gain_dbi);
        lp.rx_gain_dbi = num(l, "rx_gain_dbi", lp.rx_gain_dbi);
        lp.freq_hz = num(l, "freq_ghz", lp.freq_hz / 1e9) * 1e9;
        lp.path_loss_exponent = num(l, "path_loss_exponent", lp.path_loss_exponent);
        lp.fade_margin_db = num(l, "fade_margin_db", lp.fade_margin_db);
        lp.ref_distance_m = num(l, "ref_distance_m", lp.ref_distance_m);
        lp.rx_sensitivity_dbm = num(l, "rx_sensitivity_dbm", lp.rx_sensitivity_dbm);
        s.link_max_distance = num(l, "max_distance_m", s.link_max_distance);
    }

    if (root.contains("sweep")) {
        const json& sw = root.at("sweep");
        if (!sw.is_object()) bad("'sweep' must be an object");
        check_keys(sw, "sweep", {"parameter", "values", "workers"});
        s.sweep.enabled = true;
        s.sweep.parameter = str(sw, "parameter", "");
        s.sweep.values = num_list(sw, "values");
        s.sweep.workers = static_cast<int>(num(sw, "workers", 1));
    }

    validate_scenario(s);
    refresh_hash(s);
    return s;
}

} // namespace

void refresh_hash(Scenario& s) {
    s.canonical = canonical_json(s).dump();
    s.hash = fnv1a64(s.canonical);
}

Scenario parse_scenario_text(const std::string& text, const std::string& name_hint) {
    json root;
    try {
        root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        bad(std::string("not valid JSON: ") + e.what());
    }
    return from_json(root, name_hint);
}

Scenario parse_scenario(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("scenario config: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), path.stem().string());
}

std::vector<std::string> sweepable_parameters() {
    std::vector<std::string> out;
    for (const auto& [k, v] : sweep_setters()) {
        (void)v;
        out.push_back(k);
    }
    return out;
}

void apply_sweep_value(Scenario& s, const std::string& parameter, double value) {
    const auto& table = sweep_setters();
    auto it = table.find(parameter);
    if (it == table.end())
        throw ParseError("scenario config: sweep.parameter '" + parameter +
                         "' is not a sweepable field");
    if (!std::isfinite(value)) throw ParseError("scenario config: sweep value must be finite");
    it->second(s, value);
    validate_scenario(s);
    refresh_hash(s);
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Deletes everything it wrote unless commit() is called; run_scenario never
// leaves partial artifact sets behind.
class ArtifactSink {
  public:
    explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw OutputError("cannot create output directory '" + dir_.string() + "'");
    }
    ~ArtifactSink() {
        if (committed_) return;
        for (const auto& name : names_) {
            std::error_code ec;
            fs::remove(dir_ / name, ec);
        }
    }
    void write(const std::string& name, const std::string& body) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        out.flush();
        if (!out) throw OutputError("failed to write '" + (dir_ / name).string() + "'");
        names_.push_back(name);
    }
    void commit() { committed_ = true; }
    const std::vector<std::string>& names() const { return names_; }

  private:
    fs::path dir_;
    std::vector<std::string> names_;
    bool committed_ = false;
};

std::string csv_header(const Scenario& s, const std::string& normalization) {
    std::string h;
    h += "# scenario " + s.name + "\n";
    h += "# hash " + s.hash_hex() + "\n";
    h += "# " + normalization + "\n";
    return h;
}

std::string freq_tag(double f) {
    return std::to_string(static_cast<long long>(std::llround(f / 1e6))) + "mhz";
}

std::array<std::size_t, 6> tissue_bbox(const MaterialGrid& mg) {
    std::array<std::size_t, 6> box{mg.grid.nx, 0, mg.grid.ny, 0, mg.grid.nz, 0};
    bool any = false;
    for (std::size_t k = 0; k < mg.grid.nz; ++k)
        for (std::size_t j = 0; j < mg.grid.ny; ++j)
            for (std::size_t i = 0; i < mg.grid.nx; ++i) {
                if (!mg.tissue(i, j, k)) continue;
                any = true;
                box[0] = std::min(box[0], i);
                box[1] = std::max(box[1], i);
                box[2] = std::min(box[2], j);
                box[3] = std::max(box[3], j);
                box[4] = std::min(box[4], k);
                box[5] = std::max(box[5], k);
            }
    if (!any) throw PostProcessError("SAR requested but the voxelized scene has no tissue");
    return box;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct PatternSummary {
    std::string tag;
    double efficiency = 0.0;  // radiated / accepted
    double peak_gain_dbi = -1e30;
};

} // namespace

std::string link_csv(const Scenario& s) {
    std::string body = csv_header(
        s, "tx " + fmt(s.link.tx_power_dbm) + " dBm, gains " + fmt(s.link.tx_gain_dbi) + "/" +
               fmt(s.link.rx_gain_dbi) + " dBi, n=" + fmt(s.link.path_loss_exponent) +
               ", fade " + fmt(s.link.fade_margin_db) + " dB, sensitivity " +
               fmt(s.link.rx_sensitivity_dbm) + " dBm at " + fmt(s.link.freq_hz / 1e9) +
               " GHz");
    body += "distance_m,pr_dbm,margin_db\n";
    for (double d = 1.0; d <= s.link_max_distance + 1e-9; d += 1.0)
        body += fmt(d) + "," + fmt(link::received_power_dbm(s.link, d)) + "," +
                fmt(link::link_margin_db(s.link, d)) + "\n";
    return body;
}

ScenePlan plan_scenario(const Scenario& s) {
    ScenePlan plan;
    plan.scene = build_button_stackup(s.button);
    plan.scene.port.excitation = s.drive;
    if (s.environment == EnvironmentKind::Chest)
        plan.scene = build_chest_phantom(std::move(plan.scene), s.gap, s.tissue_band);
    else if (s.environment == EnvironmentKind::Arm)
        plan.scene = build_arm_phantom(std::move(plan.scene), s.gap, s.tissue_band);
    plan.scene.name = s.name;
    for (auto& sh : plan.scene.shapes) {
        if (!(sh.material.rho > 0.0)) continue;
        auto it = s.tissue.find(sh.material.name);
        if (it != s.tissue.end()) {
            sh.material.eps_r = it->second.eps_r;
            sh.material.sigma = it->second.sigma;
            sh.material.rho = it->second.rho;
        }
        plan.tissues.emplace(sh.material.name, sh.material);
    }
    plan.grid = make_grid(plan.scene, s.grid.cell, s.grid.padding, s.grid.pml_cells);
    plan.warnings = grid_warnings(plan.grid, plan.scene, s.analysis.band_hi);
    plan.est_bytes = static_cast<double>(plan.grid.cells()) * 64.0;
    return plan;
}

RunResult run_scenario(const Scenario& s, const fs::path& out_dir, const RunOptions& opt) {
    const auto t_start = std::chrono::steady_clock::now();
    RunResult rr;
    rr.dir = out_dir;

    if (!opt.quiet)
        std::cout << "[emsim] scenario '" << s.name << "' (hash " << s.hash_hex() << ")\n";

    ScenePlan plan = plan_scenario(s);
    const Scene& scene = plan.scene;
    const GridSpec& grid = plan.grid;
    const std::map<std::string, Material>& tissues_used = plan.tissues;
    rr.warnings = plan.warnings;
    const double est_bytes = plan.est_bytes;
    // Rough wall clock from a nominal 10 ns per cell update on one worker;
    // early stopping usually finishes well under it.
    const double est_seconds = static_cast<double>(grid.cells()) * s.solver.max_steps *
                               1.0e-8 / std::max(1, s.solver.threads);
    if (!opt.quiet)
        std::cout << "[emsim] grid " << grid.nx << " x " << grid.ny << " x " << grid.nz
                  << " cells, " << fmt(grid.cells() / 1e6) << " M, est "
                  << fmt(est_bytes / 1e6) << " MB solver footprint, ~"
                  << fmt(est_seconds) << " s at " << s.solver.max_steps << " steps\n";

    const auto t_vox = std::chrono::steady_clock::now();
    const MaterialGrid mg = voxelize(scene, grid, s.grid.budget_bytes);
    rr.timings_s["voxelize"] = seconds_since(t_vox);

    // --- probes --------------------------------------------------------------
    ProbeRequest probes;
    if (!s.analysis.pattern_freqs.empty()) {
        const std::size_t m = static_cast<std::size_t>(s.grid.pml_cells) + 2;
        if (grid.nx <= 2 * m || grid.ny <= 2 * m || grid.nz <= 2 * m)
            throw PostProcessError("grid too small to host the far-field surface");
        probes.surface_freqs = s.analysis.pattern_freqs;
        probes.surface_box = {m, grid.nx - m, m, grid.ny - m, m, grid.nz - m};
    }
    if (s.analysis.sar) {
        probes.volume_freqs = {s.analysis.sar_freq};
        probes.volume_box = tissue_bbox(mg);
    }

    // --- solve ---------------------------------------------------------------
    SolverSettings st;
    st.courant = s.solver.courant;
    st.threads = s.solver.threads;
    st.stop.max_steps = s.solver.max_steps;
    st.stop.energy_floor_db = s.solver.early_stop_db;
    const auto t_solve = std::chrono::steady_clock::now();
    const TimeSeriesRecord rec = run_simulation(mg, probes, st);
    rr.timings_s["solve"] = seconds_since(t_solve);
    rr.steps_run = rec.steps;
    if (!opt.quiet)
        std::cout << "[emsim] solved " << rec.steps << " steps in "
                  << fmt(rr.timings_s["solve"]) << " s\n";

    // --- post + artifacts ------------------------------------------------------
    const auto t_post = std::chrono::steady_clock::now();
    std::vector<double> freqs(s.analysis.points);
    const double fstep =
        (s.analysis.band_hi - s.analysis.band_lo) / static_cast<double>(s.analysis.points - 1);
    for (std::size_t n = 0; n < freqs.size(); ++n)
        freqs[n] = s.analysis.band_lo + static_cast<double>(n) * fstep;

    const PortSpectrum ps = port_spectra(rec, s.drive, s.button.port_impedance, freqs);
    rr.freqs = freqs;
    rr.s11_db = ps.s11_db;
    rr.resonances = find_resonances(freqs, ps.s11_db, s.analysis.threshold_db);

    ArtifactSink sink(out_dir);

    {
        std::string body = csv_header(
            s, "s11 and input impedance vs a " + fmt(s.button.port_impedance) + " ohm reference");
        body += "frequency_hz,s11_db,re_zin,im_zin\n";
        for (std::size_t n = 0; n < freqs.size(); ++n)
            body += fmt(freqs[n]) + "," + fmt(ps.s11_db[n]) + "," + fmt(ps.z[n].real()) + "," +
                    fmt(ps.z[n].imag()) + "\n";
        sink.write("s11.csv", body);
    }
    {
        std::string body =
            csv_header(s, "reflection dips at or below " + fmt(s.analysis.threshold_db) + " dB");
        body += "f_res_hz,s11_db,f_lo_hz,f_hi_hz\n";
        for (const Resonance& r : rr.resonances)
            body += fmt(r.f_res) + "," + fmt(r.s11_db) + "," + fmt(r.f_lo) + "," + fmt(r.f_hi) +
                    "\n";
        sink.write("resonances.csv", body);
    }

    std::vector<PatternSummary> patterns;
    for (double f : s.analysis.pattern_freqs) {
        const SurfacePhasors* surf = nullptr;
        for (const auto& sp : rec.surface)
            if (sp.frequency == f) surf = &sp;
        if (!surf) throw PostProcessError("surface phasors missing for a pattern frequency");

        const double p_acc = port_spectra(rec, s.drive, s.button.port_impedance, {f})
                                 .p_accepted.front();
        if (!(p_acc > 0.0))
            throw PostProcessError("no accepted port power at " + fmt(f / 1e9) + " GHz");
        const FarField ff(*surf, grid);
        // Cuts carry directivity; shifting by radiated/accepted turns them
        // into gain per watt accepted without re-integrating per angle.
        const double gain_shift = 10.0 * std::log10(ff.radiated_power() / p_acc);

        PatternSummary summary;
        summary.tag = freq_tag(f);
        summary.efficiency = ff.radiated_power() / p_acc;

        const std::string norm = "gain per watt accepted at the port; angle in degrees";
        std::string h_body = csv_header(s, norm);
        h_body += "angle_deg,gain_dbi\n";
        for (const auto& pt : ff.horizontal_cut(1.0)) {
            const double g = pt.dbi + gain_shift;
            summary.peak_gain_dbi = std::max(summary.peak_gain_dbi, g);
            h_body += fmt(pt.angle_deg) + "," + fmt(g) + "\n";
        }
        sink.write("pattern_h_" + summary.tag + ".csv", h_body);

        std::string v_body = csv_header(s, norm);
        v_body += "angle_deg,gain_dbi\n";
        for (const auto& pt : ff.vertical_cut(1.0)) {
            const double g = pt.dbi + gain_shift;
            summary.peak_gain_dbi = std::max(summary.peak_gain_dbi, g);
            v_body += fmt(pt.angle_deg) + "," + fmt(g) + "\n";
        }
        sink.write("pattern_v_" + summary.tag + ".csv", v_body);
        patterns.push_back(summary);
    }

    if (s.analysis.sar) {
        const VolumePhasors* vol = nullptr;
        for (const auto& vp : rec.volume)
            if (vp.frequency == s.analysis.sar_freq) vol = &vp;
        if (!vol) throw PostProcessError("volume phasors missing for the SAR frequency");
        const double p_acc = port_spectra(rec, s.drive, s.button.port_impedance,
                                          {s.analysis.sar_freq})
                                 .p_accepted.front();
        if (!(p_acc > 0.0)) throw PostProcessError("no accepted port power at the SAR frequency");
        const SarReport rep = sar_report(*vol, mg, p_acc);
        if (!rep.sar_1g.found || !rep.sar_10g.found)
            throw PostProcessError("SAR averaging cube does not fit inside the tissue region");
        rr.sar = rep;

        std::string tissue_note = "tissues:";
        for (const auto& [name, m] : tissues_used)
            tissue_note += " " + name + " eps_r=" + fmt(m.eps_r) + " sigma=" + fmt(m.sigma) +
                           " rho=" + fmt(m.rho) + ";";
        std::string body = csv_header(s, "W/kg per watt accepted at " +
                                             fmt(s.analysis.sar_freq / 1e9) + " GHz; " +
                                             tissue_note);
        body += "limit,peak_w_per_kg,margin_db,location\n";
        const auto row = [&](double limit, const AveragedSar& a) {
            body += fmt(limit) + "," + fmt(a.sar) + "," + fmt(10.0 * std::log10(limit / a.sar)) +
                    "," + std::to_string(a.i) + ":" + std::to_string(a.j) + ":" +
                    std::to_string(a.k) + "\n";
        };
        row(kSarLimit1g, rep.sar_1g);
        row(kSarLimit10g, rep.sar_10g);
        sink.write("sar.csv", body);
    }

    if (s.analysis.link) sink.write("link.csv", link_csv(s));
    rr.timings_s["post"] = seconds_since(t_post);
    rr.timings_s["total"] = seconds_since(t_start);

    // --- manifest ---------------------------------------------------------
    {
        json man;
        man["name"] = s.name;
        man["hash"] = s.hash_hex();
        man["resolved"] = json::parse(s.canonical);
        man["grid"] = {{"cells", {grid.nx, grid.ny, grid.nz}},
                       {"cell_m", {grid.dx, grid.dy, grid.dz}},
                       {"origin_m", {grid.origin.x, grid.origin.y, grid.origin.z}},
                       {"pml_cells", grid.pml_cells},
                       {"estimated_solver_bytes", est_bytes}};
        man["steps_run"] = rr.steps_run;
        man["timings_s"] = rr.timings_s;
        man["warnings"] = rr.warnings;
        std::vector<std::string> notes = scene.notes;
        notes.insert(notes.end(), mg.notes.begin(), mg.notes.end());
        man["notes"] = notes;
        json res = json::array();
        for (const Resonance& r : rr.resonances)
            res.push_back({{"f_res_hz", r.f_res},
                           {"s11_db", r.s11_db},
                           {"f_lo_hz", r.f_lo},
                           {"f_hi_hz", r.f_hi}});
        man["resonances"] = res;
        if (!patterns.empty()) {
            json pat;
            for (const auto& p : patterns)
                pat[p.tag] = {{"efficiency", p.efficiency}, {"peak_gain_dbi", p.peak_gain_dbi}};
            man["patterns"] = pat;
        }
        if (rr.sar) {
            man["sar"] = {{"p_accepted_w", rr.sar->p_accepted_w},
                          {"peak_point_w_per_kg", rr.sar->peak_point},
                          {"sar_1g", rr.sar->sar_1g.sar},
                          {"sar_10g", rr.sar->sar_10g.sar},
                          {"pass_1g", rr.sar->pass_1g},
                          {"pass_10g", rr.sar->pass_10g}};
        }
        if (s.analysis.link) man["link"] = {{"max_range_m", link::max_range_m(s.link)}};
        if (!tissues_used.empty()) {
            json t;
            for (const auto& [name, m] : tissues_used)
                t[name] = {{"eps_r", m.eps_r}, {"sigma", m.sigma}, {"rho", m.rho}};
            man["tissues"] = t;
        }
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        man["unix_time_s"] =
            std::chrono::duration_cast<std::chrono::seconds>(now).count();
        sink.write("run_manifest.json", man.dump(2) + "\n");
    }

    sink.commit();
    rr.files = sink.names();
    if (!opt.quiet)
        std::cout << "[emsim] wrote " << rr.files.size() << " artifacts to " << out_dir.string()
                  << "\n";
    return rr;
}

SweepResult run_sweep(const Scenario& s, const fs::path& out_dir, const RunOptions& opt) {
    if (!s.sweep.enabled) throw ParseError("scenario config: no sweep block present");
    // Validate the parameter path before any run starts.
    if (!sweep_setters().count(s.sweep.parameter))
        throw ParseError("scenario config: sweep.parameter '" + s.sweep.parameter +
                         "' is not a sweepable field");

    std::vector<double> values = s.sweep.values;
    std::sort(values.begin(), values.end());

    SweepResult sr;
    sr.dir = out_dir;
    for (double v : values) {
        std::string tag = fmt(v);
        for (char& c : tag) {
            if (c == '.') c = 'p';
            if (c == '-') c = 'm';
        }
        Scenario run = s;
        run.sweep = {};
        run.name = s.name + "_" + tag;
        apply_sweep_value(run, s.sweep.parameter, v);  // also recomputes the hash
        sr.runs.push_back(run_scenario(run, out_dir / ("value_" + tag), opt));
    }

    std::string body;
    body += "# scenario " + s.name + "\n";
    body += "# hash " + s.hash_hex() + "\n";
    body += "# sweep of " + s.sweep.parameter + "; first two reflection dips per value\n";
    body += "sweep_value,n_resonances,f_res_1_hz,s11_db_1,f_res_2_hz,s11_db_2\n";
    for (std::size_t n = 0; n < values.size(); ++n) {
        const auto& rs = sr.runs[n].resonances;
        body += fmt(values[n]) + "," + std::to_string(rs.size());
        for (std::size_t m = 0; m < 2; ++m) {
            if (m < rs.size())
                body += "," + fmt(rs[m].f_res) + "," + fmt(rs[m].s11_db);
            else
                body += ",,";
        }
        body += "\n";
    }
    ArtifactSink sink(out_dir);
    sink.write("sweep.csv", body);
    sink.commit();
    sr.combined_csv = out_dir / "sweep.csv";
    return sr;
}

} // namespace emsim
