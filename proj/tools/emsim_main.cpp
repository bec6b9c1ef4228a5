// Command-line front end: closed-form patch design, scenario runs, parameter
// sweeps, link-budget tables and configuration validation.
//
// Exit codes: 0 all requested artifacts written, 2 configuration/usage
// problem, 3 solver divergence, 4 post-processing or output failure,
// 1 anything unexpected.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emsim/cavity_model.hpp"
#include "emsim/errors.hpp"
#include "emsim/link_budget.hpp"
#include "emsim/scenario.hpp"

namespace fs = std::filesystem;
using namespace emsim;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

const char* environment_name(EnvironmentKind e) {
    switch (e) {
        case EnvironmentKind::Chest:
            return "chest";
        case EnvironmentKind::Arm:
            return "arm";
        default:
            return "free_space";
    }
}

void write_file(const fs::path& path, const std::string& body) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw OutputError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << body)) throw OutputError("cannot write " + path.string());
}

// --------------------------------------------------------------------------
// design: cavity-model patch sizing with the inverse check
// --------------------------------------------------------------------------

struct DesignOpts {
    std::vector<double> freqs_ghz;
    double eps_r = 2.2;
    double height_mm = 1.574;
    std::string csv;
};

int run_design(const DesignOpts& o) {
    std::string csv =
        "frequency_ghz,eps_r,height_mm,radius_mm,effective_radius_mm,"
        "check_frequency_ghz,check_error_pct\n";
    std::printf("%12s %7s %10s %10s %11s %12s %8s\n", "f_target_ghz", "eps_r", "height_mm",
                "radius_mm", "eff_rad_mm", "f_check_ghz", "err_pct");
    for (double fg : o.freqs_ghz) {
        const double f = fg * 1e9;
        const double h = o.height_mm * 1e-3;
        const double a = cavity::patch_radius_for_frequency(f, o.eps_r, h);
        const double ae = cavity::effective_radius(a, o.eps_r, h);
        const double fc = cavity::resonant_frequency(a, o.eps_r, h);
        const double err = 100.0 * (fc - f) / f;
        std::printf("%12.4f %7.3f %10.4f %10.4f %11.4f %12.4f %8.3f\n", fg, o.eps_r,
                    o.height_mm, a * 1e3, ae * 1e3, fc / 1e9, err);
        csv += fmt(fg) + "," + fmt(o.eps_r) + "," + fmt(o.height_mm) + "," + fmt(a * 1e3) +
               "," + fmt(ae * 1e3) + "," + fmt(fc / 1e9) + "," + fmt(err) + "\n";
    }
    if (!o.csv.empty()) {
        write_file(o.csv, csv);
        std::cout << "wrote " << o.csv << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------------
// run / sweep
// --------------------------------------------------------------------------

struct CommonOpts {
    std::string config;
    std::string out = "runs";
    int threads = 0;       // 0: keep the scenario's value
    double cell_mm = 0.0;  // 0: keep the scenario's value
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("scenario", o.config, "scenario configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "artifact directory root")->capture_default_str();
    cmd->add_option("--threads", o.threads, "solver worker count override")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--cell-mm", o.cell_mm, "grid cell size override, mm")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

Scenario load_with_overrides(const CommonOpts& o) {
    Scenario s = parse_scenario(o.config);
    if (o.threads > 0) s.solver.threads = o.threads;
    if (o.cell_mm > 0.0) apply_sweep_value(s, "grid.cell_mm", o.cell_mm);
    return s;
}

int run_run(const CommonOpts& o) {
    const Scenario s = load_with_overrides(o);
    const RunResult rr = run_scenario(s, fs::path(o.out) / s.name, RunOptions{o.quiet});
    if (!o.quiet) {
        for (const auto& r : rr.resonances)
            std::cout << "[emsim] dip " << fmt(r.f_res / 1e9) << " GHz at " << fmt(r.s11_db)
                      << " dB (" << fmt(r.f_lo / 1e9) << " - " << fmt(r.f_hi / 1e9)
                      << " GHz below threshold)\n";
        if (rr.resonances.empty()) std::cout << "[emsim] no dips below threshold\n";
    }
    return 0;
}

int run_sweep_cmd(const CommonOpts& o) {
    const Scenario s = load_with_overrides(o);
    if (!s.sweep.enabled)
        throw ParseError("scenario '" + s.name + "' has no sweep block; use `run`");
    const SweepResult sr = run_sweep(s, fs::path(o.out) / s.name, RunOptions{o.quiet});
    if (!o.quiet)
        std::cout << "[emsim] sweep of " << s.sweep.parameter << " complete, summary in "
                  << sr.combined_csv.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// link: range table without a field solve
// --------------------------------------------------------------------------

struct LinkOpts {
    std::string config;  // optional scenario supplying the radio parameters
    std::string out = "runs";
    bool quiet = false;
    std::optional<double> tx_power_dbm, tx_gain_dbi, rx_gain_dbi, freq_ghz,
        path_loss_exponent, fade_margin_db, rx_sensitivity_dbm, max_distance_m;
};

int run_link(const LinkOpts& o) {
    Scenario s = o.config.empty() ? parse_scenario_text("{}", "link") : parse_scenario(o.config);
    s.analysis.link = true;
    if (o.tx_power_dbm) s.link.tx_power_dbm = *o.tx_power_dbm;
    if (o.tx_gain_dbi) s.link.tx_gain_dbi = *o.tx_gain_dbi;
    if (o.rx_gain_dbi) s.link.rx_gain_dbi = *o.rx_gain_dbi;
    if (o.freq_ghz) s.link.freq_hz = *o.freq_ghz * 1e9;
    if (o.path_loss_exponent) s.link.path_loss_exponent = *o.path_loss_exponent;
    if (o.fade_margin_db) s.link.fade_margin_db = *o.fade_margin_db;
    if (o.rx_sensitivity_dbm) s.link.rx_sensitivity_dbm = *o.rx_sensitivity_dbm;
    if (o.max_distance_m) s.link_max_distance = *o.max_distance_m;
    refresh_hash(s);

    const fs::path file = fs::path(o.out) / s.name / "link.csv";
    write_file(file, link_csv(s));
    if (!o.quiet) {
        std::cout << "[emsim] max usable range " << fmt(link::max_range_m(s.link)) << " m\n";
        std::cout << "[emsim] wrote " << file.string() << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------------
// validate: parse-only report
// --------------------------------------------------------------------------

struct ValidateOpts {
    std::string config;
    bool quiet = false;
};

int run_validate(const ValidateOpts& o) {
    const Scenario s = parse_scenario(o.config);
    if (o.quiet) {
        std::cout << s.hash_hex() << "\n";
        return 0;
    }
    const ScenePlan plan = plan_scenario(s);
    std::cout << "scenario '" << s.name << "' parses cleanly\n";
    std::cout << "  hash         " << s.hash_hex() << "\n";
    std::cout << "  environment  " << environment_name(s.environment);
    if (s.environment != EnvironmentKind::FreeSpace)
        std::cout << ", gap " << fmt(s.gap * 1e3) << " mm, tissue tables at "
                  << fmt(s.tissue_band / 1e9) << " GHz";
    std::cout << "\n";
    std::cout << "  grid         " << plan.grid.nx << " x " << plan.grid.ny << " x "
              << plan.grid.nz << " cells (" << fmt(plan.grid.cells() / 1e6) << " M), cell "
              << fmt(s.grid.cell * 1e3) << " mm, est " << fmt(plan.est_bytes / 1e6)
              << " MB\n";
    std::cout << "  band         " << fmt(s.analysis.band_lo / 1e9) << " - "
              << fmt(s.analysis.band_hi / 1e9) << " GHz, " << s.analysis.points
              << " points, threshold " << fmt(s.analysis.threshold_db) << " dB\n";
    if (!s.analysis.pattern_freqs.empty()) {
        std::cout << "  patterns    ";
        for (double f : s.analysis.pattern_freqs) std::cout << " " << fmt(f / 1e9) << " GHz";
        std::cout << "\n";
    }
    std::cout << "  sar          "
              << (s.analysis.sar ? "at " + fmt(s.analysis.sar_freq / 1e9) + " GHz"
                                 : std::string("off"))
              << "\n";
    std::cout << "  link         "
              << (s.analysis.link
                      ? "on, max usable range " + fmt(link::max_range_m(s.link)) + " m"
                      : std::string("off"))
              << "\n";
    if (s.sweep.enabled)
        std::cout << "  sweep        " << s.sweep.parameter << " over " << s.sweep.values.size()
                  << " values, " << s.sweep.workers << " worker(s)\n";
    for (const auto& w : plan.warnings) std::cout << "  warning      " << w << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"electromagnetic workbench for wearable button antennas"};
    app.require_subcommand(1);

    DesignOpts design;
    CLI::App* design_cmd =
        app.add_subcommand("design", "closed-form circular patch sizing with inverse check");
    design_cmd->add_option("-f,--frequency-ghz", design.freqs_ghz, "target resonance(s), GHz")
        ->required()
        ->check(CLI::PositiveNumber);
    design_cmd->add_option("--eps-r", design.eps_r, "substrate relative permittivity")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    design_cmd->add_option("--height-mm", design.height_mm, "substrate height, mm")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    design_cmd->add_option("--csv", design.csv, "also write the table to this CSV file");

    CommonOpts run_o;
    CLI::App* run_cmd = app.add_subcommand("run", "run one scenario end to end");
    add_common(run_cmd, run_o);

    CommonOpts sweep_o;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the sweep defined by a scenario");
    add_common(sweep_cmd, sweep_o);

    LinkOpts link_o;
    CLI::App* link_cmd =
        app.add_subcommand("link", "link-budget range table (no field solve)");
    link_cmd->add_option("scenario", link_o.config, "optional scenario supplying radio parameters")
        ->check(CLI::ExistingFile);
    link_cmd->add_option("--out", link_o.out, "artifact directory root")->capture_default_str();
    link_cmd->add_option("--tx-power-dbm", link_o.tx_power_dbm, "transmit power, dBm");
    link_cmd->add_option("--tx-gain-dbi", link_o.tx_gain_dbi, "transmit antenna gain, dBi");
    link_cmd->add_option("--rx-gain-dbi", link_o.rx_gain_dbi, "receive antenna gain, dBi");
    link_cmd->add_option("--freq-ghz", link_o.freq_ghz, "carrier frequency, GHz")
        ->check(CLI::PositiveNumber);
    link_cmd->add_option("--path-loss-exponent", link_o.path_loss_exponent,
                         "log-distance path-loss exponent n");
    link_cmd->add_option("--fade-margin-db", link_o.fade_margin_db, "fade margin, dB");
    link_cmd->add_option("--rx-sensitivity-dbm", link_o.rx_sensitivity_dbm,
                         "receiver sensitivity, dBm");
    link_cmd->add_option("--max-distance-m", link_o.max_distance_m, "range table extent, m")
        ->check(CLI::PositiveNumber);
    link_cmd->add_flag("--quiet", link_o.quiet, "suppress progress output");

    ValidateOpts val_o;
    CLI::App* val_cmd =
        app.add_subcommand("validate", "parse a scenario and report what it resolves to");
    val_cmd->add_option("scenario", val_o.config, "scenario configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    val_cmd->add_flag("--quiet", val_o.quiet, "print only the scenario hash");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (design_cmd->parsed()) return run_design(design);
        if (run_cmd->parsed()) return run_run(run_o);
        if (sweep_cmd->parsed()) return run_sweep_cmd(sweep_o);
        if (link_cmd->parsed()) return run_link(link_o);
        if (val_cmd->parsed()) return run_validate(val_o);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PortResolutionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MemoryBudgetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DivergedError& e) {
        std::cerr << "error: solver diverged at step " << e.step << ": " << e.what() << "\n";
        return 3;
    } catch (const PostProcessError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
