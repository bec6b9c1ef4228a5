#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emsim/excitation.hpp"
#include "emsim/grid.hpp"
#include "emsim/link_budget.hpp"
#include "emsim/post.hpp"
#include "emsim/stackup.hpp"

namespace emsim {

// Scenario files are JSON with // and /* */ comments allowed.  Lengths are
// given in mm and frequencies in GHz; everything is converted to SI here.
// Unknown keys anywhere in the file are rejected.

enum class EnvironmentKind { FreeSpace, Chest, Arm };

struct TissueOverride {
    double eps_r = 0.0;
    double sigma = 0.0;
    double rho = 0.0;
};

struct ScenarioGrid {
    double cell = 1.0e-3;
    double padding = 10.0e-3;
    int pml_cells = 10;
    double budget_bytes = 4.0e9;
};

struct ScenarioSolver {
    std::size_t max_steps = 40000;
    double early_stop_db = -60.0;
    double courant = 0.99;
    int threads = 1;
};

struct ScenarioAnalysis {
    double band_lo = 1.0e9;
    double band_hi = 7.0e9;
    std::size_t points = 601;
    double threshold_db = -10.0;
    std::vector<double> pattern_freqs;  // Hz; surface phasors recorded per entry
    bool sar = false;
    double sar_freq = 2.45e9;
    bool link = false;
};

struct ScenarioSweep {
    bool enabled = false;
    std::string parameter;  // dotted config path, e.g. "button.feed_offset_mm"
    std::vector<double> values;  // in the parameter's config units
    int workers = 1;
};

struct Scenario {
    std::string name = "scenario";
    EnvironmentKind environment = EnvironmentKind::FreeSpace;
    double gap = 3.0e-3;           // body separation (chest / arm only)
    double tissue_band = 2.4e9;    // tissue table selector
    std::map<std::string, TissueOverride> tissue;  // by tissue name
    StackupParams button;
    ExcitationSpec drive;
    ScenarioGrid grid;
    ScenarioSolver solver;
    ScenarioAnalysis analysis;
    link::LinkParams link = link::body_area_preset();
    double link_max_distance = 100.0;  // range-table extent, m
    ScenarioSweep sweep;

    // Canonical resolved form: every parameter after defaulting, serialized
    // deterministically.  The FNV-1a hash of it names all artifacts.
    std::string canonical;
    std::uint64_t hash = 0;
    std::string hash_hex() const;
};

// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

Scenario parse_scenario(const std::filesystem::path& path);
// Same parser on an in-memory document; name_hint replaces the file stem as
// the default scenario name.
Scenario parse_scenario_text(const std::string& text, const std::string& name_hint);

// Recomputes the canonical form and hash after direct field edits (command
// line overrides, programmatic tweaks).
void refresh_hash(Scenario& s);

// Numeric fields a sweep may drive, as dotted config paths (config units).
std::vector<std::string> sweepable_parameters();
// Applies one sweep value; throws ParseError for unknown paths.  The
// canonical form and hash are recomputed.
void apply_sweep_value(Scenario& s, const std::string& parameter, double value);

// Range table (distance_m, pr_dbm, margin_db) for the scenario's radio
// parameters, in the shared artifact CSV format.
std::string link_csv(const Scenario& s);

// Scene and grid a scenario resolves to, computed without voxelizing or
// solving; lets callers preview cost and geometry.
struct ScenePlan {
    Scene scene;
    GridSpec grid;
    std::vector<std::string> warnings;        // grid quality notes
    std::map<std::string, Material> tissues;  // tissue materials after overrides
    double est_bytes = 0.0;                   // solver footprint estimate
};
ScenePlan plan_scenario(const Scenario& s);

struct RunOptions {
    bool quiet = false;
};

struct RunResult {
    std::filesystem::path dir;
    std::vector<std::string> files;  // artifact names in write order
    std::vector<double> freqs;
    std::vector<double> s11_db;
    std::vector<Resonance> resonances;
    std::optional<SarReport> sar;
    std::size_t steps_run = 0;
    std::map<std::string, double> timings_s;
    std::vector<std::string> warnings;
};

// Executes the full pipeline and writes s11.csv, resonances.csv, pattern and
// sar/link CSVs as requested plus run_manifest.json into out_dir.  Artifacts
// written before a failure are removed again.
RunResult run_scenario(const Scenario& s, const std::filesystem::path& out_dir,
                       const RunOptions& opt = {});

struct SweepResult {
    std::filesystem::path dir;
    std::filesystem::path combined_csv;
    std::vector<RunResult> runs;  // ordered by sweep value
};

// One run_scenario per sweep value in its own subdirectory, plus a combined
// sweep.csv keyed by value.
SweepResult run_sweep(const Scenario& s, const std::filesystem::path& out_dir,
                      const RunOptions& opt = {});

} // namespace emsim
