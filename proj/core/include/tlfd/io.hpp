#pragma once

#include <string>
#include <vector>

#include "tlfd/design.hpp"
#include "tlfd/engine.hpp"
#include "tlfd/sim.hpp"
#include "tlfd/types.hpp"

namespace tlfd {

/// Everything a full run needs; parsed from the key=value config format
/// (see README for the field list).
struct RunConfig {
    LineParameters line;
    SourceModel source_left;
    SourceModel source_right;
    double dt = 1e-4;
    int n_sections = 16;
    std::vector<double> lambda; // 1 (broadcast) or 8 discrete eigenvalues
    double threshold_pu = 0.02;
    double noise_pu = 0.02;
    double magnitude_gain = 1.5;
    std::uint64_t seed = 7;
    double t_end = 6.4;
    std::vector<FaultScenario> events;
};

/// Parse and validate. Throws IoError naming the missing/invalid field and
/// the violated constraint.
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

/// Waveform CSV: header row "t,ia1,...,vn2", one row per sample, SI units.
/// A JSON sidecar <path>.meta.json carries dt and the per-unit bases.
void write_waveforms(const Waveforms& w, const std::string& csv_path);
Waveforms read_waveforms(const std::string& csv_path);

/// Detection-filter design as a documented key=value text file
/// (matrices row-major).
void save_design(const FilterDesign& d, const std::string& path);
FilterDesign load_design(const std::string& path);

/// Line-delimited JSON diagnosis records.
void write_diagnoses(const std::vector<Diagnosis>& diags, const std::string& path);
std::vector<Diagnosis> read_diagnoses(const std::string& path);

/// Schema audit for emitted diagnosis files; returns problems (empty = ok).
std::vector<std::string> validate_diagnosis_file(const std::string& path);

/// Per-sample residual CSV: t, scaled channels r1..r8, raw pu channels.
void write_residuals(const std::vector<ResidualFrame>& frames, const std::string& path);
std::vector<ResidualFrame> read_residuals(const std::string& path);

} // namespace tlfd
