#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ionkink/dynamics.hpp"

namespace ionkink {

enum class EvolverChoice { Harmonic, MD, Both };

std::string_view to_string(EvolverChoice choice);
EvolverChoice evolver_choice_from_string(std::string_view text);

struct SweepSpec {
    std::vector<double> alpha_grid;
    std::vector<double> amplitude_grid;  ///< metres; empty means excitation.amplitude only
    ExcitationSpec excitation;
    double tau = 0.1;                    ///< seconds
    EvolverChoice evolver = EvolverChoice::Harmonic;
    TransportSettings transport;
    double resonance_detuning = 5e-3;    ///< units of omega_z
    double resonance_weight = 0.5;
    ScanSettings scan;
    int threads = 1;
};

struct SweepRecord {
    double alpha = 0.0;
    double amplitude = 0.0;              ///< metres
    std::optional<double> delta_E_harmonic;
    std::optional<double> delta_E_md;
    PhaseReport phase;
    int resonance_hits = 0;
    std::string status = "ok";           ///< ok, kink_lost, or error:<tag>
};

/// Throws InvalidArgumentError or RangeError for an unusable spec.
void validate(const SweepSpec& spec);

/// Cells in output order: alpha-major, amplitude-minor.
std::vector<std::pair<double, double>> sweep_cells(const SweepSpec& spec);

/// Called once per cell, in cell order, as soon as the cell and all before it are finished.
using RecordSink = std::function<void(const SweepRecord&)>;

/// Runs the cells after the first `skip` ones. Rows are emitted to `sink` in order and returned.
std::vector<SweepRecord> run_sweep(const SweepSpec& spec, const TrapConfig& cfg_template,
                                   const RecordSink& sink = {}, std::size_t skip = 0);

std::vector<SweepRecord> sweep_alpha(const SweepSpec& spec, const TrapConfig& cfg_template);

/// Dense (alpha, amplitude) map with MD evolution. Rows alpha-major.
std::vector<SweepRecord> sweep_amplitude_alpha(const SweepSpec& spec, const TrapConfig& cfg_template);

struct TimescaleRow {
    double alpha = 0.0;
    double amplitude = 0.0;
    double tau = 0.0;  ///< seconds
    std::optional<double> delta_E_harmonic;
    std::optional<double> delta_E_md;
    std::string status = "ok";
};

/// Delta E at every tau of the ascending `tau_list` (seconds), one evolution per cell.
std::vector<TimescaleRow> compare_timescales(const SweepSpec& spec, const TrapConfig& cfg_template,
                                             const std::vector<double>& tau_list);

/// Mode carrying the largest share of the excitation energy.
int dominant_mode(const ModeSpectrum& spectrum, const CrystalState& equilibrium, const CrystalState& displaced);

}  // namespace ionkink
