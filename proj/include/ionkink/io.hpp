#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ionkink/analysis.hpp"

namespace ionkink {

/// Contents of a `key = value` configuration file.
struct RunConfig {
    int n_ions = 30;
    double ion_mass_amu = 172.0;
    double omega_z_hz = 25000.0;
    double alpha = 6.0;
    std::uint64_t seed = 0;
    Branch branch = Branch::Plus;

    TrapConfig trap() const;
    TrapConfig trap(double alpha_override) const;
};

/// Throws UsageError naming the offending line or key.
RunConfig parse_config(std::istream& in, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// `start:stop:step`, inclusive of stop within half a step. A bare number is a one-point grid.
std::vector<double> parse_range(const std::string& text);

/// Shortest round-tripping decimal representation.
std::string format_double(double value);

/// One `# key=value ...` line describing the trap.
std::string config_comment(const RunConfig& cfg);

void write_state_csv(std::ostream& out, const CrystalState& state, const RunConfig& cfg,
                     const std::vector<std::string>& extra_comments = {});
CrystalState read_state_csv(std::istream& in);
CrystalState read_state_csv(const std::string& path);

/// Kinetic energies in neV with ions in ascending equilibrium z; time in microseconds.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const CrystalState& equilibrium,
                          const TrapConfig& cfg, const RunConfig& run);

void write_spectrum_header(std::ostream& out);
void write_spectrum_rows(std::ostream& out, const SpectrumRow& row);

void write_resonance_csv(std::ostream& out, double alpha, const std::vector<ResonanceHit>& hits);

std::string sweep_header_line();
std::string format_sweep_record(const SweepRecord& record);

/// Sweep output that survives interruption: rows already present are kept and skipped.
class SweepCsvWriter {
public:
    /// `header` is every line before the first row (metadata and column names), each ending in '\n'.
    /// An existing file must start with the same header and hold rows for a prefix of `cells`.
    SweepCsvWriter(const std::string& path, const std::string& header,
                   const std::vector<std::pair<double, double>>& cells);

    std::size_t completed() const { return completed_; }
    void append(const SweepRecord& record);

private:
    std::string path_;
    std::size_t completed_ = 0;
};

void write_timescale_csv(std::ostream& out, const std::vector<TimescaleRow>& rows);

}  // namespace ionkink
