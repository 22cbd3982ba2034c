#include "ionkink/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ionkink {

TrapConfig RunConfig::trap() const { return trap(alpha); }

TrapConfig RunConfig::trap(double alpha_override) const {
    return TrapConfig::from_lab_units(n_ions, ion_mass_amu, omega_z_hz, alpha_override);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw UsageError("cannot read '" + text + "' as a number for " + what);
    return v;
}

std::uint64_t to_u64(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw UsageError("cannot read '" + text + "' as an unsigned integer for " + what);
    return v;
}

std::string short_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fraction(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(origin + ":" + std::to_string(number) + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "n_ions") {
            const auto v = to_u64(value, key);
            if (v < 2 || v > 100000) throw UsageError("n_ions must be at least 2");
            cfg.n_ions = static_cast<int>(v);
        } else if (key == "ion_mass_amu") {
            cfg.ion_mass_amu = to_double(value, key);
            if (!(cfg.ion_mass_amu > 0.0)) throw UsageError("ion_mass_amu must be positive");
        } else if (key == "omega_z_hz") {
            cfg.omega_z_hz = to_double(value, key);
            if (!(cfg.omega_z_hz > 0.0)) throw UsageError("omega_z_hz must be positive");
        } else if (key == "alpha") {
            cfg.alpha = to_double(value, key);
            if (!(cfg.alpha > 0.0)) throw UsageError("alpha must be positive");
        } else if (key == "seed") {
            cfg.seed = to_u64(value, key);
        } else if (key == "branch") {
            try {
                cfg.branch = branch_from_string(value);
            } catch (const InvalidArgumentError& e) {
                throw UsageError(e.what());
            }
        } else {
            throw UsageError(origin + ":" + std::to_string(number) + ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

std::vector<double> parse_range(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() == 1) return {to_double(trim(parts[0]), "range")};
    if (parts.size() != 3) throw UsageError("range '" + text + "' must be start:stop:step");
    const double start = to_double(trim(parts[0]), "range start");
    const double stop = to_double(trim(parts[1]), "range stop");
    const double step = to_double(trim(parts[2]), "range step");
    if (step == 0.0 || (stop - start) * step < 0.0)
        throw UsageError("range '" + text + "' has a step that never reaches the stop value");
    const long count = static_cast<long>(std::floor((stop - start) / step + 0.5));
    std::vector<double> out;
    for (long k = 0; k <= count; ++k) {
        // Rounded to 12 significant digits so that 5.5 + 3 * 0.02 prints as 5.56.
        const double v = start + static_cast<double>(k) * step;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out.push_back(std::strtod(buf, nullptr));
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string config_comment(const RunConfig& cfg) {
    std::ostringstream s;
    s << "# n_ions=" << cfg.n_ions << " ion_mass_amu=" << short_number(cfg.ion_mass_amu)
      << " omega_z_hz=" << short_number(cfg.omega_z_hz) << " seed=" << cfg.seed
      << " branch=" << to_string(cfg.branch);
    return s.str();
}

void write_state_csv(std::ostream& out, const CrystalState& state, const RunConfig& cfg,
                     const std::vector<std::string>& extra_comments) {
    out << "# ionkink state, dimensionless units (length l0)\n";
    out << config_comment(cfg) << " alpha=" << short_number(cfg.alpha) << "\n";
    out << "# phase=" << to_string(state.phase) << "\n";
    for (const auto& c : extra_comments) out << "# " << c << "\n";
    const bool vel = state.velocities.has_value();
    out << (vel ? "index,x,z,vx,vz\n" : "index,x,z\n");
    for (int i = 0; i < state.n_ions(); ++i) {
        out << i << "," << format_double(state.x(i)) << "," << format_double(state.z(i));
        if (vel)
            out << "," << format_double((*state.velocities)[2 * i]) << ","
                << format_double((*state.velocities)[2 * i + 1]);
        out << "\n";
    }
}

CrystalState read_state_csv(std::istream& in) {
    std::string line;
    std::vector<double> x, z, vx, vz;
    bool header_seen = false, with_vel = false;
    Phase phase = Phase::Unclassified;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto p = line.find("phase=");
            if (p != std::string::npos) {
                try {
                    phase = phase_from_string(trim(line.substr(p + 6)));
                } catch (const InvalidArgumentError& e) {
                    throw UsageError(e.what());
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line == "index,x,z,vx,vz")
                with_vel = true;
            else if (line != "index,x,z")
                throw UsageError("state CSV header must be 'index,x,z' or 'index,x,z,vx,vz'");
            header_seen = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != (with_vel ? 5u : 3u)) throw UsageError("malformed state row '" + line + "'");
        if (static_cast<std::size_t>(to_u64(f[0], "index")) != x.size())
            throw UsageError("state rows must be numbered 0, 1, 2, ...");
        x.push_back(to_double(f[1], "x"));
        z.push_back(to_double(f[2], "z"));
        if (with_vel) {
            vx.push_back(to_double(f[3], "vx"));
            vz.push_back(to_double(f[4], "vz"));
        }
    }
    if (x.empty()) throw UsageError("state CSV contains no ions");
    CrystalState s = CrystalState::from_xz(x, z);
    if (with_vel) s.velocities = CrystalState::from_xz(vx, vz).positions;
    s.phase = phase;
    return s;
}

CrystalState read_state_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open state file '" + path + "'");
    return read_state_csv(in);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const CrystalState& equilibrium,
                          const TrapConfig& cfg, const RunConfig& run) {
    const auto order = ions_by_z(equilibrium);
    const double to_us = cfg.time_scale() * 1e6;
    const double to_nev = cfg.energy_scale() / (constants::elementary_charge * 1e-9);
    out << "# ionkink trajectory\n";
    out << config_comment(run) << " alpha=" << short_number(cfg.alpha()) << "\n";
    out << "# excitation ion=" << traj.excitation.ion_index << " axis=" << to_string(traj.excitation.axis)
        << " amplitude_um=" << short_number(traj.excitation.amplitude * 1e6)
        << " (ion index 0-based in ascending equilibrium z; column E_k is the k-th ion from the left)\n";
    out << "# evolver=" << to_string(traj.evolver);
    if (traj.evolver == Evolver::MD)
        out << " dt=" << short_number(traj.dt) << " energy_drift=" << short_number(traj.total_energy_drift);
    out << "\n";
    out << "t_us";
    for (std::size_t k = 1; k <= order.size(); ++k) out << ",E_" << k << "_neV";
    out << "\n";
    char buf[32];
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%.6f", traj.times[s] * to_us);
        out << buf;
        for (int label : order) {
            std::snprintf(buf, sizeof buf, "%.6e", traj.kinetic(label, static_cast<Eigen::Index>(s)) * to_nev);
            out << "," << buf;
        }
        out << "\n";
    }
}

void write_spectrum_header(std::ostream& out) {
    out << "alpha,mode_index,frequency_over_omega_z,localization_score,is_kink_mode\n";
}

void write_spectrum_rows(std::ostream& out, const SpectrumRow& row) {
    char buf[128];
    for (int k = 0; k < row.spectrum.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.10f,%.6f,%d\n", short_number(row.alpha).c_str(), k,
                      row.spectrum.frequencies[k], row.scores.size() ? row.scores[k] : 0.0,
                      k == row.kink_mode ? 1 : 0);
        out << buf;
    }
}

void write_resonance_csv(std::ostream& out, double alpha, const std::vector<ResonanceHit>& hits) {
    out << "alpha,excited_mode,mode_a,mode_b,detuning,transport_weight\n";
    char buf[160];
    for (const auto& h : hits) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.6e,%.6f\n", short_number(alpha).c_str(), h.excited_mode,
                      h.mode_a, h.mode_b, h.detuning, h.transport_weight);
        out << buf;
    }
}

std::string sweep_header_line() {
    return "alpha,amplitude_um,phase,delta_E_harmonic,delta_E_md,resonance_hits,status\n";
}

std::string format_sweep_record(const SweepRecord& r) {
    std::ostringstream s;
    s << short_number(r.alpha) << "," << short_number(r.amplitude * 1e6) << "," << to_string(r.phase.phase) << ","
      << fraction(r.delta_E_harmonic) << "," << fraction(r.delta_E_md) << "," << r.resonance_hits << ","
      << r.status << "\n";
    return s.str();
}

SweepCsvWriter::SweepCsvWriter(const std::string& path, const std::string& header,
                               const std::vector<std::pair<double, double>>& cells)
    : path_(path) {
    std::string kept = header;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        const std::string existing = buffer.str();
        if (existing.compare(0, header.size(), header) != 0)
            throw UsageError("existing output '" + path + "' was written with different settings");
        std::size_t pos = header.size();
        while (pos < existing.size()) {
            const auto end = existing.find('\n', pos);
            if (end == std::string::npos) break;  // unfinished last line is dropped
            const std::string line = existing.substr(pos, end - pos);
            const auto f = split(line, ',');
            if (completed_ >= cells.size() || f.size() != 7 || f[0] != short_number(cells[completed_].first) ||
                f[1] != short_number(cells[completed_].second * 1e6))
                throw UsageError("existing output '" + path + "' does not match the requested grid");
            kept += line + "\n";
            ++completed_;
            pos = end + 1;
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << kept;
}

void SweepCsvWriter::append(const SweepRecord& record) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw UsageError("cannot append to '" + path_ + "'");
    out << format_sweep_record(record);
    ++completed_;
}

void write_timescale_csv(std::ostream& out, const std::vector<TimescaleRow>& rows) {
    out << "alpha,amplitude_um,tau_ms,delta_E_harmonic,delta_E_md,status\n";
    for (const auto& r : rows)
        out << short_number(r.alpha) << "," << short_number(r.amplitude * 1e6) << "," << short_number(r.tau * 1e3)
            << "," << fraction(r.delta_E_harmonic) << "," << fraction(r.delta_E_md) << "," << r.status << "\n";
}

}  // namespace ionkink
