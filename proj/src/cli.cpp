#include "ionkink/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "ionkink/io.hpp"

namespace ionkink {

namespace {

struct Globals {
    std::string config_path;
    std::string out_path;
    int threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> branch;
};

struct Excitation {
    std::string ion = "leftmost";
    std::string axis = "x";
    double amp_um = 1.0;
};

RunConfig resolve(const Globals& g) {
    RunConfig run = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    if (g.seed) run.seed = *g.seed;
    if (g.branch) {
        try {
            run.branch = branch_from_string(*g.branch);
        } catch (const InvalidArgumentError& e) {
            throw UsageError(e.what());
        }
    }
    return run;
}

ScanSettings scan_settings(const RunConfig& run) {
    ScanSettings s;
    s.relaxation.seed = run.seed;
    s.preparation.branch = run.branch;
    return s;
}

// Output stream that is either stdout or the --out file.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
            if (!*file_) throw UsageError("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

int ion_rank(const std::string& text, int n_ions) {
    if (text == "leftmost") return 0;
    if (text == "rightmost") return n_ions - 1;
    int rank = 0;
    try {
        std::size_t used = 0;
        rank = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw UsageError("--ion expects leftmost, rightmost or an index, got '" + text + "'");
    }
    if (rank < 0 || rank >= n_ions)
        throw UsageError("--ion " + text + " is outside 0.." + std::to_string(n_ions - 1));
    return rank;
}

ExcitationSpec excitation_spec(const Excitation& e, int n_ions) {
    ExcitationSpec spec;
    spec.ion_index = ion_rank(e.ion, n_ions);
    try {
        spec.axis = axis_from_string(e.axis);
    } catch (const InvalidArgumentError& err) {
        throw UsageError(err.what());
    }
    spec.amplitude = e.amp_um * 1e-6;
    return spec;
}

CrystalState kink_equilibrium(const RunConfig& run, const TrapConfig& cfg, const std::string& input) {
    const ScanSettings s = scan_settings(run);
    if (!input.empty()) {
        CrystalState start = read_state_csv(input);
        if (start.n_ions() != cfg.n_ions())
            throw UsageError("state file holds " + std::to_string(start.n_ions()) + " ions, config expects " +
                             std::to_string(cfg.n_ions()));
        return relax(start, cfg, s.relaxation);
    }
    return prepare_kink(cfg, s.relaxation, s.preparation);
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void add_excitation_options(CLI::App* cmd, Excitation& e) {
    cmd->add_option("--ion", e.ion, "Excited ion: leftmost, rightmost or 0-based index in ascending z")
        ->capture_default_str();
    cmd->add_option("--axis", e.axis, "Displacement axis (x or z)")->capture_default_str();
    cmd->add_option("--amp-um", e.amp_um, "Displacement amplitude in micrometres")->capture_default_str();
}

int run_equilibrium(const Globals& g, std::optional<double> alpha, const std::string& prepare,
                    const std::string& input) {
    RunConfig run = resolve(g);
    if (alpha) run.alpha = *alpha;
    const TrapConfig cfg = run.trap();
    const ScanSettings s = scan_settings(run);
    CrystalState state;
    if (prepare == "kink")
        state = kink_equilibrium(run, cfg, input);
    else if (!input.empty())
        throw UsageError("--input is only used with --prepare kink");
    else if (prepare == "zigzag")
        state = prepare_zigzag(cfg, s.relaxation);
    else if (prepare == "chain")
        state = relax(linear_chain_guess(cfg), cfg, s.relaxation);
    else
        throw UsageError("--prepare expects kink, zigzag or chain, got '" + prepare + "'");
    const PhaseReport report = classify_phase(state, cfg, s.classification);
    state.phase = report.phase;
    std::vector<std::string> extra = {
        "energy=" + format_double(potential_energy(state, cfg)),
        "max_abs_gradient=" + fmt("%.3e", max_abs_gradient(state, cfg.alpha())),
        "asymmetry=" + fmt("%.6e", report.asymmetry),
        "kink_position=" + fmt("%.6f", report.kink_position),
        std::string("central_ion=") + (report.central_ion_present ? "yes" : "no"),
    };
    Output out(g.out_path);
    write_state_csv(out.stream(), state, run, extra);
    return 0;
}

int run_critical(const Globals& g, const std::string& name, double tol, std::optional<double> lo,
                 std::optional<double> hi) {
    const RunConfig run = resolve(g);
    Transition t;
    try {
        t = transition_from_string(name);
    } catch (const InvalidArgumentError& e) {
        throw UsageError(e.what());
    }
    TransitionSearch bracket = default_bracket(t);
    if (lo) bracket.alpha_lo = *lo;
    if (hi) bracket.alpha_hi = *hi;
    if (!(bracket.alpha_lo < bracket.alpha_hi)) throw UsageError("--lo must be below --hi");
    if (!(tol > 0.0)) throw UsageError("--tol must be positive");
    const ScanSettings s = scan_settings(run);
    const CriticalResult r = find_transition(t, run.trap(), tol, s.relaxation, s.classification, bracket);
    Output out(g.out_path);
    out.stream() << "transition,alpha_critical,bracket_lo,bracket_hi,probes\n"
                 << to_string(t) << "," << fmt("%.6f", r.alpha) << "," << fmt("%.6f", r.alpha_lo) << ","
                 << fmt("%.6f", r.alpha_hi) << "," << r.probes << "\n";
    return 0;
}

int run_modes(const Globals& g, const std::string& alpha_text) {
    RunConfig run = resolve(g);
    const auto grid = alpha_text.empty() ? std::vector<double>{run.alpha} : parse_range(alpha_text);
    const auto rows = mode_spectrum_vs_alpha(run.trap(), grid, scan_settings(run));
    Output out(g.out_path);
    out.stream() << "# ionkink modes\n" << config_comment(run) << "\n";
    write_spectrum_header(out.stream());
    for (const auto& row : rows) {
        if (row.kink_lost) {
            out.stream() << "# alpha=" << format_double(row.alpha) << " kink lost\n";
            break;
        }
        write_spectrum_rows(out.stream(), row);
    }
    return 0;
}

struct EvolveOptions {
    std::optional<double> alpha;
    std::string input;
    Excitation excitation;
    std::string evolver = "harmonic";
    double t_us = 400.0;
    double sample_us = 1.0;
    double dt_periods = 0.01;
};

int run_evolve(const Globals& g, const EvolveOptions& o) {
    RunConfig run = resolve(g);
    if (o.alpha) run.alpha = *o.alpha;
    if (!(o.t_us > 0.0) || !(o.sample_us > 0.0)) throw UsageError("--t-us and --sample-us must be positive");
    Evolver evolver;
    if (o.evolver == "harmonic")
        evolver = Evolver::Harmonic;
    else if (o.evolver == "md")
        evolver = Evolver::MD;
    else
        throw UsageError("--evolver expects harmonic or md, got '" + o.evolver + "'");
    const TrapConfig cfg = run.trap();
    const CrystalState eq = kink_equilibrium(run, cfg, o.input);
    const ModeSpectrum spectrum = normal_modes(eq, cfg);
    const ExcitationSpec exc = excitation_spec(o.excitation, cfg.n_ions());
    const CrystalState displaced = displace(eq, exc, cfg);
    const double to_dimless = 1e-6 * cfg.omega_z();
    Trajectory traj;
    if (evolver == Evolver::Harmonic) {
        std::vector<double> times;
        const long n = static_cast<long>(std::floor(o.t_us / o.sample_us + 1e-9));
        for (long k = 0; k <= n; ++k) times.push_back(static_cast<double>(k) * o.sample_us * to_dimless);
        traj = evolve_harmonic(eq, displaced, spectrum, times);
    } else {
        MdSettings md;
        md.omega_max = spectrum.frequencies.maxCoeff();
        const double sample = o.sample_us * to_dimless;
        md.dt = md_time_step(md.omega_max, o.dt_periods);
        md.sample_stride = std::max(1, static_cast<int>(std::ceil(sample / md.dt - 1e-9)));
        md.dt = sample / md.sample_stride;
        md.t_final = o.t_us * to_dimless;
        traj = evolve_md(displaced, cfg, md);
    }
    traj.excitation = exc;
    Output out(g.out_path);
    write_trajectory_csv(out.stream(), traj, eq, cfg, run);
    return 0;
}

struct SweepOptions {
    std::string alpha;
    std::optional<double> amp_um;
    std::string amp_um_range;
    std::string evolver = "harmonic";
    Excitation excitation;
    double tau_ms = 100.0;
    std::vector<double> taus_ms;
    double dt_periods = 0.01;
    int samples_per_period = 20;
};

std::string sweep_header(const RunConfig& run, const SweepSpec& spec, const SweepOptions& o) {
    std::ostringstream h;
    h << "# ionkink sweep\n" << config_comment(run) << "\n";
    h << "# evolver=" << to_string(spec.evolver) << " ion=" << o.excitation.ion << " axis=" << o.excitation.axis
      << " tau_ms=" << format_double(o.tau_ms) << " md_dt_periods=" << format_double(o.dt_periods)
      << " samples_per_period=" << o.samples_per_period << "\n";
    h << sweep_header_line();
    return h.str();
}

int run_sweep_command(const Globals& g, SweepOptions o) {
    const RunConfig run = resolve(g);
    if (o.alpha.empty()) throw UsageError("--alpha is required");
    if (o.amp_um && !o.amp_um_range.empty()) throw UsageError("use either --amp-um or --amp-um-range");
    SweepSpec spec;
    spec.alpha_grid = parse_range(o.alpha);
    try {
        spec.evolver = evolver_choice_from_string(o.evolver);
    } catch (const InvalidArgumentError& e) {
        throw UsageError(e.what());
    }
    if (o.amp_um) o.excitation.amp_um = *o.amp_um;
    spec.excitation = excitation_spec(o.excitation, run.n_ions);
    if (!o.amp_um_range.empty())
        for (double a : parse_range(o.amp_um_range)) spec.amplitude_grid.push_back(a * 1e-6);
    spec.tau = o.tau_ms * 1e-3;
    spec.transport.md_dt_fraction = o.dt_periods;
    spec.transport.samples_per_period = o.samples_per_period;
    spec.scan = scan_settings(run);
    spec.threads = g.threads;
    validate(spec);
    const TrapConfig cfg = run.trap();

    if (!o.taus_ms.empty()) {
        std::vector<double> taus;
        for (double t : o.taus_ms) taus.push_back(t * 1e-3);
        spec.tau = taus.back();
        const auto rows = compare_timescales(spec, cfg, taus);
        Output out(g.out_path);
        out.stream() << "# ionkink timescales\n" << config_comment(run) << "\n";
        write_timescale_csv(out.stream(), rows);
        return 0;
    }

    const std::string header = sweep_header(run, spec, o);
    if (g.out_path.empty()) {
        std::cout << header;
        run_sweep(spec, cfg, [](const SweepRecord& r) { std::cout << format_sweep_record(r) << std::flush; });
        return 0;
    }
    SweepCsvWriter writer(g.out_path, header, sweep_cells(spec));
    run_sweep(spec, cfg, [&](const SweepRecord& r) { writer.append(r); }, writer.completed());
    return 0;
}

struct ResonanceOptions {
    std::optional<double> alpha;
    std::optional<int> mode;
    Excitation excitation;
    double detuning = 5e-3;
    double weight = 0.5;
};

int run_resonances(const Globals& g, const ResonanceOptions& o) {
    RunConfig run = resolve(g);
    if (o.alpha) run.alpha = *o.alpha;
    const TrapConfig cfg = run.trap();
    const CrystalState eq = kink_equilibrium(run, cfg, "");
    const ModeSpectrum spectrum = normal_modes(eq, cfg);
    int mode = 0;
    if (o.mode) {
        if (*o.mode < 0 || *o.mode >= spectrum.size())
            throw UsageError("--mode must lie in 0.." + std::to_string(spectrum.size() - 1));
        mode = *o.mode;
    } else {
        const CrystalState displaced = displace(eq, excitation_spec(o.excitation, cfg.n_ions()), cfg);
        mode = dominant_mode(spectrum, eq, displaced);
    }
    const auto hits = find_third_order_resonances(spectrum, eq, mode, o.detuning, o.weight);
    Output out(g.out_path);
    write_resonance_csv(out.stream(), run.alpha, hits);
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Equilibria, normal modes and energy transport of a planar ion crystal with a kink"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "key = value configuration file");
    app.add_option("--out", g.out_path, "Output CSV path (stdout when omitted)");
    app.add_option("--threads", g.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Seed for the relaxation noise");
    app.add_option("--branch", g.branch, "Pinned branch: plus or minus");

    auto* eq = app.add_subcommand("equilibrium", "Relax a configuration and classify its phase");
    std::optional<double> eq_alpha;
    std::string prepare = "kink", eq_input;
    eq->add_option("--alpha", eq_alpha, "Aspect ratio (defaults to the config value)");
    eq->add_option("--prepare", prepare, "kink, zigzag or chain")->capture_default_str();
    eq->add_option("--input", eq_input, "State CSV used as the starting point");

    auto* crit = app.add_subcommand("critical", "Locate a structural transition by bisection");
    std::string transition;
    double tol = 1e-3;
    std::optional<double> lo, hi;
    crit->add_option("--transition", transition, "zigzag, sliding-pinned, pinned-odd or kink")->required();
    crit->add_option("--tol", tol, "Bracket width at which bisection stops")->capture_default_str();
    crit->add_option("--lo", lo, "Lower end of the bracket");
    crit->add_option("--hi", hi, "Upper end of the bracket");

    auto* modes = app.add_subcommand("modes", "Normal-mode spectrum at one alpha or along a range");
    std::string modes_alpha;
    modes->add_option("--alpha", modes_alpha, "alpha or start:stop:step");

    auto* evolve = app.add_subcommand("evolve", "Single trajectory of per-ion kinetic energies");
    EvolveOptions eo;
    evolve->add_option("--alpha", eo.alpha, "Aspect ratio (defaults to the config value)");
    evolve->add_option("--input", eo.input, "Equilibrium state CSV");
    add_excitation_options(evolve, eo.excitation);
    evolve->add_option("--evolver", eo.evolver, "harmonic or md")->capture_default_str();
    evolve->add_option("--t-us", eo.t_us, "Duration in microseconds")->capture_default_str();
    evolve->add_option("--sample-us", eo.sample_us, "Sampling interval in microseconds")->capture_default_str();
    evolve->add_option("--dt-periods", eo.dt_periods, "MD step as a fraction of the shortest period")
        ->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "Delta E over an alpha grid, optionally times an amplitude grid");
    SweepOptions so;
    sweep->add_option("--alpha", so.alpha, "alpha or start:stop:step")->required();
    sweep->add_option("--amp-um", so.amp_um, "Displacement amplitude in micrometres (default 1)");
    sweep->add_option("--amp-um-range", so.amp_um_range, "Amplitude grid start:stop:step in micrometres");
    sweep->add_option("--ion", so.excitation.ion, "leftmost, rightmost or 0-based index in ascending z")
        ->capture_default_str();
    sweep->add_option("--axis", so.excitation.axis, "x or z")->capture_default_str();
    sweep->add_option("--evolver", so.evolver, "harmonic, md or both")->capture_default_str();
    sweep->add_option("--tau-ms", so.tau_ms, "Averaging time in milliseconds")->capture_default_str();
    sweep->add_option("--taus-ms", so.taus_ms, "Several ascending averaging times; writes a timescale table")
        ->delimiter(',');
    sweep->add_option("--dt-periods", so.dt_periods, "MD step as a fraction of the shortest period")
        ->capture_default_str();
    sweep->add_option("--samples-per-period", so.samples_per_period, "Harmonic samples per shortest period")
        ->capture_default_str();

    auto* res = app.add_subcommand("resonances", "Third-order resonances of an excited mode");
    ResonanceOptions ro;
    res->add_option("--alpha", ro.alpha, "Aspect ratio (defaults to the config value)");
    res->add_option("--mode", ro.mode, "Excited mode index (default: dominant mode of the excitation)");
    add_excitation_options(res, ro.excitation);
    res->add_option("--detuning", ro.detuning, "Largest |omega_a + omega_b - omega_exc| in units of omega_z")
        ->capture_default_str();
    res->add_option("--weight", ro.weight, "Smallest transport weight reported")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*eq) return run_equilibrium(g, eq_alpha, prepare, eq_input);
        if (*crit) return run_critical(g, transition, tol, lo, hi);
        if (*modes) return run_modes(g, modes_alpha);
        if (*evolve) return run_evolve(g, eo);
        if (*sweep) return run_sweep_command(g, so);
        if (*res) return run_resonances(g, ro);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const RangeError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace ionkink
