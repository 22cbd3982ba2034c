#include "ionkink/analysis.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

namespace ionkink {

std::string_view to_string(EvolverChoice choice) {
    switch (choice) {
        case EvolverChoice::Harmonic: return "harmonic";
        case EvolverChoice::MD: return "md";
        case EvolverChoice::Both: return "both";
    }
    return "harmonic";
}

EvolverChoice evolver_choice_from_string(std::string_view text) {
    if (text == "harmonic") return EvolverChoice::Harmonic;
    if (text == "md") return EvolverChoice::MD;
    if (text == "both") return EvolverChoice::Both;
    throw InvalidArgumentError("unknown evolver '" + std::string(text) + "' (expected harmonic, md or both)");
}

namespace {

std::string error_tag(const std::exception& e) {
    if (dynamic_cast<const KinkLostError*>(&e)) return "kink_lost";
    if (dynamic_cast<const DegenerateConfigurationError*>(&e)) return "error:degenerate";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "error:convergence";
    if (dynamic_cast<const StaleStateError*>(&e)) return "error:stale_state";
    if (dynamic_cast<const SaddleError*>(&e)) return "error:saddle";
    if (dynamic_cast<const NoDefectError*>(&e)) return "error:no_defect";
    if (dynamic_cast<const LocalInstabilityError*>(&e)) return "error:local_instability";
    if (dynamic_cast<const InconsistencyError*>(&e)) return "error:inconsistency";
    if (dynamic_cast<const IntegrationQualityError*>(&e)) return "error:integration_quality";
    if (dynamic_cast<const UndefinedRatioError*>(&e)) return "error:undefined_ratio";
    if (dynamic_cast<const RangeError*>(&e)) return "error:range";
    if (dynamic_cast<const BracketError*>(&e)) return "error:bracket";
    if (dynamic_cast<const InvalidArgumentError*>(&e)) return "error:invalid_argument";
    return "error:unknown";
}

void check_grid(const std::vector<double>& grid, const char* name) {
    if (grid.empty()) throw InvalidArgumentError(std::string(name) + " grid is empty");
    if (grid.size() < 2) return;
    const bool up = grid[1] > grid[0];
    for (std::size_t k = 1; k < grid.size(); ++k)
        if ((up && !(grid[k] > grid[k - 1])) || (!up && !(grid[k] < grid[k - 1])))
            throw InvalidArgumentError(std::string(name) + " grid must be strictly monotone");
}

struct Prepared {
    double alpha = 0.0;
    CrystalState equilibrium;
    ModeSpectrum spectrum;
    PhaseReport phase;
    std::string status = "ok";
};

// Equilibria along the alpha grid, continued from one row to the next.
std::vector<Prepared> prepare_rows(const SweepSpec& spec, const TrapConfig& cfg_template) {
    std::vector<Prepared> rows(spec.alpha_grid.size());
    bool have_previous = false;
    CrystalState previous;
    double previous_alpha = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Prepared& p = rows[r];
        p.alpha = spec.alpha_grid[r];
        const TrapConfig cfg = cfg_template.with_alpha(p.alpha);
        try {
            p.equilibrium = have_previous ? continue_kink(previous, previous_alpha, cfg, spec.scan)
                                          : prepare_kink(cfg, spec.scan.relaxation, spec.scan.preparation);
            p.phase = classify_phase(p.equilibrium, cfg, spec.scan.classification);
            p.equilibrium.phase = p.phase.phase;
            p.spectrum = normal_modes(p.equilibrium, cfg, spec.scan.relaxation.gradient_tolerance);
            previous = p.equilibrium;
            previous_alpha = p.alpha;
            have_previous = true;
        } catch (const Error& e) {
            p.status = error_tag(e);
            p.phase.phase = dynamic_cast<const KinkLostError*>(&e) ? Phase::NoKink : Phase::Unclassified;
            have_previous = false;
        }
    }
    return rows;
}

std::vector<double> amplitudes_of(const SweepSpec& spec) {
    return spec.amplitude_grid.empty() ? std::vector<double>{spec.excitation.amplitude} : spec.amplitude_grid;
}

struct CellResult {
    SweepRecord record;
    std::vector<std::optional<double>> harmonic;
    std::vector<std::optional<double>> md;
};

CellResult compute_cell(const SweepSpec& spec, const TrapConfig& cfg_template, const Prepared& p,
                        double amplitude, const std::vector<double>& taus_s) {
    CellResult out;
    SweepRecord& rec = out.record;
    rec.alpha = p.alpha;
    rec.amplitude = amplitude;
    rec.phase = p.phase;
    rec.status = p.status;
    out.harmonic.assign(taus_s.size(), std::nullopt);
    out.md.assign(taus_s.size(), std::nullopt);
    if (p.status != "ok") return out;
    const TrapConfig cfg = cfg_template.with_alpha(p.alpha);
    std::vector<double> taus;
    for (double t : taus_s) taus.push_back(t * cfg.omega_z());
    try {
        ExcitationSpec exc = spec.excitation;
        exc.amplitude = amplitude;
        const CrystalState displaced = displace(p.equilibrium, exc, cfg);
        const int excited = dominant_mode(p.spectrum, p.equilibrium, displaced);
        rec.resonance_hits = static_cast<int>(
            find_third_order_resonances(p.spectrum, p.equilibrium, excited, spec.resonance_detuning,
                                        spec.resonance_weight)
                .size());
        if (spec.evolver != EvolverChoice::MD) {
            const auto r = transport(Evolver::Harmonic, p.equilibrium, p.spectrum, displaced, taus, spec.transport);
            for (std::size_t k = 0; k < r.delta_E.size(); ++k) out.harmonic[k] = r.delta_E[k];
        }
        if (spec.evolver != EvolverChoice::Harmonic) {
            const auto r = transport(Evolver::MD, p.equilibrium, p.spectrum, displaced, taus, spec.transport);
            for (std::size_t k = 0; k < r.delta_E.size(); ++k) out.md[k] = r.delta_E[k];
        }
    } catch (const Error& e) {
        rec.status = error_tag(e);
    }
    rec.delta_E_harmonic = out.harmonic.back();
    rec.delta_E_md = out.md.back();
    return out;
}

// Evaluates cells [skip, count) on `threads` workers and hands results to `emit` in index order.
template <typename Compute, typename Emit>
void ordered_parallel(std::size_t count, std::size_t skip, int threads, Compute compute, Emit emit) {
    if (threads <= 1 || count - skip <= 1) {
        for (std::size_t i = skip; i < count; ++i) emit(compute(i));
        return;
    }
    using Result = decltype(compute(std::size_t{0}));
    std::vector<std::optional<Result>> done(count);
    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{skip};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                Result r = compute(i);
                {
                    std::lock_guard<std::mutex> lock(mutex);
                    done[i] = std::move(r);
                }
                ready.notify_all();
            }
        });
    }
    for (std::size_t i = skip; i < count; ++i) {
        std::unique_lock<std::mutex> lock(mutex);
        ready.wait(lock, [&] { return done[i].has_value(); });
        Result r = std::move(*done[i]);
        done[i].reset();
        lock.unlock();
        emit(std::move(r));
    }
    for (auto& th : pool) th.join();
}

}  // namespace

void validate(const SweepSpec& spec) {
    check_grid(spec.alpha_grid, "alpha");
    if (!spec.amplitude_grid.empty()) check_grid(spec.amplitude_grid, "amplitude");
    for (double a : spec.alpha_grid)
        if (a < kMinKinkAlpha - 1e-12) {
            std::ostringstream msg;
            msg << "alpha = " << a << " lies below " << kMinKinkAlpha;
            throw RangeError(msg.str());
        }
    if (!(spec.tau > 0.0)) throw InvalidArgumentError("tau must be positive");
    if (spec.threads < 1) throw InvalidArgumentError("thread count must be at least 1");
    if (spec.transport.samples_per_period < 2) throw InvalidArgumentError("too few samples per period");
    if (!(spec.transport.md_dt_fraction > 0.0) || spec.transport.md_dt_fraction > 0.02)
        throw InvalidArgumentError("MD step must lie in (0, 1/50] of the shortest period");
}

std::vector<std::pair<double, double>> sweep_cells(const SweepSpec& spec) {
    std::vector<std::pair<double, double>> cells;
    for (double a : spec.alpha_grid)
        for (double d : amplitudes_of(spec)) cells.emplace_back(a, d);
    return cells;
}

int dominant_mode(const ModeSpectrum& spectrum, const CrystalState& equilibrium, const CrystalState& displaced) {
    const Eigen::VectorXd shares = mode_energy_shares(spectrum, displaced.positions - equilibrium.positions);
    int k = 0;
    shares.maxCoeff(&k);
    return k;
}

std::vector<SweepRecord> run_sweep(const SweepSpec& spec, const TrapConfig& cfg_template, const RecordSink& sink,
                                   std::size_t skip) {
    validate(spec);
    const auto prepared = prepare_rows(spec, cfg_template);
    const auto amps = amplitudes_of(spec);
    const std::size_t count = prepared.size() * amps.size();
    std::vector<SweepRecord> out;
    ordered_parallel(
        count, std::min(skip, count), spec.threads,
        [&](std::size_t i) {
            return compute_cell(spec, cfg_template, prepared[i / amps.size()], amps[i % amps.size()], {spec.tau})
                .record;
        },
        [&](SweepRecord r) {
            if (sink) sink(r);
            out.push_back(std::move(r));
        });
    return out;
}

std::vector<SweepRecord> sweep_alpha(const SweepSpec& spec, const TrapConfig& cfg_template) {
    return run_sweep(spec, cfg_template);
}

std::vector<SweepRecord> sweep_amplitude_alpha(const SweepSpec& spec, const TrapConfig& cfg_template) {
    if (spec.amplitude_grid.empty()) throw InvalidArgumentError("an amplitude grid is required");
    if (spec.evolver == EvolverChoice::Harmonic)
        throw InvalidArgumentError("the amplitude map needs molecular dynamics");
    return run_sweep(spec, cfg_template);
}

std::vector<TimescaleRow> compare_timescales(const SweepSpec& spec, const TrapConfig& cfg_template,
                                             const std::vector<double>& tau_list) {
    validate(spec);
    if (tau_list.empty()) throw InvalidArgumentError("tau list is empty");
    for (std::size_t k = 1; k < tau_list.size(); ++k)
        if (tau_list[k] < tau_list[k - 1]) throw InvalidArgumentError("tau list must be ascending");
    const auto prepared = prepare_rows(spec, cfg_template);
    const auto amps = amplitudes_of(spec);
    std::vector<TimescaleRow> out;
    ordered_parallel(
        prepared.size() * amps.size(), 0, spec.threads,
        [&](std::size_t i) {
            return compute_cell(spec, cfg_template, prepared[i / amps.size()], amps[i % amps.size()], tau_list);
        },
        [&](CellResult cell) {
            for (std::size_t k = 0; k < tau_list.size(); ++k) {
                TimescaleRow row;
                row.alpha = cell.record.alpha;
                row.amplitude = cell.record.amplitude;
                row.tau = tau_list[k];
                row.delta_E_harmonic = cell.harmonic[k];
                row.delta_E_md = cell.md[k];
                row.status = cell.record.status;
                out.push_back(std::move(row));
            }
        });
    return out;
}

}  // namespace ionkink
