#include "ionkink/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ionkink {

std::string_view to_string(Axis axis) { return axis == Axis::X ? "x" : "z"; }

Axis axis_from_string(std::string_view text) {
    if (text == "x") return Axis::X;
    if (text == "z") return Axis::Z;
    throw InvalidArgumentError("unknown axis '" + std::string(text) + "' (expected x or z)");
}

std::string_view to_string(Evolver evolver) { return evolver == Evolver::Harmonic ? "harmonic" : "md"; }

int ion_label(const CrystalState& equilibrium, int rank) {
    if (rank < 0 || rank >= equilibrium.n_ions()) {
        std::ostringstream msg;
        msg << "ion index " << rank << " out of range for " << equilibrium.n_ions() << " ions";
        throw InvalidArgumentError(msg.str());
    }
    return ions_by_z(equilibrium)[rank];
}

CrystalState displace(const CrystalState& equilibrium, const ExcitationSpec& spec, const TrapConfig& cfg) {
    if (!std::isfinite(spec.amplitude)) throw InvalidArgumentError("excitation amplitude must be finite");
    CrystalState out = equilibrium;
    const int label = ion_label(equilibrium, spec.ion_index);
    out.positions[2 * label + (spec.axis == Axis::X ? 0 : 1)] += spec.amplitude / cfg.length_scale();
    out.velocities = Eigen::VectorXd::Zero(out.positions.size());
    out.phase = Phase::Unclassified;
    validate(out);
    return out;
}

Eigen::VectorXd ion_kinetic(const Eigen::VectorXd& velocities) {
    const int n = static_cast<int>(velocities.size() / 2);
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i)
        e[i] = 0.5 * (velocities[2 * i] * velocities[2 * i] + velocities[2 * i + 1] * velocities[2 * i + 1]);
    return e;
}

HarmonicSolution::HarmonicSolution(const CrystalState& equilibrium, const CrystalState& displaced,
                                   const ModeSpectrum& spectrum) {
    if (equilibrium.positions.size() != displaced.positions.size() ||
        equilibrium.positions.size() != spectrum.eigenvectors.rows())
        throw InconsistencyError("equilibrium, displaced state and spectrum differ in size");
    const double residual = reconstruction_residual(spectrum, equilibrium, spectrum.alpha);
    if (!(residual < 1e-9)) {
        std::ostringstream msg;
        msg << "spectrum does not belong to the equilibrium (reconstruction residual " << residual << ")";
        throw InconsistencyError(msg.str());
    }
    equilibrium_ = equilibrium.positions;
    modes_ = spectrum.eigenvectors;
    omega_ = spectrum.frequencies;
    for (int k = 0; k < omega_.size(); ++k)
        if (omega_[k] < 1e-6) omega_[k] = 0.0;
    amplitudes_ = modes_.transpose() * (displaced.positions - equilibrium.positions);
}

void HarmonicSolution::velocities(double t, Eigen::VectorXd& v) const {
    Eigen::VectorXd rate(omega_.size());
    for (int k = 0; k < omega_.size(); ++k) rate[k] = -amplitudes_[k] * omega_[k] * std::sin(omega_[k] * t);
    v.noalias() = modes_ * rate;
}

void HarmonicSolution::positions(double t, Eigen::VectorXd& q) const {
    Eigen::VectorXd c(omega_.size());
    for (int k = 0; k < omega_.size(); ++k) c[k] = amplitudes_[k] * std::cos(omega_[k] * t);
    q = equilibrium_;
    q.noalias() += modes_ * c;
}

double HarmonicSolution::energy() const {
    return 0.5 * (amplitudes_.array() * omega_.array()).square().sum();
}

Trajectory evolve_harmonic(const CrystalState& equilibrium, const CrystalState& displaced,
                           const ModeSpectrum& spectrum, const std::vector<double>& times,
                           bool record_positions) {
    const HarmonicSolution sol(equilibrium, displaced, spectrum);
    Trajectory traj;
    traj.evolver = Evolver::Harmonic;
    traj.times = times;
    traj.kinetic.resize(equilibrium.n_ions(), static_cast<Eigen::Index>(times.size()));
    Eigen::VectorXd v, q;
    for (std::size_t s = 0; s < times.size(); ++s) {
        if (s > 0 && !(times[s] > times[s - 1])) throw InvalidArgumentError("time grid must increase strictly");
        sol.velocities(times[s], v);
        traj.kinetic.col(static_cast<Eigen::Index>(s)) = ion_kinetic(v);
        if (record_positions) {
            sol.positions(times[s], q);
            traj.positions.push_back(q);
        }
    }
    return traj;
}

double md_time_step(double omega_max, double fraction) {
    if (!(omega_max > 0.0)) throw InvalidArgumentError("omega_max must be positive");
    return 2.0 * constants::pi * fraction / omega_max;
}

namespace {

class Verlet {
public:
    Verlet(const Eigen::VectorXd& q0, const Eigen::VectorXd& v0, double alpha)
        : q_(q0), v_(v0), g_(q0.size()), alpha_(alpha) {
        potential_ = energy_and_gradient(q_, alpha_, g_);
    }

    void step(double dt) {
        v_.noalias() -= (0.5 * dt) * g_;
        q_.noalias() += dt * v_;
        potential_ = energy_and_gradient(q_, alpha_, g_);
        v_.noalias() -= (0.5 * dt) * g_;
    }

    double energy() const { return potential_ + 0.5 * v_.squaredNorm(); }
    const Eigen::VectorXd& q() const { return q_; }
    const Eigen::VectorXd& v() const { return v_; }

private:
    Eigen::VectorXd q_, v_, g_;
    double alpha_;
    double potential_ = 0.0;
};

Eigen::VectorXd initial_velocities(const CrystalState& s) {
    return s.velocities ? *s.velocities : Eigen::VectorXd::Zero(s.positions.size());
}

void throw_drift(double drift, double limit) {
    std::ostringstream msg;
    msg << "relative energy drift " << drift << " reached the limit " << limit << "; use a smaller dt";
    throw IntegrationQualityError(msg.str(), drift);
}

}  // namespace

Trajectory evolve_md(const CrystalState& displaced, const TrapConfig& cfg, const MdSettings& settings) {
    validate(displaced);
    if (!(settings.dt > 0.0)) throw InvalidArgumentError("dt must be positive");
    if (settings.sample_stride < 1) throw InvalidArgumentError("sample stride must be at least 1");
    if (settings.omega_max > 0.0 && settings.dt > md_time_step(settings.omega_max, 0.02) * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "dt = " << settings.dt << " exceeds 2 pi / (50 omega_max)";
        throw InvalidArgumentError(msg.str());
    }
    const long steps = std::max(0L, static_cast<long>(std::llround(settings.t_final / settings.dt)));
    Verlet md(displaced.positions, initial_velocities(displaced), cfg.alpha());
    const double e0 = md.energy();

    Trajectory traj;
    traj.evolver = Evolver::MD;
    traj.dt = settings.dt;
    const long samples = steps / settings.sample_stride + 1;
    traj.kinetic.resize(displaced.n_ions(), samples);
    traj.times.reserve(static_cast<std::size_t>(samples));
    auto record = [&](long step) {
        const Eigen::Index col = static_cast<Eigen::Index>(traj.times.size());
        traj.times.push_back(static_cast<double>(step) * settings.dt);
        traj.kinetic.col(col) = ion_kinetic(md.v());
        if (settings.record_positions) traj.positions.push_back(md.q());
    };
    record(0);
    double drift = 0.0;
    for (long step = 1; step <= steps; ++step) {
        md.step(settings.dt);
        drift = std::max(drift, std::abs(md.energy() - e0) / std::abs(e0));
        if (drift >= settings.drift_limit) throw_drift(drift, settings.drift_limit);
        if (step % settings.sample_stride == 0) record(step);
    }
    traj.kinetic.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(traj.times.size()));
    traj.total_energy_drift = drift;
    traj.final_state = CrystalState(md.q());
    traj.final_state->velocities = md.v();
    return traj;
}

double md_energy_drift(const CrystalState& displaced, double alpha, double dt, long steps) {
    Verlet md(displaced.positions, initial_velocities(displaced), alpha);
    const double e0 = md.energy();
    double drift = 0.0;
    for (long s = 0; s < steps; ++s) {
        md.step(dt);
        drift = std::max(drift, std::abs(md.energy() - e0) / std::abs(e0));
    }
    return drift;
}

Eigen::VectorXd left_weights(const CrystalState& equilibrium) {
    Eigen::VectorXd w(equilibrium.n_ions());
    for (int i = 0; i < equilibrium.n_ions(); ++i) {
        const double z = equilibrium.z(i);
        w[i] = std::abs(z) < 1e-9 ? 0.5 : (z < 0.0 ? 1.0 : 0.0);
    }
    return w;
}

double delta_E_from_means(const Eigen::VectorXd& mean_kinetic, const CrystalState& equilibrium) {
    const double total = mean_kinetic.sum();
    if (!(total > 0.0)) throw UndefinedRatioError("no kinetic energy: delta E is undefined");
    const double value = left_weights(equilibrium).dot(mean_kinetic) / total;
    return std::clamp(value, 0.0, 1.0);
}

KineticAverager::KineticAverager(int n_ions, std::vector<double> checkpoints)
    : checkpoints_(std::move(checkpoints)), integral_(Eigen::VectorXd::Zero(n_ions)) {
    for (std::size_t k = 0; k < checkpoints_.size(); ++k) {
        if (!(checkpoints_[k] > 0.0)) throw InvalidArgumentError("averaging times must be positive");
        if (k > 0 && checkpoints_[k] < checkpoints_[k - 1])
            throw InvalidArgumentError("averaging times must be ascending");
    }
}

void KineticAverager::add(double t, const Eigen::VectorXd& kinetic) {
    if (!started_) {
        last_kinetic_ = kinetic;
        last_t_ = t;
        started_ = true;
        return;
    }
    const double h = t - last_t_;
    if (!(h > 0.0)) throw InvalidArgumentError("samples must be strictly increasing in time");
    while (next_ < checkpoints_.size() && checkpoints_[next_] <= t * (1.0 + 1e-12)) {
        const double c = std::min(checkpoints_[next_], t);
        const double f = (c - last_t_) / h;
        const Eigen::VectorXd at_c = last_kinetic_ + f * (kinetic - last_kinetic_);
        means_.push_back((integral_ + 0.5 * (c - last_t_) * (last_kinetic_ + at_c)) / c);
        ++next_;
    }
    integral_ += 0.5 * h * (last_kinetic_ + kinetic);
    last_kinetic_ = kinetic;
    last_t_ = t;
}

LocalizationResult delta_E(const Trajectory& traj, double tau, const CrystalState& equilibrium) {
    if (traj.kinetic.rows() != equilibrium.n_ions())
        throw InconsistencyError("trajectory and equilibrium differ in ion count");
    if (traj.times.empty() || traj.times.front() != 0.0)
        throw InvalidArgumentError("trajectory must start at t = 0");
    KineticAverager avg(equilibrium.n_ions(), {tau});
    for (std::size_t s = 0; s < traj.times.size() && !avg.done(); ++s)
        avg.add(traj.times[s], traj.kinetic.col(static_cast<Eigen::Index>(s)));
    if (!avg.done()) throw InvalidArgumentError("trajectory does not cover the averaging window");
    LocalizationResult r;
    r.tau = tau;
    r.delta_E = delta_E_from_means(avg.means().front(), equilibrium);
    for (int i = 0; i < equilibrium.n_ions(); ++i)
        if (equilibrium.z(i) < 0.0) r.left_set.push_back(i);
    return r;
}

std::vector<double> right_half_share(const Trajectory& traj, const CrystalState& equilibrium) {
    const Eigen::VectorXd right = Eigen::VectorXd::Ones(equilibrium.n_ions()) - left_weights(equilibrium);
    std::vector<double> share(traj.times.size(), 0.0);
    for (std::size_t s = 0; s < share.size(); ++s) {
        const auto col = traj.kinetic.col(static_cast<Eigen::Index>(s));
        const double total = col.sum();
        if (total > 0.0) share[s] = right.dot(col) / total;
    }
    return share;
}

TransportResult transport(Evolver evolver, const CrystalState& equilibrium, const ModeSpectrum& spectrum,
                          const CrystalState& displaced, const std::vector<double>& taus,
                          const TransportSettings& settings) {
    if (taus.empty()) throw InvalidArgumentError("at least one averaging time is required");
    const int n = equilibrium.n_ions();
    const double tau_max = taus.back();
    const double omega_max = spectrum.frequencies.maxCoeff();
    KineticAverager avg(n, taus);
    TransportResult result;

    if (evolver == Evolver::Harmonic) {
        const HarmonicSolution sol(equilibrium, displaced, spectrum);
        const double h_max = 2.0 * constants::pi / omega_max / settings.samples_per_period;
        const long count = static_cast<long>(std::ceil(tau_max / h_max));
        const double h = tau_max / static_cast<double>(count);
        Eigen::VectorXd v;
        for (long s = 0; s <= count; ++s) {
            const double t = static_cast<double>(s) * h;
            sol.velocities(t, v);
            avg.add(t, ion_kinetic(v));
        }
        result.samples = count + 1;
    } else {
        validate(displaced);
        const double dt_max = md_time_step(omega_max, settings.md_dt_fraction);
        const long steps = static_cast<long>(std::ceil(tau_max / dt_max));
        const double dt = tau_max / static_cast<double>(steps);
        Verlet md(displaced.positions, initial_velocities(displaced), spectrum.alpha);
        const double e0 = md.energy();
        avg.add(0.0, ion_kinetic(md.v()));
        double drift = 0.0;
        for (long s = 1; s <= steps; ++s) {
            md.step(dt);
            drift = std::max(drift, std::abs(md.energy() - e0) / std::abs(e0));
            if (drift >= settings.drift_limit) throw_drift(drift, settings.drift_limit);
            avg.add(static_cast<double>(s) * dt, ion_kinetic(md.v()));
        }
        result.drift = drift;
        result.samples = steps + 1;
    }
    for (const auto& mean : avg.means()) result.delta_E.push_back(delta_E_from_means(mean, equilibrium));
    return result;
}

}  // namespace ionkink
