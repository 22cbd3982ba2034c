#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ionkink/modes.hpp"

namespace ionkink {

enum class Axis { X, Z };
enum class Evolver { Harmonic, MD };

std::string_view to_string(Axis axis);
Axis axis_from_string(std::string_view text);
std::string_view to_string(Evolver evolver);

/// Static displacement of one ion. `ion_index` counts ions by ascending equilibrium z.
struct ExcitationSpec {
    int ion_index = 0;
    Axis axis = Axis::X;
    double amplitude = 0.0;  ///< metres
};

struct Trajectory {
    std::vector<double> times;                ///< units of 1/omega_z
    Eigen::MatrixXd kinetic;                  ///< N x T, rows follow the ion labels of the state
    std::vector<Eigen::VectorXd> positions;   ///< one flat vector per sample, empty unless recorded
    ExcitationSpec excitation;
    Evolver evolver = Evolver::Harmonic;
    double total_energy_drift = 0.0;          ///< max |E - E0| / |E0| over the run (MD only)
    double dt = 0.0;                          ///< integrator step (MD only)
    std::optional<CrystalState> final_state;  ///< positions and velocities after the last step (MD only)
};

struct LocalizationResult {
    double delta_E = 0.0;
    double tau = 0.0;            ///< averaging window, units of 1/omega_z
    std::vector<int> left_set;   ///< ion labels with equilibrium z < 0
};

/// Label of the ion at position `rank` in z order.
int ion_label(const CrystalState& equilibrium, int rank);

/// Equilibrium with one coordinate shifted by amplitude / l0 and all velocities zero.
CrystalState displace(const CrystalState& equilibrium, const ExcitationSpec& spec, const TrapConfig& cfg);

/// Per-ion kinetic energy 0.5 (vx^2 + vz^2) in units of m wz^2 l0^2.
Eigen::VectorXd ion_kinetic(const Eigen::VectorXd& velocities);

/// Closed-form motion q(t) = q_eq + sum_k v_k (v_k . q0) cos(w_k t).
class HarmonicSolution {
public:
    /// Throws InconsistencyError if the spectrum does not diagonalise the Hessian of `equilibrium`.
    HarmonicSolution(const CrystalState& equilibrium, const CrystalState& displaced,
                     const ModeSpectrum& spectrum);

    void velocities(double t, Eigen::VectorXd& v) const;
    void positions(double t, Eigen::VectorXd& q) const;
    /// 0.5 sum_k w_k^2 c_k^2, constant along the motion.
    double energy() const;
    const Eigen::VectorXd& amplitudes() const { return amplitudes_; }

private:
    Eigen::VectorXd equilibrium_;
    Eigen::MatrixXd modes_;
    Eigen::VectorXd omega_;
    Eigen::VectorXd amplitudes_;
};

Trajectory evolve_harmonic(const CrystalState& equilibrium, const CrystalState& displaced,
                           const ModeSpectrum& spectrum, const std::vector<double>& times,
                           bool record_positions = false);

struct MdSettings {
    double dt = 0.0;              ///< units of 1/omega_z
    double t_final = 0.0;
    int sample_stride = 1;
    bool record_positions = false;
    double drift_limit = 1e-6;
    double omega_max = 0.0;       ///< when positive, dt must not exceed 2 pi / (50 omega_max)
};

/// 2 pi * fraction / omega_max; fraction = 0.01 gives a hundred steps per fastest period.
double md_time_step(double omega_max, double fraction = 0.01);

/// Velocity Verlet. Throws IntegrationQualityError when the relative energy drift reaches
/// `drift_limit`, DegenerateConfigurationError on a collision.
Trajectory evolve_md(const CrystalState& displaced, const TrapConfig& cfg, const MdSettings& settings);

/// Relative total-energy drift of a velocity Verlet run, without sampling or checks.
double md_energy_drift(const CrystalState& displaced, double alpha, double dt, long steps);

/// Left weight per ion label: 1 for z < 0, 0.5 on the axis, 0 otherwise.
Eigen::VectorXd left_weights(const CrystalState& equilibrium);

/// Trapezoidal time average over [0, tau]. Throws UndefinedRatioError for zero kinetic energy.
LocalizationResult delta_E(const Trajectory& traj, double tau, const CrystalState& equilibrium);

/// Kinetic share of the right half (equilibrium z > 0) at every sample; 0 while nothing moves.
std::vector<double> right_half_share(const Trajectory& traj, const CrystalState& equilibrium);

/// Running trapezoidal integral of per-ion kinetic energy with snapshots at given times.
class KineticAverager {
public:
    KineticAverager(int n_ions, std::vector<double> checkpoints);

    void add(double t, const Eigen::VectorXd& kinetic);
    bool done() const { return next_ >= checkpoints_.size(); }
    /// Time-averaged kinetic energy per ion for every checkpoint reached so far.
    const std::vector<Eigen::VectorXd>& means() const { return means_; }

private:
    std::vector<double> checkpoints_;
    std::size_t next_ = 0;
    Eigen::VectorXd integral_;
    Eigen::VectorXd last_kinetic_;
    double last_t_ = 0.0;
    bool started_ = false;
    std::vector<Eigen::VectorXd> means_;
};

double delta_E_from_means(const Eigen::VectorXd& mean_kinetic, const CrystalState& equilibrium);

struct TransportSettings {
    int samples_per_period = 20;   ///< harmonic sampling per shortest mode period
    double md_dt_fraction = 0.01;  ///< MD step as a fraction of the shortest mode period
    double drift_limit = 1e-6;
};

struct TransportResult {
    std::vector<double> delta_E;   ///< one value per requested tau
    double drift = 0.0;            ///< MD only
    long samples = 0;
};

/// Delta E at each averaging time in `taus` (ascending, units of 1/omega_z) without storing the
/// trajectory. The spectrum fixes the sampling: harmonic samples and MD steps resolve its fastest mode.
TransportResult transport(Evolver evolver, const CrystalState& equilibrium, const ModeSpectrum& spectrum,
                          const CrystalState& displaced, const std::vector<double>& taus,
                          const TransportSettings& settings = {});

}  // namespace ionkink
