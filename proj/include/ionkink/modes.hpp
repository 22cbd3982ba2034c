#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ionkink/equilibrium.hpp"

namespace ionkink {

/// Harmonic spectrum at an equilibrium. Frequencies in units of omega_z, ascending.
/// Columns of `eigenvectors` are modes; rows follow the (x_0, z_0, x_1, ...) layout.
struct ModeSpectrum {
    Eigen::VectorXd frequencies;
    Eigen::MatrixXd eigenvectors;
    double alpha = 0.0;
    double lowest_eigenvalue = 0.0;

    int size() const noexcept { return static_cast<int>(frequencies.size()); }
};

/// Below this eigenvalue a spectrum is treated as a saddle rather than as roundoff.
inline constexpr double kNegativeEigenvalueFloor = -1e-6;

ModeSpectrum normal_modes(const CrystalState& equilibrium, const TrapConfig& cfg,
                          double gradient_tolerance = 1e-10);

/// Max |V diag(w^2) V^T - H| for the Hessian of `equilibrium`.
double reconstruction_residual(const ModeSpectrum& spectrum, const CrystalState& equilibrium,
                               double alpha);

/// Squared amplitude of each mode on each ion: rows ions, columns modes.
Eigen::MatrixXd ion_amplitudes(const ModeSpectrum& spectrum);

struct KinkModeSettings {
    int window = 6;          ///< ions nearest the kink that form the defect core
    double min_share = 0.5;  ///< amplitude share inside the window required for a kink mode
};

/// Amplitude share of every mode inside the window around `kink_z`.
Eigen::VectorXd localization_scores(const ModeSpectrum& spectrum, const CrystalState& equilibrium,
                                    double kink_z, int window = 6);

/// Lowest-frequency mode concentrated on the defect core. Throws NoDefectError without a kink.
int kink_mode(const ModeSpectrum& spectrum, const CrystalState& equilibrium, double kink_z,
              const KinkModeSettings& settings = {});

struct SpectrumRow {
    double alpha = 0.0;
    CrystalState equilibrium;
    ModeSpectrum spectrum;
    PhaseReport phase;
    int kink_mode = -1;
    double kink_frequency = 0.0;
    Eigen::VectorXd scores;
    bool kink_lost = false;
};

struct ScanSettings {
    RelaxationSettings relaxation;
    KinkPreparation preparation;
    ClassificationSettings classification;
    KinkModeSettings kink;
};

/// Branch-continued spectra over `alpha_grid`. Stops after the first row that lost the kink;
/// that row is included with kink_lost set.
std::vector<SpectrumRow> mode_spectrum_vs_alpha(const TrapConfig& cfg_template,
                                                const std::vector<double>& alpha_grid,
                                                const ScanSettings& settings = {});

/// Equilibrium at cfg.alpha() continued from a kink state known at `from_alpha`, with the kink checks.
/// Throws KinkLostError.
CrystalState continue_kink(const CrystalState& previous, double from_alpha, const TrapConfig& cfg,
                           const ScanSettings& settings = {});

struct KinkModeMinimum {
    double alpha = 0.0;
    double frequency = 0.0;
};

/// Golden-section search for the minimum of the kink-mode frequency inside [lo, hi].
KinkModeMinimum refine_kink_mode_minimum(const TrapConfig& cfg_template, const CrystalState& state_at_lo,
                                         double alpha_lo, double alpha_hi, double tol = 1e-6,
                                         const ScanSettings& settings = {});

/// Local oscillators and rotating-wave hoppings of the quadratic expansion, in units of omega_z
/// and hbar * omega_z.
struct VibronLattice {
    Eigen::MatrixXd local_frequencies;           ///< N x 2, ascending per ion
    std::vector<Eigen::Matrix2d> local_axes;     ///< columns are the principal axes of each ion
    Eigen::MatrixXd hoppings;                    ///< 2N x 2N, entry (2i+mu, 2j+eta); zero on ion-diagonal blocks

    double hopping(int i, int mu, int j, int eta) const { return hoppings(2 * i + mu, 2 * j + eta); }
};

VibronLattice vibron_lattice(const CrystalState& equilibrium, const TrapConfig& cfg);

struct ModeCrossing {
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    int mode_a = 0;  ///< sorted index at alpha_lo
    int mode_b = 0;
};

struct CrossingSettings {
    double degeneracy = 1e-3;
    double weight_min = 0.02;
};

/// Tracks branches by eigenvector overlap and reports intervals where two populated branches
/// come within `degeneracy` or swap order. `weights[r][k]` is the population of sorted mode k
/// at row r; an empty list counts every mode as populated.
std::vector<ModeCrossing> detect_mode_crossings(const std::vector<ModeSpectrum>& table,
                                                const std::vector<Eigen::VectorXd>& weights,
                                                const CrossingSettings& settings = {});

/// For every row, the sorted mode index that each branch of row 0 maps to.
std::vector<std::vector<int>> track_modes(const std::vector<ModeSpectrum>& table);

struct ResonanceHit {
    int excited_mode = 0;
    int mode_a = 0;
    int mode_b = 0;
    double detuning = 0.0;
    double transport_weight = 0.0;
};

/// Amplitude share of every mode on the left (z < 0) and right half of `equilibrium`.
/// An ion on the axis counts half to each side.
void half_shares(const ModeSpectrum& spectrum, const CrystalState& equilibrium, Eigen::VectorXd& left,
                 Eigen::VectorXd& right);

/// Pairs (a <= b) with |w_exc - w_a - w_b| <= detuning_max and a transport weight
/// 2 (L_a R_a + L_b R_b) >= weight_min, sorted by detuning.
std::vector<ResonanceHit> find_third_order_resonances(const ModeSpectrum& spectrum,
                                                      const CrystalState& equilibrium, int excited_mode,
                                                      double detuning_max, double weight_min);

/// Fraction of the harmonic energy that a static displacement puts into each mode.
Eigen::VectorXd mode_energy_shares(const ModeSpectrum& spectrum, const Eigen::VectorXd& displacement);

}  // namespace ionkink
