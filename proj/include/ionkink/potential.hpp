#pragma once

// Trap-plus-Coulomb potential of a planar ion crystal.
//
// All kernels work in dimensionless units: lengths in l0 = (e^2 / (4 pi eps0 m wz^2))^(1/3),
// energies in m wz^2 l0^2, times in 1/wz. In these units
//
//     V = sum_i (z_i^2 + alpha^2 x_i^2) / 2 + sum_{i<j} 1 / |r_i - r_j|
//
// and the only remaining parameters are alpha and the ion count.

#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ionkink/errors.hpp"

namespace ionkink {

namespace constants {
// CODATA 2018
inline constexpr double elementary_charge = 1.602176634e-19;    // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg
inline constexpr double reduced_planck = 1.054571817e-34;        // J s
inline constexpr double pi = std::numbers::pi;
}  // namespace constants

/// Minimum pairwise separation (dimensionless) below which a configuration is rejected.
inline constexpr double kCoincidenceThreshold = 1e-9;

/// Physical trap description together with the derived unit scales.
class TrapConfig {
public:
    TrapConfig(int n_ions, double ion_mass_kg, double omega_z, double alpha);

    /// Convenience constructor from laboratory units (mass in amu, axial frequency in Hz).
    static TrapConfig from_lab_units(int n_ions, double ion_mass_amu, double axial_frequency_hz,
                                     double alpha);

    int n_ions() const noexcept { return n_ions_; }
    double ion_mass() const noexcept { return ion_mass_; }
    double omega_z() const noexcept { return omega_z_; }
    double alpha() const noexcept { return alpha_; }

    double length_scale() const noexcept { return length_scale_; }  ///< l0 in m
    double energy_scale() const noexcept { return energy_scale_; }  ///< m wz^2 l0^2 in J
    double time_scale() const noexcept { return time_scale_; }      ///< 1/wz in s

    TrapConfig with_alpha(double alpha) const;
    TrapConfig with_n_ions(int n_ions) const;

    static double length_scale_for(double ion_mass_kg, double omega_z);

private:
    int n_ions_;
    double ion_mass_;
    double omega_z_;
    double alpha_;
    double length_scale_;
    double energy_scale_;
    double time_scale_;
};

enum class Phase { Sliding, Pinned, OddKink, NoKink, Unclassified };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);

/// Planar ion positions, flattened as (x_0, z_0, x_1, z_1, ...) in units of l0.
struct CrystalState {
    Eigen::VectorXd positions;
    std::optional<Eigen::VectorXd> velocities;  ///< same layout, units of l0 * wz
    Phase phase = Phase::Unclassified;

    CrystalState() = default;
    explicit CrystalState(Eigen::VectorXd flat_positions) : positions(std::move(flat_positions)) {}

    static CrystalState from_xz(std::span<const double> x, std::span<const double> z);

    int n_ions() const noexcept { return static_cast<int>(positions.size() / 2); }
    double x(int i) const { return positions[2 * i]; }
    double z(int i) const { return positions[2 * i + 1]; }
    double& x(int i) { return positions[2 * i]; }
    double& z(int i) { return positions[2 * i + 1]; }
};

/// Throws DegenerateConfigurationError for non-finite coordinates or coincident ions.
void validate(const CrystalState& state);

/// Ion indices ordered by ascending z (ties broken by x, then by index).
std::vector<int> ions_by_z(const CrystalState& state);

// Kernels on the raw flattened coordinate vector. They only check for coincidence, not finiteness.
double potential_energy(const Eigen::Ref<const Eigen::VectorXd>& q, double alpha);
/// Writes dV/dq into `grad` and returns V.
double energy_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& q, double alpha,
                           Eigen::Ref<Eigen::VectorXd> grad);
Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& q, double alpha);
/// V(q + dq) - V(q) without the cancellation of subtracting two large totals.
double energy_difference(const Eigen::Ref<const Eigen::VectorXd>& q,
                         const Eigen::Ref<const Eigen::VectorXd>& dq, double alpha);

double potential_energy(const CrystalState& state, const TrapConfig& cfg);
double potential_energy(const CrystalState& state, double alpha);
Eigen::VectorXd gradient(const CrystalState& state, const TrapConfig& cfg);
Eigen::VectorXd gradient(const CrystalState& state, double alpha);
Eigen::MatrixXd hessian(const CrystalState& state, const TrapConfig& cfg);
Eigen::MatrixXd hessian(const CrystalState& state, double alpha);

double max_abs_gradient(const CrystalState& state, double alpha);

CrystalState to_dimensionless(std::span<const Eigen::Vector2d> positions_si, const TrapConfig& cfg);
/// Inverse of to_dimensionless: (x, z) pairs in metres.
std::vector<Eigen::Vector2d> to_physical(const CrystalState& state, const TrapConfig& cfg);

}  // namespace ionkink
