#include "ionkink/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ionkink {

TrapConfig::TrapConfig(int n_ions, double ion_mass_kg, double omega_z, double alpha)
    : n_ions_(n_ions), ion_mass_(ion_mass_kg), omega_z_(omega_z), alpha_(alpha) {
    if (n_ions < 1) throw InvalidArgumentError("n_ions must be positive");
    if (!(ion_mass_kg > 0.0) || !std::isfinite(ion_mass_kg))
        throw InvalidArgumentError("ion mass must be positive");
    if (!(omega_z > 0.0) || !std::isfinite(omega_z))
        throw InvalidArgumentError("omega_z must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgumentError("alpha must be positive");
    length_scale_ = length_scale_for(ion_mass_kg, omega_z);
    energy_scale_ = ion_mass_kg * omega_z * omega_z * length_scale_ * length_scale_;
    time_scale_ = 1.0 / omega_z;
}

TrapConfig TrapConfig::from_lab_units(int n_ions, double ion_mass_amu, double axial_frequency_hz,
                                      double alpha) {
    return TrapConfig(n_ions, ion_mass_amu * constants::atomic_mass_unit,
                      2.0 * constants::pi * axial_frequency_hz, alpha);
}

double TrapConfig::length_scale_for(double ion_mass_kg, double omega_z) {
    const double e2 = constants::elementary_charge * constants::elementary_charge;
    return std::cbrt(e2 / (4.0 * constants::pi * constants::vacuum_permittivity * ion_mass_kg *
                           omega_z * omega_z));
}

TrapConfig TrapConfig::with_alpha(double alpha) const {
    return TrapConfig(n_ions_, ion_mass_, omega_z_, alpha);
}

TrapConfig TrapConfig::with_n_ions(int n_ions) const {
    return TrapConfig(n_ions, ion_mass_, omega_z_, alpha_);
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Sliding: return "Sliding";
        case Phase::Pinned: return "Pinned";
        case Phase::OddKink: return "OddKink";
        case Phase::NoKink: return "NoKink";
        case Phase::Unclassified: return "Unclassified";
    }
    return "Unclassified";
}

Phase phase_from_string(std::string_view text) {
    for (Phase p : {Phase::Sliding, Phase::Pinned, Phase::OddKink, Phase::NoKink, Phase::Unclassified})
        if (to_string(p) == text) return p;
    throw InvalidArgumentError("unknown phase label '" + std::string(text) + "'");
}

CrystalState CrystalState::from_xz(std::span<const double> x, std::span<const double> z) {
    if (x.size() != z.size()) throw InvalidArgumentError("x and z sizes differ");
    Eigen::VectorXd q(2 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        q[2 * i] = x[i];
        q[2 * i + 1] = z[i];
    }
    return CrystalState(std::move(q));
}

namespace {

void check_pair(double r, int i, int j) {
    if (!(r > kCoincidenceThreshold)) {
        std::ostringstream msg;
        msg << "ions " << i << " and " << j << " coincide (separation " << r << ")";
        throw DegenerateConfigurationError(msg.str());
    }
}

}  // namespace

void validate(const CrystalState& state) {
    if (state.positions.size() % 2 != 0)
        throw DegenerateConfigurationError("position vector has odd length");
    if (!state.positions.allFinite())
        throw DegenerateConfigurationError("non-finite coordinate");
    if (state.velocities) {
        if (state.velocities->size() != state.positions.size())
            throw DegenerateConfigurationError("velocity vector size mismatch");
        if (!state.velocities->allFinite()) throw DegenerateConfigurationError("non-finite velocity");
    }
    const int n = state.n_ions();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            check_pair(std::hypot(state.x(i) - state.x(j), state.z(i) - state.z(j)), i, j);
}

std::vector<int> ions_by_z(const CrystalState& state) {
    std::vector<int> idx(state.n_ions());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (state.z(a) != state.z(b)) return state.z(a) < state.z(b);
        return state.x(a) < state.x(b);
    });
    return idx;
}

double potential_energy(const Eigen::Ref<const Eigen::VectorXd>& q, double alpha) {
    const int n = static_cast<int>(q.size() / 2);
    const double a2 = alpha * alpha;
    double trap = 0.0;
    double coulomb = 0.0;
    for (int i = 0; i < n; ++i) {
        const double xi = q[2 * i], zi = q[2 * i + 1];
        trap += zi * zi + a2 * xi * xi;
        for (int j = i + 1; j < n; ++j) {
            const double r = std::hypot(xi - q[2 * j], zi - q[2 * j + 1]);
            check_pair(r, i, j);
            coulomb += 1.0 / r;
        }
    }
    return 0.5 * trap + coulomb;
}

double energy_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& q, double alpha,
                           Eigen::Ref<Eigen::VectorXd> grad) {
    const int n = static_cast<int>(q.size() / 2);
    const double a2 = alpha * alpha;
    double trap = 0.0;
    double coulomb = 0.0;
    for (int i = 0; i < n; ++i) {
        grad[2 * i] = a2 * q[2 * i];
        grad[2 * i + 1] = q[2 * i + 1];
        trap += q[2 * i + 1] * q[2 * i + 1] + a2 * q[2 * i] * q[2 * i];
    }
    for (int i = 0; i < n; ++i) {
        const double xi = q[2 * i], zi = q[2 * i + 1];
        for (int j = i + 1; j < n; ++j) {
            const double dx = xi - q[2 * j];
            const double dz = zi - q[2 * j + 1];
            const double r2 = dx * dx + dz * dz;
            const double r = std::sqrt(r2);
            check_pair(r, i, j);
            const double inv_r = 1.0 / r;
            const double inv_r3 = inv_r / r2;
            coulomb += inv_r;
            grad[2 * i] -= dx * inv_r3;
            grad[2 * i + 1] -= dz * inv_r3;
            grad[2 * j] += dx * inv_r3;
            grad[2 * j + 1] += dz * inv_r3;
        }
    }
    return 0.5 * trap + coulomb;
}

double energy_difference(const Eigen::Ref<const Eigen::VectorXd>& q,
                         const Eigen::Ref<const Eigen::VectorXd>& dq, double alpha) {
    const int n = static_cast<int>(q.size() / 2);
    const double a2 = alpha * alpha;
    double trap = 0.0;
    double coulomb = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ex = dq[2 * i], ez = dq[2 * i + 1];
        trap += ez * (2.0 * q[2 * i + 1] + ez) + a2 * ex * (2.0 * q[2 * i] + ex);
        for (int j = i + 1; j < n; ++j) {
            const double dx = q[2 * i] - q[2 * j];
            const double dz = q[2 * i + 1] - q[2 * j + 1];
            const double ux = ex - dq[2 * j];
            const double uz = ez - dq[2 * j + 1];
            const double r = std::hypot(dx, dz);
            const double r_new = std::hypot(dx + ux, dz + uz);
            check_pair(r_new, i, j);
            const double dr2 = ux * (2.0 * dx + ux) + uz * (2.0 * dz + uz);
            coulomb -= dr2 / ((r + r_new) * r * r_new);
        }
    }
    return 0.5 * trap + coulomb;
}

Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& q, double alpha) {
    const int n = static_cast<int>(q.size() / 2);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = q[2 * i] - q[2 * j];
            const double dz = q[2 * i + 1] - q[2 * j + 1];
            const double r2 = dx * dx + dz * dz;
            const double r = std::sqrt(r2);
            check_pair(r, i, j);
            const double inv_r3 = 1.0 / (r2 * r);
            const double inv_r5 = inv_r3 / r2;
            // d^2(1/r)/dr_i dr_j
            const double bxx = -(3.0 * dx * dx * inv_r5 - inv_r3);
            const double bzz = -(3.0 * dz * dz * inv_r5 - inv_r3);
            const double bxz = -3.0 * dx * dz * inv_r5;
            h(2 * i, 2 * j) = h(2 * j, 2 * i) = bxx;
            h(2 * i + 1, 2 * j + 1) = h(2 * j + 1, 2 * i + 1) = bzz;
            h(2 * i, 2 * j + 1) = h(2 * j + 1, 2 * i) = bxz;
            h(2 * i + 1, 2 * j) = h(2 * j, 2 * i + 1) = bxz;
            h(2 * i, 2 * i) -= bxx;
            h(2 * j, 2 * j) -= bxx;
            h(2 * i + 1, 2 * i + 1) -= bzz;
            h(2 * j + 1, 2 * j + 1) -= bzz;
            h(2 * i, 2 * i + 1) -= bxz;
            h(2 * j, 2 * j + 1) -= bxz;
        }
    }
    for (int i = 0; i < n; ++i) {
        h(2 * i + 1, 2 * i) = h(2 * i, 2 * i + 1);
        h(2 * i, 2 * i) += alpha * alpha;
        h(2 * i + 1, 2 * i + 1) += 1.0;
    }
    return h;
}

double potential_energy(const CrystalState& state, const TrapConfig& cfg) {
    return potential_energy(state, cfg.alpha());
}

double potential_energy(const CrystalState& state, double alpha) {
    validate(state);
    return potential_energy(state.positions, alpha);
}

Eigen::VectorXd gradient(const CrystalState& state, const TrapConfig& cfg) {
    return gradient(state, cfg.alpha());
}

Eigen::VectorXd gradient(const CrystalState& state, double alpha) {
    validate(state);
    Eigen::VectorXd g(state.positions.size());
    energy_and_gradient(state.positions, alpha, g);
    return g;
}

Eigen::MatrixXd hessian(const CrystalState& state, const TrapConfig& cfg) {
    return hessian(state, cfg.alpha());
}

Eigen::MatrixXd hessian(const CrystalState& state, double alpha) {
    validate(state);
    return hessian(state.positions, alpha);
}

double max_abs_gradient(const CrystalState& state, double alpha) {
    return gradient(state, alpha).cwiseAbs().maxCoeff();
}

CrystalState to_dimensionless(std::span<const Eigen::Vector2d> positions_si, const TrapConfig& cfg) {
    Eigen::VectorXd q(2 * positions_si.size());
    const double l0 = cfg.length_scale();
    for (std::size_t i = 0; i < positions_si.size(); ++i) {
        q[2 * i] = positions_si[i].x() / l0;
        q[2 * i + 1] = positions_si[i].y() / l0;
    }
    return CrystalState(std::move(q));
}

std::vector<Eigen::Vector2d> to_physical(const CrystalState& state, const TrapConfig& cfg) {
    std::vector<Eigen::Vector2d> out(state.n_ions());
    const double l0 = cfg.length_scale();
    for (int i = 0; i < state.n_ions(); ++i) out[i] = Eigen::Vector2d(state.x(i) * l0, state.z(i) * l0);
    return out;
}

}  // namespace ionkink
