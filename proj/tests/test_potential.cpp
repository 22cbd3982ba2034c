#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "ionkink/potential.hpp"

using namespace ionkink;

namespace {

// Plain double loop over pairs.
double brute_energy(const Eigen::VectorXd& q, double alpha) {
    const int n = static_cast<int>(q.size() / 2);
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
        v += 0.5 * (q[2 * i + 1] * q[2 * i + 1] + alpha * alpha * q[2 * i] * q[2 * i]);
        for (int j = i + 1; j < n; ++j) v += 1.0 / std::hypot(q[2 * i] - q[2 * j], q[2 * i + 1] - q[2 * j + 1]);
    }
    return v;
}

Eigen::VectorXd random_state(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ux(-1.0, 1.0), uz(-3.0, 3.0);
    Eigen::VectorXd q(2 * n);
    for (;;) {
        for (int i = 0; i < n; ++i) {
            q[2 * i] = ux(rng);
            q[2 * i + 1] = uz(rng);
        }
        bool ok = true;
        for (int i = 0; i < n && ok; ++i)
            for (int j = i + 1; j < n && ok; ++j)
                ok = std::hypot(q[2 * i] - q[2 * j], q[2 * i + 1] - q[2 * j + 1]) > 0.3;
        if (ok) return q;
    }
}

}  // namespace

TEST_CASE("energy matches a direct pair sum") {
    std::mt19937_64 rng(1);
    for (int n : {1, 2, 5, 10}) {
        const Eigen::VectorXd q = random_state(n, rng);
        CHECK(potential_energy(q, 7.3) == doctest::Approx(brute_energy(q, 7.3)).epsilon(1e-13));
    }
}

TEST_CASE("gradient and hessian agree with finite differences") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ua(4.0, 14.0);
    const double h = 1e-6;
    double worst_g = 0.0, worst_h = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = (trial % 3 == 0) ? 2 : (trial % 3 == 1) ? 5 : 10;
        const double alpha = ua(rng);
        const Eigen::VectorXd q = random_state(n, rng);
        Eigen::VectorXd g(q.size());
        energy_and_gradient(q, alpha, g);
        const Eigen::MatrixXd H = hessian(q, alpha);
        const double gscale = std::max(1.0, g.cwiseAbs().maxCoeff());
        const double hscale = std::max(1.0, H.cwiseAbs().maxCoeff());
        for (int k = 0; k < q.size(); ++k) {
            Eigen::VectorXd qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            const double fd = (brute_energy(qp, alpha) - brute_energy(qm, alpha)) / (2 * h);
            worst_g = std::max(worst_g, std::abs(fd - g[k]) / gscale);
            Eigen::VectorXd gp(q.size()), gm(q.size());
            energy_and_gradient(qp, alpha, gp);
            energy_and_gradient(qm, alpha, gm);
            const Eigen::VectorXd col = (gp - gm) / (2 * h);
            worst_h = std::max(worst_h, (col - H.col(k)).cwiseAbs().maxCoeff() / hscale);
        }
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(worst_g < 1e-6);
    CHECK(worst_h < 1e-5);
}

TEST_CASE("energy difference avoids cancellation") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Eigen::VectorXd q = random_state(10, rng);
    for (double scale : {1e-2, 1e-5, 1e-9}) {
        Eigen::VectorXd dq(q.size());
        for (auto& v : dq) v = scale * nd(rng);
        const double exact = energy_difference(q, dq, 6.0);
        Eigen::VectorXd g(q.size());
        energy_and_gradient(q, 6.0, g);
        if (scale > 1e-3)
            CHECK(exact == doctest::Approx(brute_energy(q + dq, 6.0) - brute_energy(q, 6.0)).epsilon(1e-9));
        else  // first order dominates; compare against the directional derivative
            CHECK(exact == doctest::Approx(g.dot(dq)).epsilon(10 * scale));
    }
}

TEST_CASE("two ions: analytic equilibrium and frequencies") {
    const double z0 = std::cbrt(0.25);
    const CrystalState s = CrystalState::from_xz(std::vector<double>{0.0, 0.0}, std::vector<double>{-z0, z0});
    const double alpha = 3.0;
    CHECK(max_abs_gradient(s, alpha) < 1e-14);
    CHECK(potential_energy(s, alpha) == doctest::Approx(z0 * z0 + 1.0 / (2.0 * z0)).epsilon(1e-14));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(s, alpha));
    const Eigen::VectorXd ev = es.eigenvalues();
    // axial centre of mass, stretch, transverse rocking, transverse centre of mass
    CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(ev[2] == doctest::Approx(alpha * alpha - 1.0).epsilon(1e-12));
    CHECK(ev[3] == doctest::Approx(alpha * alpha).epsilon(1e-12));
}

TEST_CASE("length scale of Yb-172 at 25 kHz") {
    const TrapConfig cfg = TrapConfig::from_lab_units(30, 172.0, 25000.0, 6.0);
    const double e = 1.602176634e-19, eps0 = 8.8541878128e-12, amu = 1.66053906660e-27;
    const double m = 172.0 * amu, w = 2.0 * std::acos(-1.0) * 25000.0;
    const double l0 = std::cbrt(e * e / (4.0 * std::acos(-1.0) * eps0 * m * w * w));
    CHECK(cfg.length_scale() == doctest::Approx(l0).epsilon(1e-14));
    CHECK(cfg.length_scale() == doctest::Approx(3.199005e-5).epsilon(1e-6));
    CHECK(cfg.time_scale() == doctest::Approx(1.0 / w));
    CHECK(cfg.energy_scale() == doctest::Approx(m * w * w * l0 * l0));
}

TEST_CASE("dimensionless energy times the energy scale equals the SI energy") {
    std::mt19937_64 rng(3);
    const double e = 1.602176634e-19, eps0 = 8.8541878128e-12;
    for (double hz : {1e4, 25000.0, 1e6}) {
        const TrapConfig cfg = TrapConfig::from_lab_units(6, 40.0, hz, 5.0);
        const CrystalState s(random_state(6, rng));
        const auto r = to_physical(s, cfg);
        const double m = cfg.ion_mass(), w = cfg.omega_z(), wx = 5.0 * w;
        double v = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            v += 0.5 * m * (w * w * r[i][1] * r[i][1] + wx * wx * r[i][0] * r[i][0]);
            for (std::size_t j = i + 1; j < r.size(); ++j)
                v += e * e / (4.0 * std::acos(-1.0) * eps0 * (r[i] - r[j]).norm());
        }
        CHECK(potential_energy(s, cfg) * cfg.energy_scale() == doctest::Approx(v).epsilon(1e-12));
        const CrystalState back = to_dimensionless(r, cfg);
        CHECK((back.positions - s.positions).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("energy is invariant under relabelling and mirror images") {
    std::mt19937_64 rng(11);
    const Eigen::VectorXd q = random_state(8, rng);
    Eigen::VectorXd p(q.size()), mx = q, mz = q;
    for (int i = 0; i < 8; ++i) {
        p.segment<2>(2 * i) = q.segment<2>(2 * ((i * 3) % 8));
        mx[2 * i] = -q[2 * i];
        mz[2 * i + 1] = -q[2 * i + 1];
    }
    const double v = potential_energy(q, 8.0);
    CHECK(potential_energy(p, 8.0) == doctest::Approx(v).epsilon(1e-14));
    CHECK(potential_energy(mx, 8.0) == doctest::Approx(v).epsilon(1e-14));
    CHECK(potential_energy(mz, 8.0) == doctest::Approx(v).epsilon(1e-14));
}

TEST_CASE("degenerate configurations are rejected") {
    CrystalState s = CrystalState::from_xz(std::vector<double>{0.0, 0.0}, std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(validate(s), DegenerateConfigurationError);
    CHECK_THROWS_AS(potential_energy(s, 5.0), DegenerateConfigurationError);
    s.z(1) = std::nan("");
    CHECK_THROWS_AS(validate(s), DegenerateConfigurationError);
    CHECK_THROWS_AS(TrapConfig(2, 1e-25, -1.0, 5.0), InvalidArgumentError);
    CHECK_THROWS_AS(TrapConfig(0, 1e-25, 1.0, 5.0), InvalidArgumentError);
}

TEST_CASE("ions_by_z sorts by axial position") {
    const CrystalState s =
        CrystalState::from_xz(std::vector<double>{0.1, -0.1, 0.0}, std::vector<double>{2.0, -1.0, 0.5});
    CHECK(ions_by_z(s) == std::vector<int>{1, 2, 0});
}
