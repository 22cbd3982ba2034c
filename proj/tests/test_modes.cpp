#include <doctest.h>

#include <cmath>

#include "ionkink/modes.hpp"

using namespace ionkink;

namespace {

TrapConfig yb30(double alpha) { return TrapConfig::from_lab_units(30, 172.0, 25000.0, alpha); }

CrystalState two_ions() {
    const double z0 = std::cbrt(0.25);
    return CrystalState::from_xz(std::vector<double>{0.0, 0.0}, std::vector<double>{-z0, z0});
}

ModeSpectrum synthetic(double alpha, double wa, double wb) {
    // Branch A lives on the first coordinate, branch B on the second.
    ModeSpectrum s;
    s.alpha = alpha;
    s.frequencies.resize(2);
    s.eigenvectors = Eigen::MatrixXd::Zero(2, 2);
    if (wa <= wb) {
        s.frequencies << wa, wb;
        s.eigenvectors << 1, 0, 0, 1;
    } else {
        s.frequencies << wb, wa;
        s.eigenvectors << 0, 1, 1, 0;
    }
    return s;
}

}  // namespace

TEST_CASE("two-ion spectrum") {
    const TrapConfig cfg(2, 1e-25, 1.0, 3.0);
    const ModeSpectrum s = normal_modes(two_ions(), cfg);
    REQUIRE(s.size() == 4);
    CHECK(s.frequencies[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.frequencies[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(s.frequencies[2] == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
    CHECK(s.frequencies[3] == doctest::Approx(3.0).epsilon(1e-12));
    // centre-of-mass mode moves both ions axially in phase
    CHECK(std::abs(s.eigenvectors(1, 0)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(s.eigenvectors(1, 0) == doctest::Approx(s.eigenvectors(3, 0)).epsilon(1e-12));
}

TEST_CASE("eigenvectors are orthonormal and reconstruct the Hessian") {
    for (double alpha : {6.0, 6.8, 8.4}) {
        const TrapConfig cfg = yb30(alpha);
        const CrystalState eq = prepare_kink(cfg);
        const ModeSpectrum s = normal_modes(eq, cfg);
        const Eigen::MatrixXd g = s.eigenvectors.transpose() * s.eigenvectors;
        CHECK((g - Eigen::MatrixXd::Identity(60, 60)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(reconstruction_residual(s, eq, alpha) < 1e-9);
        for (int k = 1; k < s.size(); ++k) CHECK(s.frequencies[k] >= s.frequencies[k - 1]);
        CHECK(s.frequencies[0] > 0.0);
        // ion amplitudes of a unit mode sum to one
        const Eigen::MatrixXd amp = ion_amplitudes(s);
        CHECK((amp.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("normal modes refuse stale states and saddles") {
    const TrapConfig cfg = yb30(6.0);
    CrystalState eq = prepare_kink(cfg);
    eq.z(4) += 1e-4;
    CHECK_THROWS_AS(normal_modes(eq, cfg), StaleStateError);

    // Straight three-ion chain below its zigzag threshold: a stationary point, not a minimum.
    const double a = std::cbrt(1.25);
    const CrystalState chain =
        CrystalState::from_xz(std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{-a, 0.0, a});
    CHECK_THROWS_AS(normal_modes(chain, TrapConfig(3, 1e-25, 1.0, 1.0)), SaddleError);
}

TEST_CASE("the kink mode is localized and soft in the sliding phase") {
    const TrapConfig cfg = yb30(6.0);
    const CrystalState eq = prepare_kink(cfg);
    const double kz = kink_position(eq);
    const Eigen::VectorXd scores = localization_scores(normal_modes(eq, cfg), eq, kz);
    const ModeSpectrum s = normal_modes(eq, cfg);
    const int k = kink_mode(s, eq, kz);
    CHECK(scores[k] >= 0.5);
    for (int j = 0; j < k; ++j) CHECK(scores[j] < 0.5);
    CHECK((scores.array() >= 0.0).all());
    CHECK((scores.array() <= 1.0 + 1e-12).all());
    CHECK(s.frequencies[k] < 0.5);
    CHECK_THROWS_AS(kink_mode(s, prepare_zigzag(cfg), 0.0), NoDefectError);
}

TEST_CASE("kink mode softens towards the sliding-pinned transition") {
    const auto rows = mode_spectrum_vs_alpha(yb30(6.0), {6.0, 6.2, 6.3, 6.36});
    REQUIRE(rows.size() == 4);
    for (std::size_t r = 1; r < rows.size(); ++r) CHECK(rows[r].kink_frequency < rows[r - 1].kink_frequency);
    for (const auto& r : rows) CHECK(r.phase.phase == Phase::Sliding);
}

TEST_CASE("spectrum scan stops at kink loss") {
    const auto rows = mode_spectrum_vs_alpha(yb30(9.0), {9.0, 9.2, 9.4});
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].kink_lost);
    CHECK(rows[1].kink_lost);
}

TEST_CASE("vibron lattice of a linear chain") {
    const TrapConfig cfg = yb30(13.0);
    const CrystalState eq = prepare_zigzag(cfg);
    const VibronLattice lat = vibron_lattice(eq, cfg);
    CHECK((lat.hoppings - lat.hoppings.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 30; ++i) CHECK(lat.hoppings.block<2, 2>(2 * i, 2 * i).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd h = hessian(eq, cfg);
    const int c = 15;
    std::vector<double> logd, logt;
    auto x_axis = [&](int i) { return std::abs(lat.local_axes[i](0, 0)) > 0.5 ? 0 : 1; };
    for (int j = 0; j < 30; ++j) {
        // on a straight chain the local axes are x and z; transverse coupling is 1 / d^3
        const double wx = std::sqrt(h(2 * j, 2 * j)), wz = std::sqrt(h(2 * j + 1, 2 * j + 1));
        CHECK(lat.local_frequencies(j, 0) == doctest::Approx(std::min(wx, wz)).epsilon(1e-12));
        CHECK(lat.local_frequencies(j, 1) == doctest::Approx(std::max(wx, wz)).epsilon(1e-12));
        if (j == c) continue;
        const double d = std::abs(eq.z(j) - eq.z(c));
        const double wc = std::sqrt(h(2 * c, 2 * c));
        const double t = lat.hopping(c, x_axis(c), j, x_axis(j));
        CHECK(std::abs(t) == doctest::Approx(1.0 / (d * d * d) / (2.0 * std::sqrt(wc * wx))).epsilon(1e-9));
        logd.push_back(std::log(d));
        logt.push_back(std::log(std::abs(t)));
    }
    const double n = static_cast<double>(logd.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < logd.size(); ++k) {
        sx += logd[k];
        sy += logt[k];
        sxx += logd[k] * logd[k];
        sxy += logd[k] * logt[k];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == doctest::Approx(-3.0).epsilon(0.2 / 3.0));
}

TEST_CASE("vibron lattice hoppings are symmetric for a kink crystal") {
    const TrapConfig cfg = yb30(6.8);
    const VibronLattice lat = vibron_lattice(prepare_kink(cfg), cfg);
    CHECK((lat.hoppings - lat.hoppings.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((lat.local_frequencies.array() > 0.0).all());
}

TEST_CASE("no crossings in the two-ion spectrum") {
    std::vector<ModeSpectrum> table;
    for (double alpha = 3.0; alpha <= 4.0 + 1e-9; alpha += 0.05)
        table.push_back(normal_modes(two_ions(), TrapConfig(2, 1e-25, 1.0, alpha)));
    CHECK(detect_mode_crossings(table, {}).empty());
    CHECK(detect_mode_crossings({}, {}).empty());
    CHECK(detect_mode_crossings({table[0]}, {}).empty());
    CHECK_THROWS_AS(detect_mode_crossings(table, {Eigen::VectorXd::Ones(4)}), InconsistencyError);
}

TEST_CASE("a synthetic level crossing is tracked and merged") {
    std::vector<ModeSpectrum> table;
    const double wa[] = {1.0, 1.1, 1.2, 1.3, 1.4};
    for (int r = 0; r < 5; ++r) table.push_back(synthetic(0.1 * r, wa[r], 1.2));
    const auto perm = track_modes(table);
    CHECK(perm[4][0] == 1);  // branch A ends as the upper mode
    const auto hits = detect_mode_crossings(table, {});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].alpha_lo == doctest::Approx(0.1));
    CHECK(hits[0].alpha_hi == doctest::Approx(0.3));

    // an unpopulated partner does not count
    std::vector<Eigen::VectorXd> w;
    for (const auto& s : table) {
        Eigen::VectorXd v(2);
        for (int k = 0; k < 2; ++k) v[k] = std::abs(s.eigenvectors(0, k)) > 0.5 ? 1.0 : 0.0;
        w.push_back(v);
    }
    CHECK(detect_mode_crossings(table, w).empty());
}

TEST_CASE("resonance search equals a brute-force scan") {
    for (double alpha : {6.8, 7.01}) {
        const TrapConfig cfg = yb30(alpha);
        const CrystalState eq = prepare_kink(cfg);
        const ModeSpectrum s = normal_modes(eq, cfg);
        const int m = s.size();
        // left and right amplitude of every mode, straight from the eigenvectors
        Eigen::VectorXd left = Eigen::VectorXd::Zero(m), right = Eigen::VectorXd::Zero(m);
        for (int k = 0; k < m; ++k)
            for (int i = 0; i < 30; ++i) {
                const double a = s.eigenvectors(2 * i, k) * s.eigenvectors(2 * i, k) +
                                 s.eigenvectors(2 * i + 1, k) * s.eigenvectors(2 * i + 1, k);
                (eq.z(i) < 0.0 ? left : right)[k] += a;
            }
        for (int excited : {20, 33, 59}) {
            for (double dmax : {5e-3, 2e-2}) {
                std::vector<std::tuple<double, int, int>> expect;
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b) {
                        if (a > b || a == excited || b == excited) continue;
                        const double det = std::abs(s.frequencies[excited] - s.frequencies[a] - s.frequencies[b]);
                        const double w = 2.0 * (left[a] * right[a] + left[b] * right[b]);
                        if (det <= dmax && w >= 0.1) expect.emplace_back(det, a, b);
                    }
                std::sort(expect.begin(), expect.end());
                const auto hits = find_third_order_resonances(s, eq, excited, dmax, 0.1);
                REQUIRE(hits.size() == expect.size());
                for (std::size_t h = 0; h < hits.size(); ++h) {
                    CHECK(hits[h].mode_a == std::get<1>(expect[h]));
                    CHECK(hits[h].mode_b == std::get<2>(expect[h]));
                    CHECK(hits[h].detuning == std::get<0>(expect[h]));
                    CHECK(hits[h].excited_mode == excited);
                }
            }
        }
        CHECK_THROWS_AS(find_third_order_resonances(s, eq, m, 1e-3, 0.0), InvalidArgumentError);
    }
}

TEST_CASE("mode energy shares sum to one") {
    const TrapConfig cfg = yb30(6.8);
    const CrystalState eq = prepare_kink(cfg);
    const ModeSpectrum s = normal_modes(eq, cfg);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(60);
    d[0] = 0.03;
    const Eigen::VectorXd e = mode_energy_shares(s, d);
    CHECK(e.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // a displacement along a single mode puts all energy into it
    const Eigen::VectorXd single = mode_energy_shares(s, 0.01 * s.eigenvectors.col(17));
    CHECK(single[17] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a constant degenerate pair is reported once") {
    std::vector<ModeSpectrum> table;
    for (int r = 0; r < 4; ++r) table.push_back(synthetic(0.1 * r, 1.0, 1.0));
    const auto hits = detect_mode_crossings(table, {});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].alpha_lo == doctest::Approx(0.0));
    CHECK(hits[0].alpha_hi == doctest::Approx(0.3));
}

TEST_CASE("two ions have equal local frequencies") {
    const TrapConfig cfg(2, 1e-25, 1.0, 4.0);
    const VibronLattice lat = vibron_lattice(two_ions(), cfg);
    CHECK(lat.local_frequencies(0, 0) == doctest::Approx(lat.local_frequencies(1, 0)).epsilon(1e-12));
    CHECK(lat.local_frequencies(0, 1) == doctest::Approx(lat.local_frequencies(1, 1)).epsilon(1e-12));
}

TEST_CASE("kink mode does not depend on the window size") {
    for (double alpha : {6.0, 6.8, 8.4}) {
        const TrapConfig cfg = yb30(alpha);
        const CrystalState eq = prepare_kink(cfg);
        const ModeSpectrum s = normal_modes(eq, cfg);
        const int reference = kink_mode(s, eq, kink_position(eq));
        for (int window = 4; window <= 10; ++window) {
            KinkModeSettings k;
            k.window = window;
            CHECK(kink_mode(s, eq, kink_position(eq), k) == reference);
        }
    }
}

namespace {

double largest_jump(double lo, double step, int n) {
    std::vector<double> grid;
    for (int k = 0; k <= n; ++k) grid.push_back(lo + step * k);
    const auto rows = mode_spectrum_vs_alpha(yb30(lo), grid);
    REQUIRE(rows.size() == grid.size());
    double jump = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r)
        jump = std::max(jump, (rows[r].spectrum.frequencies - rows[r - 1].spectrum.frequencies).cwiseAbs().maxCoeff());
    return jump;
}

}  // namespace

TEST_CASE("frequencies change smoothly away from transitions") {
    CHECK(largest_jump(5.6, 0.05, 12) < 0.1);
    // in the pinned phase the soft modes are steep but still continuous: halving the step halves the jump
    const double coarse = largest_jump(6.6, 0.05, 16), fine = largest_jump(6.6, 0.025, 32);
    CHECK(fine / coarse > 0.4);
    CHECK(fine / coarse < 0.6);
}

TEST_CASE("zero detuning finds no resonance") {
    const TrapConfig cfg = yb30(7.01);
    const CrystalState eq = prepare_kink(cfg);
    const ModeSpectrum s = normal_modes(eq, cfg);
    for (int excited : {10, 33, 59}) CHECK(find_third_order_resonances(s, eq, excited, 0.0, 0.0).empty());
}
