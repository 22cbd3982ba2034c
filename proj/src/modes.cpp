#include "ionkink/modes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace ionkink {

ModeSpectrum normal_modes(const CrystalState& equilibrium, const TrapConfig& cfg, double gradient_tolerance) {
    const double gmax = max_abs_gradient(equilibrium, cfg.alpha());
    if (gmax > 100.0 * gradient_tolerance) {
        std::ostringstream msg;
        msg << "normal modes need a relaxed state: |grad|_inf = " << gmax;
        throw StaleStateError(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(equilibrium.positions, cfg.alpha()));
    if (es.info() != Eigen::Success) throw InconsistencyError("Hessian eigendecomposition failed");
    ModeSpectrum s;
    s.alpha = cfg.alpha();
    s.lowest_eigenvalue = es.eigenvalues()[0];
    if (s.lowest_eigenvalue < kNegativeEigenvalueFloor) {
        std::ostringstream msg;
        msg << "equilibrium is a saddle: lowest Hessian eigenvalue " << s.lowest_eigenvalue;
        throw SaddleError(msg.str());
    }
    s.frequencies = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    s.eigenvectors = es.eigenvectors();
    return s;
}

double reconstruction_residual(const ModeSpectrum& spectrum, const CrystalState& equilibrium, double alpha) {
    const Eigen::MatrixXd h = hessian(equilibrium.positions, alpha);
    if (h.rows() != spectrum.eigenvectors.rows()) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd& v = spectrum.eigenvectors;
    const Eigen::VectorXd w2 = spectrum.frequencies.cwiseAbs2();
    return (v * w2.asDiagonal() * v.transpose() - h).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd ion_amplitudes(const ModeSpectrum& spectrum) {
    const Eigen::MatrixXd& v = spectrum.eigenvectors;
    const int n = static_cast<int>(v.rows() / 2);
    Eigen::MatrixXd amp(n, v.cols());
    for (int i = 0; i < n; ++i) amp.row(i) = v.row(2 * i).cwiseAbs2() + v.row(2 * i + 1).cwiseAbs2();
    return amp;
}

Eigen::VectorXd localization_scores(const ModeSpectrum& spectrum, const CrystalState& equilibrium,
                                    double kink_z, int window) {
    const int n = equilibrium.n_ions();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::abs(equilibrium.z(a) - kink_z) < std::abs(equilibrium.z(b) - kink_z);
    });
    const Eigen::MatrixXd amp = ion_amplitudes(spectrum);
    Eigen::VectorXd share = Eigen::VectorXd::Zero(spectrum.size());
    for (int k = 0; k < std::min(window, n); ++k) share += amp.row(idx[k]).transpose();
    return share;
}

int kink_mode(const ModeSpectrum& spectrum, const CrystalState& equilibrium, double kink_z,
              const KinkModeSettings& settings) {
    if (!has_kink(equilibrium)) throw NoDefectError("state carries no kink");
    const Eigen::VectorXd share = localization_scores(spectrum, equilibrium, kink_z, settings.window);
    for (int k = 0; k < spectrum.size(); ++k)
        if (share[k] >= settings.min_share) return k;
    int best = 0;
    share.maxCoeff(&best);
    return best;
}

CrystalState continue_kink(const CrystalState& previous, double from_alpha, const TrapConfig& cfg,
                           const ScanSettings& settings) {
    const double delta = cfg.alpha() - from_alpha;
    const double step = settings.preparation.continuation_step;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(delta) / step - 1e-9)));
    CrystalState state = previous;
    for (int k = 1; k <= steps; ++k) {
        const double a = k == steps ? cfg.alpha() : from_alpha + delta * k / steps;
        state = relax(state, cfg.with_alpha(a), settings.relaxation);
        if (!has_kink(state, settings.classification.zigzag_fraction)) {
            std::ostringstream msg;
            msg << "kink annihilated at alpha = " << a;
            throw KinkLostError(msg.str(), a);
        }
    }
    return canonicalize(state, settings.preparation.branch);
}

namespace {

SpectrumRow spectrum_row(const CrystalState& eq, const TrapConfig& cfg, const ScanSettings& settings) {
    SpectrumRow row;
    row.alpha = cfg.alpha();
    row.equilibrium = eq;
    row.phase = classify_phase(eq, cfg, settings.classification);
    row.equilibrium.phase = row.phase.phase;
    row.spectrum = normal_modes(eq, cfg, settings.relaxation.gradient_tolerance);
    const double kz = kink_position(eq);
    row.scores = localization_scores(row.spectrum, eq, kz, settings.kink.window);
    row.kink_mode = kink_mode(row.spectrum, eq, kz, settings.kink);
    row.kink_frequency = row.spectrum.frequencies[row.kink_mode];
    return row;
}

}  // namespace

std::vector<SpectrumRow> mode_spectrum_vs_alpha(const TrapConfig& cfg_template,
                                                const std::vector<double>& alpha_grid,
                                                const ScanSettings& settings) {
    std::vector<SpectrumRow> rows;
    CrystalState state;
    double prev_alpha = 0.0;
    for (std::size_t r = 0; r < alpha_grid.size(); ++r) {
        const TrapConfig cfg = cfg_template.with_alpha(alpha_grid[r]);
        try {
            state = r == 0 ? prepare_kink(cfg, settings.relaxation, settings.preparation)
                           : continue_kink(state, prev_alpha, cfg, settings);
        } catch (const KinkLostError&) {
            SpectrumRow lost;
            lost.alpha = alpha_grid[r];
            lost.kink_lost = true;
            lost.phase.phase = Phase::NoKink;
            rows.push_back(std::move(lost));
            break;
        }
        prev_alpha = alpha_grid[r];
        rows.push_back(spectrum_row(state, cfg, settings));
    }
    return rows;
}

KinkModeMinimum refine_kink_mode_minimum(const TrapConfig& cfg_template, const CrystalState& state_at_lo,
                                         double alpha_lo, double alpha_hi, double tol,
                                         const ScanSettings& settings) {
    if (!(alpha_hi > alpha_lo)) throw BracketError("bracket must satisfy alpha_lo < alpha_hi");
    const CrystalState base = relax(state_at_lo, cfg_template.with_alpha(alpha_lo), settings.relaxation);
    auto frequency_at = [&](double a) {
        const TrapConfig cfg = cfg_template.with_alpha(a);
        const CrystalState eq = continue_kink(base, alpha_lo, cfg, settings);
        const ModeSpectrum s = normal_modes(eq, cfg, settings.relaxation.gradient_tolerance);
        return s.frequencies[kink_mode(s, eq, kink_position(eq), settings.kink)];
    };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = alpha_lo, b = alpha_hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = frequency_at(c), fd = frequency_at(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = frequency_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = frequency_at(d);
        }
    }
    return fc <= fd ? KinkModeMinimum{c, fc} : KinkModeMinimum{d, fd};
}

VibronLattice vibron_lattice(const CrystalState& equilibrium, const TrapConfig& cfg) {
    validate(equilibrium);
    const Eigen::MatrixXd h = hessian(equilibrium.positions, cfg.alpha());
    const int n = equilibrium.n_ions();
    VibronLattice lat;
    lat.local_frequencies.resize(n, 2);
    lat.local_axes.resize(n);
    for (int i = 0; i < n; ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h.block<2, 2>(2 * i, 2 * i));
        if (es.eigenvalues()[0] <= 0.0) {
            std::ostringstream msg;
            msg << "ion " << i << " has a non-positive local curvature " << es.eigenvalues()[0];
            throw LocalInstabilityError(msg.str());
        }
        lat.local_frequencies.row(i) = es.eigenvalues().cwiseSqrt().transpose();
        lat.local_axes[i] = es.eigenvectors();
    }
    lat.hoppings = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Eigen::Matrix2d k = lat.local_axes[i].transpose() * h.block<2, 2>(2 * i, 2 * j) *
                                      lat.local_axes[j];
            for (int mu = 0; mu < 2; ++mu) {
                for (int eta = 0; eta < 2; ++eta) {
                    const double t =
                        k(mu, eta) / (2.0 * std::sqrt(lat.local_frequencies(i, mu) * lat.local_frequencies(j, eta)));
                    lat.hoppings(2 * i + mu, 2 * j + eta) = t;
                    lat.hoppings(2 * j + eta, 2 * i + mu) = t;
                }
            }
        }
    }
    return lat;
}

std::vector<std::vector<int>> track_modes(const std::vector<ModeSpectrum>& table) {
    std::vector<std::vector<int>> perm;
    if (table.empty()) return perm;
    const int m = table.front().size();
    std::vector<int> first(m);
    std::iota(first.begin(), first.end(), 0);
    perm.push_back(first);
    for (std::size_t r = 1; r < table.size(); ++r) {
        if (table[r].size() != m) throw InconsistencyError("spectra in a table differ in size");
        const Eigen::MatrixXd overlap =
            (table[r - 1].eigenvectors.transpose() * table[r].eigenvectors).cwiseAbs();
        // Greedy assignment on the largest remaining overlap.
        std::vector<std::pair<double, std::pair<int, int>>> entries;
        entries.reserve(static_cast<std::size_t>(m) * m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) entries.push_back({overlap(a, b), {a, b}});
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        std::vector<int> map_prev(m, -1);
        std::vector<char> taken(m, 0);
        int assigned = 0;
        for (const auto& e : entries) {
            const auto [a, b] = e.second;
            if (map_prev[a] >= 0 || taken[b]) continue;
            map_prev[a] = b;
            taken[b] = 1;
            if (++assigned == m) break;
        }
        std::vector<int> next(m);
        for (int branch = 0; branch < m; ++branch) next[branch] = map_prev[perm.back()[branch]];
        perm.push_back(std::move(next));
    }
    return perm;
}

std::vector<ModeCrossing> detect_mode_crossings(const std::vector<ModeSpectrum>& table,
                                                const std::vector<Eigen::VectorXd>& weights,
                                                const CrossingSettings& settings) {
    std::vector<ModeCrossing> out;
    if (table.size() < 2) return out;
    if (!weights.empty() && weights.size() != table.size())
        throw InconsistencyError("one weight vector per spectrum row is required");
    const auto perm = track_modes(table);
    const int m = table.front().size();
    auto weight = [&](std::size_t r, int sorted) { return weights.empty() ? 1.0 : weights[r][sorted]; };

    // Open interval per branch pair, so that consecutive flagged intervals merge.
    std::vector<int> open(static_cast<std::size_t>(m) * m, -1);
    for (std::size_t r = 0; r + 1 < table.size(); ++r) {
        for (int b = 0; b < m; ++b) {
            for (int c = b + 1; c < m; ++c) {
                const int b0 = perm[r][b], c0 = perm[r][c];
                const int b1 = perm[r + 1][b], c1 = perm[r + 1][c];
                const double g0 = table[r].frequencies[b0] - table[r].frequencies[c0];
                const double g1 = table[r + 1].frequencies[b1] - table[r + 1].frequencies[c1];
                const bool close = std::abs(g0) < settings.degeneracy || std::abs(g1) < settings.degeneracy ||
                                   (g0 < 0.0) != (g1 < 0.0);
                const bool populated =
                    std::max(weight(r, b0), weight(r + 1, b1)) >= settings.weight_min &&
                    std::max(weight(r, c0), weight(r + 1, c1)) >= settings.weight_min;
                int& slot = open[static_cast<std::size_t>(b) * m + c];
                if (!(close && populated)) {
                    slot = -1;
                    continue;
                }
                if (slot >= 0) {
                    out[slot].alpha_hi = table[r + 1].alpha;
                } else {
                    slot = static_cast<int>(out.size());
                    out.push_back({table[r].alpha, table[r + 1].alpha, std::min(b0, c0), std::max(b0, c0)});
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ModeCrossing& x, const ModeCrossing& y) {
        if (x.alpha_lo != y.alpha_lo) return x.alpha_lo < y.alpha_lo;
        if (x.mode_a != y.mode_a) return x.mode_a < y.mode_a;
        return x.mode_b < y.mode_b;
    });
    return out;
}

void half_shares(const ModeSpectrum& spectrum, const CrystalState& equilibrium, Eigen::VectorXd& left,
                 Eigen::VectorXd& right) {
    const Eigen::MatrixXd amp = ion_amplitudes(spectrum);
    left = Eigen::VectorXd::Zero(spectrum.size());
    right = Eigen::VectorXd::Zero(spectrum.size());
    for (int i = 0; i < equilibrium.n_ions(); ++i) {
        const double z = equilibrium.z(i);
        if (std::abs(z) < 1e-9) {
            left += 0.5 * amp.row(i).transpose();
            right += 0.5 * amp.row(i).transpose();
        } else if (z < 0.0) {
            left += amp.row(i).transpose();
        } else {
            right += amp.row(i).transpose();
        }
    }
}

std::vector<ResonanceHit> find_third_order_resonances(const ModeSpectrum& spectrum,
                                                      const CrystalState& equilibrium, int excited_mode,
                                                      double detuning_max, double weight_min) {
    const int m = spectrum.size();
    if (excited_mode < 0 || excited_mode >= m) throw InvalidArgumentError("excited mode out of range");
    if (equilibrium.n_ions() * 2 != m) throw InconsistencyError("spectrum and equilibrium sizes differ");
    Eigen::VectorXd left, right;
    half_shares(spectrum, equilibrium, left, right);
    const Eigen::VectorXd& w = spectrum.frequencies;
    const double target = w[excited_mode];
    std::vector<ResonanceHit> hits;
    for (int a = 0; a < m; ++a) {
        if (a == excited_mode) continue;
        for (int b = a; b < m; ++b) {
            if (b == excited_mode) continue;
            if (w[a] + w[b] > target + detuning_max) break;
            const double detuning = std::abs(target - w[a] - w[b]);
            if (detuning > detuning_max) continue;
            const double weight = 2.0 * (left[a] * right[a] + left[b] * right[b]);
            if (weight < weight_min) continue;
            hits.push_back({excited_mode, a, b, detuning, weight});
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const ResonanceHit& x, const ResonanceHit& y) {
        if (x.detuning != y.detuning) return x.detuning < y.detuning;
        if (x.mode_a != y.mode_a) return x.mode_a < y.mode_a;
        return x.mode_b < y.mode_b;
    });
    return hits;
}

Eigen::VectorXd mode_energy_shares(const ModeSpectrum& spectrum, const Eigen::VectorXd& displacement) {
    const Eigen::VectorXd c = spectrum.eigenvectors.transpose() * displacement;
    Eigen::VectorXd e = (c.array() * spectrum.frequencies.array()).square().matrix();
    const double total = e.sum();
    if (total > 0.0) e /= total;
    return e;
}

}  // namespace ionkink
