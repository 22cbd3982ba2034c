#include "ionkink/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace ionkink {

std::string_view to_string(Branch branch) { return branch == Branch::Plus ? "plus" : "minus"; }

Branch branch_from_string(std::string_view text) {
    if (text == "plus") return Branch::Plus;
    if (text == "minus") return Branch::Minus;
    throw InvalidArgumentError("unknown branch '" + std::string(text) + "' (expected plus or minus)");
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void cap_step(Eigen::VectorXd& p, double max_step) {
    const double m = inf_norm(p);
    if (m > max_step) p *= max_step / m;
}

// Energy and gradient at q, or nullopt if two ions were pushed onto each other.
bool try_evaluate(const Eigen::VectorXd& q, double alpha, double& f, Eigen::VectorXd& g) {
    try {
        f = energy_and_gradient(q, alpha, g);
        return std::isfinite(f);
    } catch (const DegenerateConfigurationError&) {
        return false;
    }
}

bool newton_step(const Eigen::VectorXd& q, const Eigen::VectorXd& g, double alpha, double max_step,
                 Eigen::VectorXd& q_new, double& f_new, Eigen::VectorXd& g_new) {
    Eigen::LLT<Eigen::MatrixXd> llt(hessian(q, alpha));
    if (llt.info() != Eigen::Success) return false;
    Eigen::VectorXd p = -llt.solve(g);
    cap_step(p, max_step);
    q_new = q + p;
    if (!try_evaluate(q_new, alpha, f_new, g_new)) return false;
    return g_new.norm() < g.norm();
}

void minimize(Eigen::VectorXd& q, double alpha, const RelaxationSettings& s) {
    const int n = static_cast<int>(q.size());
    Eigen::VectorXd g(n), g_new(n), q_new(n);
    double f = 0.0, f_new = 0.0;
    if (!try_evaluate(q, alpha, f, g)) throw DegenerateConfigurationError("relaxation start is degenerate");

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    const bool polish = s.step_control == StepControl::BfgsNewtonPolish;

    for (int it = 0; it < s.max_iterations; ++it) {
        const double gmax = inf_norm(g);
        if (gmax <= s.gradient_tolerance) return;

        if (polish && gmax < 1e-4 && newton_step(q, g, alpha, s.max_step, q_new, f_new, g_new)) {
            q.swap(q_new);
            g.swap(g_new);
            f = f_new;
            continue;
        }

        Eigen::VectorXd p = -hinv * g;
        if (p.dot(g) >= 0.0) {
            hinv.setIdentity();
            scaled = false;
            p = -g;
        }
        cap_step(p, s.max_step);
        const double slope = p.dot(g);

        bool accepted = false;
        double t = 1.0;
        for (int k = 0; k < 40; ++k, t *= 0.5) {
            q_new = q + t * p;
            double df = 0.0;
            try {
                df = energy_difference(q, t * p, alpha);
            } catch (const DegenerateConfigurationError&) {
                continue;
            }
            if (df <= 1e-4 * t * slope && try_evaluate(q_new, alpha, f_new, g_new)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Energy decrease not detectable at all; settle for a smaller gradient.
            t = 1.0;
            for (int k = 0; k < 40; ++k, t *= 0.5) {
                q_new = q + t * p;
                if (!try_evaluate(q_new, alpha, f_new, g_new)) continue;
                if (g_new.norm() < g.norm()) {
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) {
            if (hinv.isIdentity()) break;
            hinv.setIdentity();
            scaled = false;
            continue;
        }

        const Eigen::VectorXd sv = q_new - q;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = sv.dot(yv);
        if (sy > 1e-16 * sv.norm() * yv.norm() && sy > 0.0) {
            if (!scaled) {
                hinv = Eigen::MatrixXd::Identity(n, n) * (sy / yv.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = hinv * yv;
            const double yhy = yv.dot(hy);
            hinv += ((sy + yhy) * rho * rho) * (sv * sv.transpose()) -
                    rho * (hy * sv.transpose() + sv * hy.transpose());
        }
        q.swap(q_new);
        g.swap(g_new);
        f = f_new;
    }
    if (inf_norm(g) <= s.gradient_tolerance) return;
    std::ostringstream msg;
    msg << "relaxation did not converge: |grad|_inf = " << inf_norm(g) << " after "
        << s.max_iterations << " iterations";
    throw ConvergenceError(msg.str(), inf_norm(g));
}

// Lowest Hessian eigenvalue and its eigenvector.
std::pair<double, Eigen::VectorXd> softest_direction(const Eigen::VectorXd& q, double alpha) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(q, alpha));
    return {es.eigenvalues()[0], es.eigenvectors().col(0)};
}

}  // namespace

CrystalState relax(const CrystalState& initial, const TrapConfig& cfg, const RelaxationSettings& settings) {
    if (!(settings.gradient_tolerance > 0.0)) throw InvalidArgumentError("gradient tolerance must be positive");
    if (settings.max_iterations <= 0) throw InvalidArgumentError("max_iterations must be positive");
    validate(initial);
    Eigen::VectorXd q = initial.positions;
    std::mt19937_64 rng(settings.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double lowest = 0.0;
    double kick = settings.noise_scale;
    for (int attempt = 0; attempt <= settings.saddle_attempts; ++attempt) {
        minimize(q, cfg.alpha(), settings);
        const auto [value, direction] = softest_direction(q, cfg.alpha());
        lowest = value;
        if (lowest >= settings.saddle_floor) {
            CrystalState out(q);
            return out;
        }
        // step off along the unstable direction, harder each time a shallow saddle pulls the minimizer back
        const double sign = normal(rng) < 0.0 ? -1.0 : 1.0;
        for (int k = 0; k < q.size(); ++k) q[k] += kick * (sign * direction[k] + 0.1 * normal(rng));
        kick *= 10.0;
    }
    std::ostringstream msg;
    msg << "relaxation ends on a saddle (lowest Hessian eigenvalue " << lowest << ")";
    throw SaddleError(msg.str());
}

CrystalState linear_chain_guess(const TrapConfig& cfg) {
    const int n = cfg.n_ions();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(2 * n);
    if (n == 1) return CrystalState(q);
    const double half_length = std::max(std::cbrt(1.5 * n * std::log(static_cast<double>(n))), 0.63);
    for (int i = 0; i < n; ++i) {
        q[2 * i] = (i % 2 == 0 ? 1e-3 : -1e-3);
        q[2 * i + 1] = -half_length + 2.0 * half_length * i / (n - 1);
    }
    return CrystalState(q);
}

CrystalState prepare_zigzag(const TrapConfig& cfg, const RelaxationSettings& settings) {
    return relax(linear_chain_guess(cfg), cfg, settings);
}

CrystalState mirror_x(const CrystalState& state) {
    CrystalState out = state;
    for (int i = 0; i < out.n_ions(); ++i) {
        out.x(i) = -out.x(i);
        if (out.velocities) (*out.velocities)[2 * i] = -(*out.velocities)[2 * i];
    }
    return out;
}

CrystalState mirror_z(const CrystalState& state) {
    CrystalState out = state;
    for (int i = 0; i < out.n_ions(); ++i) {
        out.z(i) = -out.z(i);
        if (out.velocities) (*out.velocities)[2 * i + 1] = -(*out.velocities)[2 * i + 1];
    }
    return out;
}

std::vector<int> zigzag_ions(const CrystalState& state, double fraction) {
    const auto order = ions_by_z(state);
    double xmax = 0.0;
    for (int i : order) xmax = std::max(xmax, std::abs(state.x(i)));
    std::vector<int> out;
    if (xmax <= 1e-6) return out;
    for (int k = 0; k < static_cast<int>(order.size()); ++k)
        if (std::abs(state.x(order[k])) > fraction * xmax) out.push_back(k);
    return out;
}

bool has_kink(const CrystalState& state, double fraction) {
    const auto zz = zigzag_ions(state, fraction);
    if (zz.size() < 2) return false;
    const auto order = ions_by_z(state);
    auto parity = [&](int k) {
        const bool positive = state.x(order[k]) > 0.0;
        return positive == (k % 2 == 0);
    };
    return parity(zz.front()) != parity(zz.back());
}

double kink_position(const CrystalState& state) {
    const auto order = ions_by_z(state);
    const int n = static_cast<int>(order.size());
    double num = 0.0, den = 0.0;
    for (int k = 1; k + 1 < n; ++k) {
        const double w = std::abs(state.x(order[k - 1]) + 2.0 * state.x(order[k]) + state.x(order[k + 1]));
        const double w4 = (w * w) * (w * w);
        num += w4 * state.z(order[k]);
        den += w4;
    }
    return den > 0.0 ? num / den : 0.0;
}

double mirror_asymmetry(const CrystalState& state) {
    const auto order = ions_by_z(state);
    const int n = static_cast<int>(order.size());
    double dz_mirror = 0.0, d_inversion = 0.0;
    for (int k = 0; k < n; ++k) {
        const int a = order[k];
        const int b = order[n - 1 - k];
        const double dz = state.z(a) + state.z(b);
        const double dx_m = state.x(a) - state.x(b);
        const double dx_i = state.x(a) + state.x(b);
        dz_mirror += dx_m * dx_m + dz * dz;
        d_inversion += dx_i * dx_i + dz * dz;
    }
    return std::sqrt(std::min(dz_mirror, d_inversion) / n);
}

CrystalState canonicalize(const CrystalState& state, Branch branch) {
    CrystalState out = state;
    const double kp = kink_position(out);
    const bool want_positive = branch == Branch::Plus;
    if (std::abs(kp) > 1e-6 && (kp > 0.0) != want_positive) out = mirror_z(out);
    const auto zz = zigzag_ions(out);
    if (!zz.empty()) {
        const auto order = ions_by_z(out);
        if (out.x(order[zz.front()]) < 0.0) out = mirror_x(out);
    }
    return out;
}

CrystalState continue_branch(const CrystalState& previous, double from_alpha, const TrapConfig& cfg,
                             const RelaxationSettings& settings, double max_step) {
    const double delta = cfg.alpha() - from_alpha;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(delta) / max_step - 1e-9)));
    CrystalState state = previous;
    for (int k = 1; k <= steps; ++k) {
        const double a = k == steps ? cfg.alpha() : from_alpha + delta * k / steps;
        state = relax(state, cfg.with_alpha(a), settings);
    }
    return state;
}

CrystalState prepare_kink(const TrapConfig& cfg, const RelaxationSettings& settings,
                          const KinkPreparation& prep) {
    if (cfg.alpha() < kMinKinkAlpha - 1e-12) {
        std::ostringstream msg;
        msg << "alpha = " << cfg.alpha() << " is below " << kMinKinkAlpha
            << " where the two-row crystal is not guaranteed";
        throw RangeError(msg.str());
    }
    const TrapConfig seed_cfg = cfg.with_alpha(prep.seed_alpha);
    CrystalState state = prepare_zigzag(seed_cfg, settings);
    for (int i = 0; i < state.n_ions(); ++i)
        if (state.z(i) > 0.0) state.x(i) = -state.x(i);
    state = relax(state, seed_cfg, settings);
    if (!has_kink(state)) throw KinkLostError("kink annihilated at the seed alpha", prep.seed_alpha);

    const double delta = cfg.alpha() - prep.seed_alpha;
    const int steps = static_cast<int>(std::ceil(std::abs(delta) / prep.continuation_step - 1e-9));
    for (int k = 1; k <= steps; ++k) {
        const double a = k == steps ? cfg.alpha() : prep.seed_alpha + delta * k / steps;
        state = relax(state, cfg.with_alpha(a), settings);
        if (!has_kink(state)) {
            std::ostringstream msg;
            msg << "kink annihilated at alpha = " << a;
            throw KinkLostError(msg.str(), a);
        }
    }
    return canonicalize(state, prep.branch);
}

PhaseReport classify_phase(const CrystalState& state, const TrapConfig& cfg,
                           const ClassificationSettings& settings) {
    const double gmax = max_abs_gradient(state, cfg.alpha());
    if (gmax > 100.0 * settings.gradient_tolerance) {
        std::ostringstream msg;
        msg << "state is not relaxed: |grad|_inf = " << gmax;
        throw StaleStateError(msg.str());
    }
    PhaseReport report;
    report.asymmetry = mirror_asymmetry(state);
    report.kink_position = kink_position(state);
    if (!has_kink(state, settings.zigzag_fraction)) {
        report.phase = Phase::NoKink;
        return report;
    }

    const auto order = ions_by_z(state);
    const auto zz = zigzag_ions(state, settings.zigzag_fraction);
    double mean_amp = 0.0;
    for (int k : zz) mean_amp += std::abs(state.x(order[k]));
    mean_amp /= static_cast<double>(zz.size());
    const int n = static_cast<int>(order.size());
    for (int k = 1; k + 1 < n; ++k) {
        const double xl = state.x(order[k - 1]);
        const double xr = state.x(order[k + 1]);
        const bool neighbours_zigzag =
            std::abs(xl) > 0.5 * mean_amp && std::abs(xr) > 0.5 * mean_amp && xl * xr < 0.0;
        if (neighbours_zigzag && std::abs(state.x(order[k])) < settings.odd_threshold * mean_amp) {
            report.central_ion_present = true;
            report.kink_position = state.z(order[k]);
            break;
        }
    }
    if (report.central_ion_present)
        report.phase = Phase::OddKink;
    else
        report.phase = report.asymmetry < settings.sliding_threshold ? Phase::Sliding : Phase::Pinned;
    return report;
}

CriticalResult find_critical_alpha(const TrapConfig& cfg_template, const CrystalState& state_at_lo,
                                   const PhasePredicate& predicate, double alpha_lo, double alpha_hi,
                                   double tol, const RelaxationSettings& settings,
                                   double continuation_step) {
    if (!(alpha_hi > alpha_lo)) throw BracketError("bracket must satisfy alpha_lo < alpha_hi");
    if (!(tol > 0.0)) throw InvalidArgumentError("bisection tolerance must be positive");
    CriticalResult r;
    r.alpha_lo = alpha_lo;
    r.alpha_hi = alpha_hi;
    r.state_lo = relax(state_at_lo, cfg_template.with_alpha(alpha_lo), settings);
    if (predicate(r.state_lo, cfg_template.with_alpha(alpha_lo)))
        throw BracketError("transition predicate already holds at the lower bracket end");
    r.state_hi = continue_branch(r.state_lo, alpha_lo, cfg_template.with_alpha(alpha_hi), settings,
                                 continuation_step);
    r.probes = 2;
    if (!predicate(r.state_hi, cfg_template.with_alpha(alpha_hi)))
        throw BracketError("transition predicate does not hold at the upper bracket end");
    while (r.alpha_hi - r.alpha_lo >= tol) {
        const double mid = 0.5 * (r.alpha_lo + r.alpha_hi);
        const TrapConfig cfg = cfg_template.with_alpha(mid);
        CrystalState probe = continue_branch(r.state_lo, r.alpha_lo, cfg, settings, continuation_step);
        ++r.probes;
        if (predicate(probe, cfg)) {
            r.alpha_hi = mid;
            r.state_hi = std::move(probe);
        } else {
            r.alpha_lo = mid;
            r.state_lo = std::move(probe);
        }
    }
    r.alpha = 0.5 * (r.alpha_lo + r.alpha_hi);
    return r;
}

std::string_view to_string(Transition t) {
    switch (t) {
        case Transition::Zigzag: return "zigzag";
        case Transition::SlidingPinned: return "sliding-pinned";
        case Transition::PinnedOdd: return "pinned-odd";
        case Transition::KinkLoss: return "kink";
    }
    return "zigzag";
}

Transition transition_from_string(std::string_view text) {
    for (Transition t : {Transition::Zigzag, Transition::SlidingPinned, Transition::PinnedOdd,
                         Transition::KinkLoss})
        if (to_string(t) == text) return t;
    throw InvalidArgumentError("unknown transition '" + std::string(text) +
                               "' (expected zigzag, sliding-pinned, pinned-odd or kink)");
}

TransitionSearch default_bracket(Transition t) {
    switch (t) {
        case Transition::Zigzag: return {11.0, 13.0};
        case Transition::SlidingPinned: return {6.0, 7.0};
        case Transition::PinnedOdd: return {7.0, 8.6};
        case Transition::KinkLoss: return {8.8, 9.6};
    }
    return {11.0, 13.0};
}

CriticalResult find_transition(Transition t, const TrapConfig& cfg_template, double tol,
                               const RelaxationSettings& settings,
                               const ClassificationSettings& classification,
                               std::optional<TransitionSearch> bracket) {
    const TransitionSearch b = bracket.value_or(default_bracket(t));
    const TrapConfig lo_cfg = cfg_template.with_alpha(b.alpha_lo);
    switch (t) {
        case Transition::Zigzag: {
            auto linear = [](const CrystalState& s, const TrapConfig&) {
                return s.positions(Eigen::seq(0, Eigen::last, 2)).cwiseAbs().maxCoeff() < 1e-5;
            };
            return find_critical_alpha(cfg_template, prepare_zigzag(lo_cfg, settings), linear, b.alpha_lo,
                                       b.alpha_hi, tol, settings);
        }
        case Transition::SlidingPinned: {
            auto pinned = [&](const CrystalState& s, const TrapConfig&) {
                return mirror_asymmetry(s) >= classification.sliding_threshold;
            };
            return find_critical_alpha(cfg_template, prepare_kink(lo_cfg, settings), pinned, b.alpha_lo,
                                       b.alpha_hi, tol, settings);
        }
        case Transition::PinnedOdd: {
            auto odd = [&](const CrystalState& s, const TrapConfig& c) {
                return classify_phase(s, c, classification).central_ion_present;
            };
            return find_critical_alpha(cfg_template, prepare_kink(lo_cfg, settings), odd, b.alpha_lo,
                                       b.alpha_hi, tol, settings);
        }
        case Transition::KinkLoss: {
            auto lost = [&](const CrystalState& s, const TrapConfig&) {
                return !has_kink(s, classification.zigzag_fraction);
            };
            return find_critical_alpha(cfg_template, prepare_kink(lo_cfg, settings), lost, b.alpha_lo,
                                       b.alpha_hi, tol, settings);
        }
    }
    throw InvalidArgumentError("unknown transition");
}

}  // namespace ionkink
