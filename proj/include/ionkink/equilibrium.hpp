#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

#include "ionkink/potential.hpp"

namespace ionkink {

enum class StepControl { BfgsNewtonPolish, Bfgs };

struct RelaxationSettings {
    double gradient_tolerance = 1e-10;
    int max_iterations = 200000;
    StepControl step_control = StepControl::BfgsNewtonPolish;
    std::uint64_t seed = 0;
    int saddle_attempts = 5;
    double saddle_floor = -1e-8;  ///< minimum accepted Hessian eigenvalue
    double noise_scale = 1e-6;  ///< first saddle-escape step, ten times larger on each retry
    double max_step = 0.05;  ///< largest displacement of any coordinate per iteration
};

/// Which of the two symmetry-broken minima to keep once the kink is pinned.
enum class Branch { Plus, Minus };

std::string_view to_string(Branch branch);
Branch branch_from_string(std::string_view text);

struct KinkPreparation {
    double seed_alpha = 6.0;         ///< alpha at which the mirrored half is relaxed
    double continuation_step = 0.02;
    Branch branch = Branch::Plus;
};

/// Lowest aspect ratio admitted for kink states; below it a three-layer crystal competes.
inline constexpr double kMinKinkAlpha = 5.5;

struct ClassificationSettings {
    double gradient_tolerance = 1e-10;
    double sliding_threshold = 1e-4;  ///< asymmetry below which the kink counts as sliding
    double odd_threshold = 0.25;      ///< on-axis ion: |x| below this fraction of the zigzag amplitude
    double zigzag_fraction = 0.1;     ///< ions with |x| above this fraction of max |x| form the zigzag
};

struct PhaseReport {
    Phase phase = Phase::Unclassified;
    double asymmetry = 0.0;
    bool central_ion_present = false;
    double kink_position = 0.0;
};

/// Local minimisation of the potential with saddle escape. Throws ConvergenceError or SaddleError.
CrystalState relax(const CrystalState& initial, const TrapConfig& cfg,
                   const RelaxationSettings& settings = {});

/// Ions on the trap axis at uniform-density spacing with an alternating 1e-3 transverse offset.
CrystalState linear_chain_guess(const TrapConfig& cfg);

/// Zigzag state obtained by relaxing the linear chain guess.
CrystalState prepare_zigzag(const TrapConfig& cfg, const RelaxationSettings& settings = {});

/// Kink state at cfg.alpha(): mirrored-half preparation at the seed alpha, then continuation.
/// Throws KinkLostError once the kink annihilates, RangeError below kMinKinkAlpha.
CrystalState prepare_kink(const TrapConfig& cfg, const RelaxationSettings& settings = {},
                          const KinkPreparation& prep = {});

/// Relax `previous` at cfg.alpha() in steps of at most `max_step` starting from `from_alpha`.
/// No kink bookkeeping; the caller inspects the result.
CrystalState continue_branch(const CrystalState& previous, double from_alpha, const TrapConfig& cfg,
                             const RelaxationSettings& settings = {}, double max_step = 0.02);

/// Mirror so the first zigzag ion has x > 0 and the kink sits on the requested side.
CrystalState canonicalize(const CrystalState& state, Branch branch);

CrystalState mirror_x(const CrystalState& state);
CrystalState mirror_z(const CrystalState& state);

/// Ions (z-ordered) whose transverse amplitude exceeds `fraction` of the largest one.
std::vector<int> zigzag_ions(const CrystalState& state, double fraction = 0.1);
bool has_kink(const CrystalState& state, double fraction = 0.1);
/// Weighted centre of the alternation defect, in units of l0.
double kink_position(const CrystalState& state);
/// RMS mismatch to the best of the z-mirror and point-inversion images, ions matched by z rank.
double mirror_asymmetry(const CrystalState& state);

PhaseReport classify_phase(const CrystalState& state, const TrapConfig& cfg,
                           const ClassificationSettings& settings = {});

/// True on the high-alpha side of the transition.
using PhasePredicate = std::function<bool(const CrystalState&, const TrapConfig&)>;

struct CriticalResult {
    double alpha = 0.0;
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    CrystalState state_lo;
    CrystalState state_hi;
    int probes = 0;
};

/// Bisection for the alpha at which `predicate` changes from false (at lo) to true (at hi).
/// Probes continue the equilibrium from the current low endpoint. Throws BracketError.
CriticalResult find_critical_alpha(const TrapConfig& cfg_template, const CrystalState& state_at_lo,
                                   const PhasePredicate& predicate, double alpha_lo, double alpha_hi,
                                   double tol = 1e-3, const RelaxationSettings& settings = {},
                                   double continuation_step = 0.02);

enum class Transition { Zigzag, SlidingPinned, PinnedOdd, KinkLoss };

std::string_view to_string(Transition t);
Transition transition_from_string(std::string_view text);

struct TransitionSearch {
    double alpha_lo;
    double alpha_hi;
};

/// Default bracket for each named transition.
TransitionSearch default_bracket(Transition t);

/// Prepare the low-side state, build the predicate, and bisect.
CriticalResult find_transition(Transition t, const TrapConfig& cfg_template, double tol = 1e-3,
                               const RelaxationSettings& settings = {},
                               const ClassificationSettings& classification = {},
                               std::optional<TransitionSearch> bracket = std::nullopt);

}  // namespace ionkink
