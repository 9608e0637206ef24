#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cika/scm.hpp"

namespace cika {

/// Intervention-based estimates of how each concept coordinate moves the
/// outcome coordinate: a contemporaneous do(1)-vs-do(0) contrast per concept
/// and mean shifts of the outcome ℓ steps after a one-shot clamp.
struct SvarEstimate {
    /// Names of the non-outcome coordinates, in coordinate order.
    std::vector<std::string> concepts;
    std::vector<double> contemporaneous_row;
    std::vector<double> contemporaneous_se;
    /// concept × horizon, horizon ℓ = 1..columns.
    Eigen::MatrixXd lagged_effects;
    Eigen::MatrixXd lagged_se;
    int m_trials = 0;
};

/// Contemporaneous contrast per concept from m_trials paired one-step
/// simulations. The two arms draw independent noise, so the standard errors
/// carry real sampling uncertainty and shrink like m^{-1/2}.
SvarEstimate estimate_contemporaneous(const LinearSvarScm& scm, int m_trials,
                                      std::uint64_t seed);

/// Mean outcome shift at horizons 1..max_horizon after clamping each concept
/// to 1 at the first step, against the unclamped trajectory under the same
/// noise stream. Coupling the streams cancels all post-shock noise.
SvarEstimate estimate_lagged(const LinearSvarScm& scm, int max_horizon, int m_trials,
                             std::uint64_t seed);

/// Chain orientation from single-node interventions on the first n-1
/// concepts in name order. Each clamp's downstream set (coordinates whose
/// shift clears max(3·SE, 1e-9)) is nested inside the sets of upstream
/// clamps; the nesting fixes the order and the unintervened concept's slot.
struct ChainIdentification {
    /// Oriented concept-to-concept edges plus the final edge into the
    /// outcome. Empty when ambiguous.
    std::vector<std::pair<std::string, std::string>> edges;
    int interventions_used = 0;
    bool ambiguous = false;
    /// Which consistency check failed, for ambiguous results.
    std::string note;
};

ChainIdentification identify_chain(const LinearSvarScm& scm, int m_trials,
                                   std::uint64_t seed);

/// Contemporaneous chain fixture chain[0] -> chain[1] -> ... -> outcome with
/// one shared edge coefficient. Coordinates are laid out in sorted name
/// order with the outcome last, so the causal order and the coordinate
/// order need not match.
LinearSvarScm make_chain_scm(const std::vector<std::string>& chain_order,
                             const std::string& outcome_name, double coefficient,
                             double noise_var);

} // namespace cika
