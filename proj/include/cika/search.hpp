#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cika/icp.hpp"
#include "cika/simulator.hpp"

namespace cika {

struct UcbParams {
    double beta = 1.0;
    double gamma = 0.5;
    void validate() const;
};

struct NodeStats {
    double q = 0.0;
    double n_state = 0.0;
    double n_action = 0.0;
};

/// Q(s,a) + beta·sqrt(ln N(s) / N(s,a)) + gamma·ê. Unvisited actions are
/// handled by the selection rule, never by this formula.
double ucb_score(const NodeStats& stats, const UcbParams& params, double e_hat);

/// Binary verification plus a causal shaping term, lambda·ê of the action.
double shaped_reward(bool correct, double e_hat_of_action, double lambda);

struct BanditArm {
    std::string name;
    double mean = 0.0;
    /// Effect estimate supplied to the policy; the reward stream never sees it.
    double e_hat = 0.0;
};

struct BanditInstance {
    std::vector<BanditArm> arms;
    double best_mean() const;
    void validate() const;
};

enum class BanditPolicy { Ucb1, MathCausalUcb };

struct RegretStep {
    int step = 0;
    int arm = 0;
    double reward = 0.0;
    double instantaneous_regret = 0.0;
    double cumulative_regret = 0.0;
};

struct RegretTrace {
    std::vector<RegretStep> steps;
    double final_regret = 0.0;
    std::vector<int> pulls;
};

/// Pulls each arm once in index order, then follows the policy score with
/// lowest-index tie-break. Rewards are Bernoulli draws keyed by
/// (seed, arm, pull-count), so two policies on one seed face identical
/// reward tables and compare pairwise.
RegretTrace run_bandit(const BanditInstance& instance, BanditPolicy policy,
                       const UcbParams& params, int horizon, std::uint64_t seed);

/// Means (0.9, 0.1) with oracle effects (0.8, 0) against a 0.1 baseline.
BanditInstance two_arm_benchmark();

/// Means 0.9 down to 0.1, effects mean - 0.1.
BanditInstance ten_arm_benchmark();

struct MctsTraceRow {
    int iteration = 0;
    /// Concepts activated at the rollout node, in activation order, with
    /// "STOP" appended when the rollout came from stopping there.
    std::vector<std::string> path;
    double reward = 0.0;
    bool correct = false;
};

struct MctsResult {
    bool solved = false;
    std::optional<TrialOutcome> trial;
    /// Activated set behind the returned trial.
    std::vector<std::string> activated;
    int iterations = 0;
    std::vector<MctsTraceRow> trace;
};

/// Monte Carlo tree search over activation subsets of the graph's selected
/// concepts. Each iteration expands or stops, runs one trial at the chosen
/// node's set, and backs the reward up the path; a correct trial ends the
/// search. With no selectable concepts the result is an immediate no-op.
/// lambda switches the backed-up reward to shaped_reward.
MctsResult run_mcts(Simulator& sim, const SimProblem& problem, const CausalGraph& graph,
                    int budget, const UcbParams& params, std::uint64_t seed,
                    double lambda = 0.0);

/// Final bandit regret as a function of the fidelity corruption applied to
/// the simulator the effect estimates come from. Rewards and seeds are
/// shared across the delta grid; only the estimates degrade.
struct DeltaRegretStudy {
    std::vector<double> deltas;
    std::vector<double> mean_final_regret;
    int horizon = 0;
    int seeds = 0;
};

DeltaRegretStudy run_delta_regret_experiment(const std::vector<double>& deltas,
                                             int horizon, int seeds, int m_trials,
                                             const UcbParams& params,
                                             std::uint64_t seed);

} // namespace cika
