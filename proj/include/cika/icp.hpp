#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cika/scm.hpp"
#include "cika/simulator.hpp"

namespace cika {

/// Pre-intervention correctness rate from n_obs plain attempts.
struct BaselineStats {
    double p_bar_obs = 0.0;
    int n_obs = 0;
};

/// One concept's intervened-minus-baseline effect with its standard error.
struct IcpEstimate {
    std::string concept_name;
    /// Exactly p_hat_int - baseline.p_bar_obs.
    double e_hat = 0.0;
    /// Unpooled difference-of-proportions SE:
    /// sqrt(p̂(1-p̂)/M + p̄(1-p̄)/n_obs). Zero when both cells are degenerate.
    double sigma_hat = 0.0;
    int m_trials = 0;
    double p_hat_int = 0.0;
    BaselineStats baseline;
};

struct GraphConfig {
    double alpha = 0.05;
    /// Two-sided critical value, inverse-normal(1 - alpha/2).
    double z_crit = 1.959963984540054;
    /// When both cells are degenerate (sigma_hat = 0), re-test with 0.5
    /// pseudo-successes and pseudo-failures added to each cell. With the
    /// correction off, a degenerate estimate is significant iff |e_hat| > 0.
    bool pseudo_count_correction = true;

    static GraphConfig from_alpha(double alpha, bool pseudo_count_correction = true);
    /// Rejects alpha outside (0,1) and a z_crit more than 1e-6 from the
    /// quantile alpha implies.
    void validate() const;
};

struct CausalEdge {
    std::string concept_name;
    double e_hat = 0.0;
    double sigma_hat = 0.0;
    bool significant = false;
    int sign = 0;
};

struct CausalGraph {
    std::vector<CausalEdge> edges;
    GraphConfig config;
};

enum class IcpState { ActivatableKnowledge, AbsentOrIrrelevant, Misapplication };
std::string to_string(IcpState state);

BaselineStats estimate_baseline(Simulator& sim, const SimProblem& problem, int n_obs,
                                std::uint64_t seed);

IcpEstimate estimate_icp(Simulator& sim, const SimProblem& problem,
                         const std::string& concept_name, int m_trials,
                         const BaselineStats& baseline, std::uint64_t seed);

/// Two-sided significance of a single estimate under the config's test,
/// including the degenerate-cell handling described on GraphConfig.
bool estimate_significant(const IcpEstimate& estimate, const GraphConfig& config);

/// Edges in input order, each flagged by the two-sided test.
CausalGraph build_causal_graph(const std::vector<IcpEstimate>& estimates,
                               const GraphConfig& config);

/// One-sided positive selection: concepts whose effect exceeds z·σ̂, ordered
/// by e_hat descending, ties by name. Input permutation does not matter.
std::vector<std::string> select_activation_set(const CausalGraph& graph);

IcpState classify_icp_state(const IcpEstimate& estimate, const GraphConfig& config);

/// Observational-vs-interventional estimate comparison on one concept of a
/// bound SCM. The observational arm conditions on the concept's mastery in
/// n_obs plain samples; the interventional arm contrasts do(m=1) and do(m=0)
/// trial means. Both are compared against the enumerated do-contrast.
struct ConfoundingReport {
    /// E[p | m=1] - E[p | m=0]; empty when a conditioning cell is empty.
    std::optional<double> beta_obs;
    std::optional<double> se_beta_obs;
    double e_icp = 0.0;
    double se_icp = 0.0;
    /// Enumerated P(p=1 | do(m=1)) - P(p=1 | do(m=0)).
    double e_true = 0.0;
    std::optional<double> bias_obs;
    double bias_icp = 0.0;
    int n_m1 = 0;
    int n_m0 = 0;
};

ConfoundingReport confounding_bias_experiment(const DiscreteStudentScm& scm,
                                              const std::string& concept_name, int n_obs,
                                              int m_trials, std::uint64_t seed);

/// Two-sided Hoeffding bound 2·exp(-2Mε²) on |ê - E ê| exceeding ε.
double hoeffding_tail(int m_trials, double epsilon);

/// Trials needed to screen K concepts at accuracy ε with failure budget δ:
/// ceil((2/ε²)·ln(2K/δ)).
long long required_samples(int k_concepts, double epsilon, double delta);

/// Monte Carlo replication study of RMSE(ê) against trial count. The
/// baseline is the enumerated marginal, so the error is pure interventional
/// sampling noise and the log-log slope sits at -1/2.
struct ConvergencePoint {
    int m = 0;
    double rmse = 0.0;
};

struct ConvergenceStudy {
    double e_star = 0.0;
    std::vector<ConvergencePoint> points;
    double slope_loglog = 0.0;
};

ConvergenceStudy run_convergence_study(Simulator& sim, const SimProblem& problem,
                                       const std::string& concept_name,
                                       const std::vector<int>& m_grid, int replications,
                                       std::uint64_t seed);

/// Bias/variance split of ê under fidelity corruption. For each delta the
/// inner simulator is wrapped with that corruption level; the bias plateau
/// |mean ê - e*| at the largest m approaches delta·|p_int - p_obs| while the
/// spread about the mean decays like m^{-1/2}.
struct DecompositionCell {
    double delta = 0.0;
    int m = 0;
    double mean_e_hat = 0.0;
    double sd_e_hat = 0.0;
    double abs_bias = 0.0;
};

struct DecompositionStudy {
    /// Enumerated p_int - p_obs, the clean-simulator limit of ê.
    double e_star = 0.0;
    std::vector<double> deltas;
    /// delta·|p_int - p_obs| per delta.
    std::vector<double> plateau_predicted;
    /// |mean ê - e*| at the largest m per delta.
    std::vector<double> plateau_measured;
    std::vector<DecompositionCell> cells;
};

DecompositionStudy run_delta_decomposition(std::shared_ptr<Simulator> inner,
                                           const SimProblem& problem,
                                           const std::string& concept_name,
                                           const std::vector<double>& deltas,
                                           const std::vector<int>& m_grid,
                                           int replications, std::uint64_t seed);

} // namespace cika
