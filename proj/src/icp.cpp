#include "cika/icp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cika/rng.hpp"
#include "cika/stats.hpp"

namespace cika {

namespace {

double proportion_se(double p_a, double n_a, double p_b, double n_b) {
    return std::sqrt(p_a * (1.0 - p_a) / n_a + p_b * (1.0 - p_b) / n_b);
}

/// The (effect, se) pair the significance test actually uses. Degenerate
/// estimates under the pseudo-count correction are re-centered with half a
/// success and half a failure added to both cells.
struct TestStatistic {
    double effect = 0.0;
    double se = 0.0;
};

TestStatistic resolve_test(const IcpEstimate& est, const GraphConfig& config) {
    if (est.sigma_hat > 0.0 || !config.pseudo_count_correction) {
        return {est.e_hat, est.sigma_hat};
    }
    double m = est.m_trials;
    double n = est.baseline.n_obs;
    double p_int = (est.p_hat_int * m + 0.5) / (m + 1.0);
    double p_obs = (est.baseline.p_bar_obs * n + 0.5) / (n + 1.0);
    return {p_int - p_obs, proportion_se(p_int, m + 1.0, p_obs, n + 1.0)};
}

bool exceeds(double effect, double se, double z_crit) {
    if (se > 0.0) return effect > z_crit * se;
    return effect > 0.0;
}

void check_estimate(const IcpEstimate& est) {
    if (est.m_trials < 1 || est.baseline.n_obs < 1) {
        throw std::invalid_argument("icp estimate: trial counts must be positive");
    }
    if (std::fabs(est.e_hat - (est.p_hat_int - est.baseline.p_bar_obs)) > 1e-12) {
        throw std::invalid_argument(
            "icp estimate: e_hat must equal p_hat_int - p_bar_obs");
    }
    if (est.sigma_hat < 0.0) {
        throw std::invalid_argument("icp estimate: negative sigma_hat");
    }
}

const DiscreteStudentScm& require_binding(const SimProblem& problem) {
    if (!problem.binding) {
        throw std::invalid_argument("study requires a synthetic problem binding");
    }
    return *problem.binding;
}

} // namespace

GraphConfig GraphConfig::from_alpha(double alpha, bool pseudo_count_correction) {
    GraphConfig c;
    c.alpha = alpha;
    c.z_crit = z_critical(alpha);
    c.pseudo_count_correction = pseudo_count_correction;
    c.validate();
    return c;
}

void GraphConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("GraphConfig: alpha must lie in (0,1)");
    }
    if (std::fabs(z_crit - z_critical(alpha)) > 1e-6) {
        throw std::invalid_argument("GraphConfig: z_crit inconsistent with alpha");
    }
}

std::string to_string(IcpState state) {
    switch (state) {
        case IcpState::ActivatableKnowledge: return "activatable_knowledge";
        case IcpState::AbsentOrIrrelevant: return "absent_or_irrelevant";
        case IcpState::Misapplication: return "misapplication";
    }
    return "unknown";
}

BaselineStats estimate_baseline(Simulator& sim, const SimProblem& problem, int n_obs,
                                std::uint64_t seed) {
    if (n_obs < 1) throw std::invalid_argument("estimate_baseline: n_obs must be >= 1");
    double correct = 0.0;
    for (int i = 0; i < n_obs; ++i) {
        TrialContext ctx{seed, static_cast<std::uint64_t>(i)};
        correct += sim.baseline_trial(problem, ctx).correct ? 1.0 : 0.0;
    }
    return {correct / n_obs, n_obs};
}

IcpEstimate estimate_icp(Simulator& sim, const SimProblem& problem,
                         const std::string& concept_name, int m_trials,
                         const BaselineStats& baseline, std::uint64_t seed) {
    if (m_trials < 1) throw std::invalid_argument("estimate_icp: m_trials must be >= 1");
    if (baseline.n_obs < 1) throw std::invalid_argument("estimate_icp: baseline is empty");
    const std::vector<std::string> concepts = {concept_name};
    double correct = 0.0;
    for (int i = 0; i < m_trials; ++i) {
        TrialContext ctx{seed, static_cast<std::uint64_t>(i)};
        correct += sim.do_trial(problem, concepts, ctx).correct ? 1.0 : 0.0;
    }
    IcpEstimate est;
    est.concept_name = concept_name;
    est.p_hat_int = correct / m_trials;
    est.m_trials = m_trials;
    est.baseline = baseline;
    est.e_hat = est.p_hat_int - baseline.p_bar_obs;
    est.sigma_hat = proportion_se(est.p_hat_int, m_trials, baseline.p_bar_obs,
                                  baseline.n_obs);
    return est;
}

bool estimate_significant(const IcpEstimate& estimate, const GraphConfig& config) {
    check_estimate(estimate);
    config.validate();
    auto t = resolve_test(estimate, config);
    return exceeds(std::fabs(t.effect), t.se, config.z_crit);
}

CausalGraph build_causal_graph(const std::vector<IcpEstimate>& estimates,
                               const GraphConfig& config) {
    if (estimates.empty()) {
        throw std::invalid_argument("build_causal_graph: no estimates");
    }
    config.validate();
    CausalGraph g;
    g.config = config;
    g.edges.reserve(estimates.size());
    for (const auto& est : estimates) {
        CausalEdge e;
        e.concept_name = est.concept_name;
        e.e_hat = est.e_hat;
        e.sigma_hat = est.sigma_hat;
        e.significant = estimate_significant(est, config);
        e.sign = est.e_hat > 0.0 ? 1 : est.e_hat < 0.0 ? -1 : 0;
        g.edges.push_back(std::move(e));
    }
    return g;
}

std::vector<std::string> select_activation_set(const CausalGraph& graph) {
    // Two-sided significance plus a positive effect is the one-sided
    // positive test at the same critical value.
    std::vector<const CausalEdge*> picked;
    for (const auto& e : graph.edges) {
        if (e.significant && e.sign > 0) picked.push_back(&e);
    }
    std::sort(picked.begin(), picked.end(), [](const CausalEdge* a, const CausalEdge* b) {
        if (a->e_hat != b->e_hat) return a->e_hat > b->e_hat;
        return a->concept_name < b->concept_name;
    });
    std::vector<std::string> out;
    out.reserve(picked.size());
    for (const auto* e : picked) out.push_back(e->concept_name);
    return out;
}

IcpState classify_icp_state(const IcpEstimate& estimate, const GraphConfig& config) {
    check_estimate(estimate);
    config.validate();
    auto t = resolve_test(estimate, config);
    if (exceeds(t.effect, t.se, config.z_crit)) return IcpState::ActivatableKnowledge;
    if (exceeds(-t.effect, t.se, config.z_crit)) return IcpState::Misapplication;
    return IcpState::AbsentOrIrrelevant;
}

ConfoundingReport confounding_bias_experiment(const DiscreteStudentScm& scm,
                                              const std::string& concept_name, int n_obs,
                                              int m_trials, std::uint64_t seed) {
    scm.validate();
    auto idx = scm.concept_index(concept_name);
    if (!idx) {
        throw std::invalid_argument("confounding_bias_experiment: unknown concept '" +
                                    concept_name + "'");
    }
    if (n_obs < 1 || m_trials < 1) {
        throw std::invalid_argument("confounding_bias_experiment: counts must be >= 1");
    }
    int j = *idx;

    ConfoundingReport r;
    r.e_true = true_effect(scm, j);

    auto obs = sample_observational(scm, n_obs, seed);
    double sum1 = 0.0;
    double sum0 = 0.0;
    for (const auto& s : obs) {
        if (s.masteries[static_cast<std::size_t>(j)]) {
            ++r.n_m1;
            sum1 += s.outcome;
        } else {
            ++r.n_m0;
            sum0 += s.outcome;
        }
    }
    if (r.n_m1 > 0 && r.n_m0 > 0) {
        double p1 = sum1 / r.n_m1;
        double p0 = sum0 / r.n_m0;
        r.beta_obs = p1 - p0;
        r.se_beta_obs = proportion_se(p1, r.n_m1, p0, r.n_m0);
        r.bias_obs = *r.beta_obs - r.e_true;
    }

    auto arm1 = sample_do(scm, {{j, 1}}, m_trials, mix64(seed ^ 0x1));
    auto arm0 = sample_do(scm, {{j, 0}}, m_trials, mix64(seed ^ 0x2));
    double p_do1 = 0.0;
    double p_do0 = 0.0;
    for (const auto& s : arm1) p_do1 += s.outcome;
    for (const auto& s : arm0) p_do0 += s.outcome;
    p_do1 /= m_trials;
    p_do0 /= m_trials;
    r.e_icp = p_do1 - p_do0;
    r.se_icp = proportion_se(p_do1, m_trials, p_do0, m_trials);
    r.bias_icp = r.e_icp - r.e_true;
    return r;
}

double hoeffding_tail(int m_trials, double epsilon) {
    if (m_trials < 1) throw std::invalid_argument("hoeffding_tail: m_trials must be >= 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("hoeffding_tail: epsilon must be > 0");
    return 2.0 * std::exp(-2.0 * m_trials * epsilon * epsilon);
}

long long required_samples(int k_concepts, double epsilon, double delta) {
    if (k_concepts < 1) {
        throw std::invalid_argument("required_samples: k_concepts must be >= 1");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::invalid_argument("required_samples: epsilon must lie in (0,1)");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("required_samples: delta must lie in (0,1)");
    }
    double raw = (2.0 / (epsilon * epsilon)) * std::log(2.0 * k_concepts / delta);
    return static_cast<long long>(std::ceil(raw));
}

ConvergenceStudy run_convergence_study(Simulator& sim, const SimProblem& problem,
                                       const std::string& concept_name,
                                       const std::vector<int>& m_grid, int replications,
                                       std::uint64_t seed) {
    const auto& scm = require_binding(problem);
    auto idx = scm.concept_index(concept_name);
    if (!idx) throw std::invalid_argument("run_convergence_study: unknown concept");
    if (m_grid.empty() || replications < 2) {
        throw std::invalid_argument("run_convergence_study: degenerate design");
    }
    double p_bar = observational_marginal(scm);
    double p_int = interventional_distribution(scm, *idx, 1);

    ConvergenceStudy study;
    study.e_star = p_int - p_bar;
    const std::vector<std::string> concepts = {concept_name};
    std::vector<double> log_m;
    std::vector<double> log_rmse;
    for (std::size_t k = 0; k < m_grid.size(); ++k) {
        int m = m_grid[k];
        if (m < 1) throw std::invalid_argument("run_convergence_study: m must be >= 1");
        double sq = 0.0;
        for (int r = 0; r < replications; ++r) {
            std::uint64_t rep_seed =
                mix64(mix64(seed ^ static_cast<std::uint64_t>(r + 1)) ^
                      static_cast<std::uint64_t>(k + 1));
            double correct = 0.0;
            for (int i = 0; i < m; ++i) {
                TrialContext ctx{rep_seed, static_cast<std::uint64_t>(i)};
                correct += sim.do_trial(problem, concepts, ctx).correct ? 1.0 : 0.0;
            }
            double e_hat = correct / m - p_bar;
            sq += (e_hat - study.e_star) * (e_hat - study.e_star);
        }
        double rmse = std::sqrt(sq / replications);
        study.points.push_back({m, rmse});
        log_m.push_back(std::log(static_cast<double>(m)));
        log_rmse.push_back(std::log(std::max(rmse, 1e-300)));
    }
    study.slope_loglog = least_squares_slope(log_m, log_rmse);
    return study;
}

DecompositionStudy run_delta_decomposition(std::shared_ptr<Simulator> inner,
                                           const SimProblem& problem,
                                           const std::string& concept_name,
                                           const std::vector<double>& deltas,
                                           const std::vector<int>& m_grid,
                                           int replications, std::uint64_t seed) {
    if (!inner) throw std::invalid_argument("run_delta_decomposition: null simulator");
    const auto& scm = require_binding(problem);
    auto idx = scm.concept_index(concept_name);
    if (!idx) throw std::invalid_argument("run_delta_decomposition: unknown concept");
    if (deltas.empty() || m_grid.empty() || replications < 2) {
        throw std::invalid_argument("run_delta_decomposition: degenerate design");
    }
    double p_bar = observational_marginal(scm);
    double p_int = interventional_distribution(scm, *idx, 1);

    DecompositionStudy study;
    study.e_star = p_int - p_bar;
    study.deltas = deltas;
    const std::vector<std::string> concepts = {concept_name};
    int m_max = *std::max_element(m_grid.begin(), m_grid.end());
    for (double delta : deltas) {
        auto sim = perturb(inner, SimulatorFidelity(delta));
        study.plateau_predicted.push_back(delta * std::fabs(p_int - p_bar));
        for (std::size_t k = 0; k < m_grid.size(); ++k) {
            int m = m_grid[k];
            double sum = 0.0;
            double sumsq = 0.0;
            for (int r = 0; r < replications; ++r) {
                // Same context grid for every delta: the corruption coins
                // couple across levels, so measured bias is monotone in
                // delta by construction rather than only in expectation.
                std::uint64_t rep_seed =
                    mix64(mix64(seed ^ static_cast<std::uint64_t>(r + 1)) ^
                          static_cast<std::uint64_t>(k + 101));
                double correct = 0.0;
                for (int i = 0; i < m; ++i) {
                    TrialContext ctx{rep_seed, static_cast<std::uint64_t>(i)};
                    correct += sim->do_trial(problem, concepts, ctx).correct ? 1.0 : 0.0;
                }
                double e_hat = correct / m - p_bar;
                sum += e_hat;
                sumsq += e_hat * e_hat;
            }
            DecompositionCell cell;
            cell.delta = delta;
            cell.m = m;
            cell.mean_e_hat = sum / replications;
            double var = std::max(0.0, sumsq / replications -
                                           cell.mean_e_hat * cell.mean_e_hat);
            cell.sd_e_hat = std::sqrt(var * replications / (replications - 1.0));
            cell.abs_bias = std::fabs(cell.mean_e_hat - study.e_star);
            study.cells.push_back(cell);
            if (m == m_max) study.plateau_measured.push_back(cell.abs_bias);
        }
    }
    return study;
}

} // namespace cika
