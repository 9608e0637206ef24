#include "cika/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "cika/rng.hpp"

namespace cika {

void UcbParams::validate() const {
    if (beta < 0.0 || gamma < 0.0) {
        throw std::invalid_argument("UcbParams: beta and gamma must be nonnegative");
    }
}

double ucb_score(const NodeStats& stats, const UcbParams& params, double e_hat) {
    params.validate();
    if (stats.n_state < 1) throw std::invalid_argument("ucb_score: N(s) must be >= 1");
    if (stats.n_action < 1) throw std::invalid_argument("ucb_score: N(s,a) must be >= 1");
    return stats.q +
           params.beta * std::sqrt(std::log(static_cast<double>(stats.n_state)) /
                                   static_cast<double>(stats.n_action)) +
           params.gamma * e_hat;
}

double shaped_reward(bool correct, double e_hat_of_action, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("shaped_reward: lambda must be >= 0");
    return (correct ? 1.0 : 0.0) + lambda * e_hat_of_action;
}

double BanditInstance::best_mean() const {
    double best = 0.0;
    for (const auto& a : arms) best = std::max(best, a.mean);
    return best;
}

void BanditInstance::validate() const {
    if (arms.empty()) throw std::invalid_argument("BanditInstance: no arms");
    for (const auto& a : arms) {
        if (a.mean < 0.0 || a.mean > 1.0) {
            throw std::invalid_argument("BanditInstance: arm mean outside [0,1]");
        }
    }
}

namespace {

constexpr std::uint64_t kRewardTag = fnv1a("bandit.reward");

/// Reward table entry (seed, arm, k-th pull of that arm); identical across
/// policies, which is what makes paired regret comparisons tight.
double arm_reward(std::uint64_t seed, int arm, int pull_index, double mean) {
    Substream stream(seed, kRewardTag ^ static_cast<std::uint64_t>(arm),
                     static_cast<std::uint64_t>(pull_index));
    return stream.next_unit() < mean ? 1.0 : 0.0;
}

} // namespace

RegretTrace run_bandit(const BanditInstance& instance, BanditPolicy policy,
                       const UcbParams& params, int horizon, std::uint64_t seed) {
    instance.validate();
    params.validate();
    int n_arms = static_cast<int>(instance.arms.size());
    if (horizon < n_arms) {
        throw std::invalid_argument("run_bandit: horizon shorter than the arm count");
    }
    double best = instance.best_mean();

    RegretTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(horizon));
    trace.pulls.assign(static_cast<std::size_t>(n_arms), 0);
    std::vector<double> q(static_cast<std::size_t>(n_arms), 0.0);
    double cumulative = 0.0;

    for (int t = 0; t < horizon; ++t) {
        int arm;
        if (t < n_arms) {
            arm = t;
        } else {
            arm = 0;
            double best_score = -1e300;
            for (int a = 0; a < n_arms; ++a) {
                NodeStats stats{q[static_cast<std::size_t>(a)], t,
                                trace.pulls[static_cast<std::size_t>(a)]};
                double e = policy == BanditPolicy::MathCausalUcb
                               ? instance.arms[static_cast<std::size_t>(a)].e_hat
                               : 0.0;
                double s = ucb_score(stats, params, e);
                if (s > best_score) {
                    best_score = s;
                    arm = a;
                }
            }
        }
        auto ai = static_cast<std::size_t>(arm);
        double r = arm_reward(seed, arm, trace.pulls[ai], instance.arms[ai].mean);
        trace.pulls[ai] += 1;
        q[ai] += (r - q[ai]) / trace.pulls[ai];
        double inst = best - instance.arms[ai].mean;
        cumulative += inst;
        trace.steps.push_back({t, arm, r, inst, cumulative});
    }
    trace.final_regret = cumulative;
    return trace;
}

BanditInstance two_arm_benchmark() {
    BanditInstance b;
    b.arms = {{"strong", 0.9, 0.8}, {"weak", 0.1, 0.0}};
    return b;
}

BanditInstance ten_arm_benchmark() {
    BanditInstance b;
    const double means[] = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1};
    for (int i = 0; i < 10; ++i) {
        b.arms.push_back({"arm" + std::to_string(i), means[i], means[i] - 0.1});
    }
    return b;
}

namespace {

struct TreeNode {
    std::vector<std::string> activated;
    int creation_index = 0;
    int n_state = 0;
    /// Ordered actions: concepts by e_hat descending (name-tie ascending),
    /// STOP last. Parallel arrays keyed by this order.
    std::vector<std::string> actions;  // "" marks STOP
    std::vector<double> action_e_hat;
    std::vector<int> action_n;
    std::vector<double> action_q;
    std::vector<std::unique_ptr<TreeNode>> children;
    int expanded = 0;
    int own_rollouts = 0;
    int own_successes = 0;
    std::optional<TrialOutcome> last_trial;
};

TreeNode* make_node(std::vector<std::string> activated,
                    const std::vector<std::string>& pool,
                    const std::map<std::string, double>& e_hats, int creation_index) {
    auto node = new TreeNode();
    node->activated = std::move(activated);
    node->creation_index = creation_index;
    for (const auto& c : pool) {
        if (std::find(node->activated.begin(), node->activated.end(), c) !=
            node->activated.end()) {
            continue;
        }
        node->actions.push_back(c);
        node->action_e_hat.push_back(e_hats.at(c));
    }
    node->actions.push_back("");
    node->action_e_hat.push_back(0.0);
    node->action_n.assign(node->actions.size(), 0);
    node->action_q.assign(node->actions.size(), 0.0);
    node->children.resize(node->actions.size());
    return node;
}

} // namespace

MctsResult run_mcts(Simulator& sim, const SimProblem& problem, const CausalGraph& graph,
                    int budget, const UcbParams& params, std::uint64_t seed,
                    double lambda) {
    params.validate();
    if (budget < 1) throw std::invalid_argument("run_mcts: budget must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("run_mcts: lambda must be >= 0");

    auto pool = select_activation_set(graph);
    MctsResult result;
    if (pool.empty()) return result;

    std::map<std::string, double> e_hats;
    for (const auto& e : graph.edges) e_hats[e.concept_name] = e.e_hat;

    int creation_counter = 0;
    std::unique_ptr<TreeNode> root(make_node({}, pool, e_hats, creation_counter++));
    root->n_state = 1;
    std::vector<TreeNode*> all_nodes = {root.get()};

    auto rollout = [&](TreeNode* node, bool via_stop) {
        TrialContext ctx{seed, static_cast<std::uint64_t>(node->own_rollouts)};
        TrialOutcome out = node->activated.empty()
                               ? sim.baseline_trial(problem, ctx)
                               : sim.do_trial(problem, node->activated, ctx);
        node->own_rollouts += 1;
        node->own_successes += out.correct ? 1 : 0;
        node->last_trial = out;
        MctsTraceRow row;
        row.path = node->activated;
        if (via_stop) row.path.push_back("STOP");
        row.correct = out.correct;
        return std::pair<TrialOutcome, MctsTraceRow>(out, row);
    };

    for (int it = 0; it < budget; ++it) {
        TreeNode* node = root.get();
        std::vector<std::pair<TreeNode*, int>> path;

        // Descend through fully expanded nodes, then expand or stop.
        int rollout_action = -1;
        TreeNode* rollout_node = nullptr;
        bool via_stop = false;
        while (true) {
            int n_actions = static_cast<int>(node->actions.size());
            int choice;
            if (node->expanded < n_actions) {
                choice = node->expanded;
                node->expanded += 1;
            } else {
                choice = 0;
                double best_score = -1e300;
                for (int a = 0; a < n_actions; ++a) {
                    NodeStats stats{node->action_q[static_cast<std::size_t>(a)],
                                    node->n_state,
                                    node->action_n[static_cast<std::size_t>(a)]};
                    double s = ucb_score(stats, params,
                                         node->action_e_hat[static_cast<std::size_t>(a)]);
                    if (s > best_score) {
                        best_score = s;
                        choice = a;
                    }
                }
            }
            path.emplace_back(node, choice);
            const auto& action = node->actions[static_cast<std::size_t>(choice)];
            if (action.empty()) {
                rollout_node = node;
                rollout_action = choice;
                via_stop = true;
                break;
            }
            auto& child = node->children[static_cast<std::size_t>(choice)];
            if (!child) {
                auto activated = node->activated;
                activated.push_back(action);
                child.reset(make_node(std::move(activated), pool, e_hats,
                                      creation_counter++));
                all_nodes.push_back(child.get());
                rollout_node = child.get();
                rollout_action = choice;
                break;
            }
            node = child.get();
        }

        auto [outcome, row] = rollout(rollout_node, via_stop);
        double action_e =
            path.back().first->action_e_hat[static_cast<std::size_t>(path.back().second)];
        double reward = lambda > 0.0 ? shaped_reward(outcome.correct, action_e, lambda)
                                     : (outcome.correct ? 1.0 : 0.0);
        row.iteration = it;
        row.reward = reward;
        result.trace.push_back(row);
        result.iterations = it + 1;

        for (auto& [n, a] : path) {
            n->n_state += 1;
            n->action_n[static_cast<std::size_t>(a)] += 1;
            n->action_q[static_cast<std::size_t>(a)] +=
                (reward - n->action_q[static_cast<std::size_t>(a)]) /
                n->action_n[static_cast<std::size_t>(a)];
        }
        if (!via_stop) rollout_node->n_state += 1;

        if (outcome.correct) {
            result.solved = true;
            result.trial = outcome;
            result.activated = rollout_node->activated;
            return result;
        }
    }

    // Budget spent without a correct trial: hand back the most promising
    // node's latest attempt.
    TreeNode* best = nullptr;
    double best_mean = -1.0;
    for (TreeNode* n : all_nodes) {
        if (n->own_rollouts == 0) continue;
        double mean = static_cast<double>(n->own_successes) / n->own_rollouts;
        if (mean > best_mean) {
            best_mean = mean;
            best = n;
        }
    }
    if (best) {
        result.trial = best->last_trial;
        result.activated = best->activated;
    }
    return result;
}

DeltaRegretStudy run_delta_regret_experiment(const std::vector<double>& deltas,
                                             int horizon, int seeds, int m_trials,
                                             const UcbParams& params,
                                             std::uint64_t seed) {
    if (deltas.empty() || seeds < 1 || m_trials < 1) {
        throw std::invalid_argument("run_delta_regret_experiment: degenerate design");
    }

    // Two concepts whose interventional rates reproduce the two-arm
    // benchmark: do(strong) = 0.9, do(weak) = baseline = 0.1.
    DiscreteStudentScm scm;
    scm.concepts = {"strong", "weak"};
    scm.difficulty_support = {0.0};
    scm.difficulty_pmf = {1.0};
    scm.mastery_a = {-50.0, -50.0};
    scm.mastery_b = {0.0, 0.0};
    scm.w0 = std::log(0.1 / 0.9);
    scm.w = {std::log(0.9 / 0.1) - scm.w0, 0.0};
    scm.w_d = 0.0;
    scm.validate();
    SimProblem prob;
    prob.id = "delta-regret";
    prob.statement = "benchmark";
    prob.gold_answer = "1";
    prob.binding = scm;

    auto inner = std::make_shared<SyntheticSimulator>();
    double p_obs = observational_marginal(scm);

    DeltaRegretStudy study;
    study.deltas = deltas;
    study.horizon = horizon;
    study.seeds = seeds;
    for (double delta : deltas) {
        auto sim = perturb(inner, SimulatorFidelity(delta));
        double total = 0.0;
        for (int s = 0; s < seeds; ++s) {
            std::uint64_t run_seed = mix64(seed ^ static_cast<std::uint64_t>(s + 1));
            auto instance = two_arm_benchmark();
            for (std::size_t a = 0; a < instance.arms.size(); ++a) {
                const std::string concept_name = a == 0 ? "strong" : "weak";
                double correct = 0.0;
                for (int i = 0; i < m_trials; ++i) {
                    TrialContext ctx{mix64(run_seed ^ (a + 1)),
                                     static_cast<std::uint64_t>(i)};
                    correct += sim->do_trial(prob, {concept_name}, ctx).correct ? 1.0 : 0.0;
                }
                instance.arms[a].e_hat = correct / m_trials - p_obs;
            }
            total += run_bandit(instance, BanditPolicy::MathCausalUcb, params, horizon,
                                run_seed)
                         .final_regret;
        }
        study.mean_final_regret.push_back(total / seeds);
    }
    return study;
}

} // namespace cika
