#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cika/scm.hpp"

namespace cika {

/// The twelve canonical solution lenses, in sweep order.
inline constexpr std::array<std::string_view, 12> kCanonicalLenses = {
    "direct solution",     "proof by contradiction", "mathematical induction",
    "contrapositive",      "constructive proof",     "pigeonhole principle",
    "extremal principle",  "invariant",              "coordinate transformation",
    "complexification",    "graph transformation",   "probabilistic method"};

bool is_canonical_lens(std::string_view name);

struct SimProblem {
    std::string id;
    std::string statement;
    std::string gold_answer;
    std::string domain;
    /// Synthetic problems bind a student SCM whose concept table doubles as
    /// the resolvable-concept list. Endpoint problems carry no binding.
    std::optional<DiscreteStudentScm> binding;
    /// Per-lens success log-odds modifiers (missing lens means 0).
    std::map<std::string, double> lens_log_odds;
    /// Names of deliberately inert concepts, used as negative controls.
    std::vector<std::string> control_concepts;

    static SimProblem from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

std::vector<SimProblem> problems_from_jsonl(const std::string& path);
void problems_to_jsonl(const std::vector<SimProblem>& problems, const std::string& path);

struct TrialOutcome {
    bool correct = false;
    std::string raw_answer;  // empty in synthetic mode
    double latency_ms = 0.0;
};

enum class MasteryLevel { High, Medium, Low };

std::string_view to_string(MasteryLevel level);

struct ConceptDiagnosis {
    std::string concept_name;
    MasteryLevel level = MasteryLevel::Medium;
};

struct GapReport {
    std::vector<ConceptDiagnosis> items;
    /// Set when an endpoint diagnosis could not be parsed; the pipeline then
    /// falls back to retrieval-only candidates.
    bool parse_warning = false;
};

struct SimulatorFidelity {
    double delta_m = 0.0;

    explicit SimulatorFidelity(double d);
};

/// Replay coordinates for one trial. Substreams are derived from
/// (seed, operation tag, draw_index), so trials are reproducible no matter
/// which thread runs them or in what order.
struct TrialContext {
    std::uint64_t seed = 0;
    std::uint64_t draw_index = 0;
};

/// The intervention-simulator contract: the system whose causal structure
/// the pipeline probes.
class Simulator {
public:
    virtual ~Simulator() = default;

    /// One plain solution attempt.
    virtual TrialOutcome baseline_trial(const SimProblem& problem, TrialContext ctx) = 0;

    /// One attempt with every named concept activated. The set must be
    /// nonempty and every name resolvable.
    virtual TrialOutcome do_trial(const SimProblem& problem,
                                  const std::vector<std::string>& concepts,
                                  TrialContext ctx) = 0;

    /// Self-diagnosis after a failed baseline attempt.
    virtual GapReport concept_gap(const SimProblem& problem,
                                  const std::string& failed_answer, TrialContext ctx) = 0;

    /// One attempt steered through a canonical lens.
    virtual TrialOutcome lens_trial(const SimProblem& problem, const std::string& lens,
                                    TrialContext ctx) = 0;

    virtual bool can_resolve(const SimProblem& problem,
                             const std::string& concept_name) const = 0;
};

struct SyntheticOptions {
    /// Gaussian noise (log-odds scale) applied to revealed mastery marginals
    /// in concept_gap. Zero keeps the diagnosis deterministic.
    double gap_noise_sd = 0.0;
};

/// Simulator backed by the problem's bound DiscreteStudentScm.
class SyntheticSimulator : public Simulator {
public:
    explicit SyntheticSimulator(SyntheticOptions options = {});

    TrialOutcome baseline_trial(const SimProblem& problem, TrialContext ctx) override;
    TrialOutcome do_trial(const SimProblem& problem,
                          const std::vector<std::string>& concepts,
                          TrialContext ctx) override;
    GapReport concept_gap(const SimProblem& problem, const std::string& failed_answer,
                          TrialContext ctx) override;
    TrialOutcome lens_trial(const SimProblem& problem, const std::string& lens,
                            TrialContext ctx) override;
    bool can_resolve(const SimProblem& problem, const std::string& concept_name) const override;

private:
    SyntheticOptions options_;
};

/// Wraps a simulator so each do_trial is corrupted with probability delta:
/// the draw then comes from the inner baseline distribution instead of the
/// interventional one. Total variation from the inner do-distribution is
/// bounded by delta exactly (mixture bound).
std::shared_ptr<Simulator> perturb(std::shared_ptr<Simulator> inner,
                                   SimulatorFidelity fidelity);

struct TvGapEstimate {
    double tv = 0.0;
    double se = 0.0;
};

/// Empirical total-variation gap between two simulators' do-distributions
/// for one (problem, concept), from N paired trials per side.
TvGapEstimate measure_tv_gap(Simulator& sim_a, Simulator& sim_b,
                             const SimProblem& problem, const std::string& concept_name,
                             int trials, std::uint64_t seed);

/// Decorator that counts calls per trial category; the pipeline uses it to
/// keep an exact budget ledger.
class CountingSimulator : public Simulator {
public:
    explicit CountingSimulator(std::shared_ptr<Simulator> inner);

    TrialOutcome baseline_trial(const SimProblem& problem, TrialContext ctx) override;
    TrialOutcome do_trial(const SimProblem& problem,
                          const std::vector<std::string>& concepts,
                          TrialContext ctx) override;
    GapReport concept_gap(const SimProblem& problem, const std::string& failed_answer,
                          TrialContext ctx) override;
    TrialOutcome lens_trial(const SimProblem& problem, const std::string& lens,
                            TrialContext ctx) override;
    bool can_resolve(const SimProblem& problem, const std::string& concept_name) const override;

    std::uint64_t baseline_calls() const { return baseline_calls_.load(); }
    std::uint64_t do_calls() const { return do_calls_.load(); }
    std::uint64_t gap_calls() const { return gap_calls_.load(); }
    std::uint64_t lens_calls() const { return lens_calls_.load(); }
    std::uint64_t total_trials() const {
        return baseline_calls() + do_calls() + lens_calls();
    }
    void reset();

private:
    std::shared_ptr<Simulator> inner_;
    std::atomic<std::uint64_t> baseline_calls_{0};
    std::atomic<std::uint64_t> do_calls_{0};
    std::atomic<std::uint64_t> gap_calls_{0};
    std::atomic<std::uint64_t> lens_calls_{0};
};

} // namespace cika
