#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <memory>

#include "cika/simulator.hpp"

using namespace cika;

namespace {

DiscreteStudentScm pair_scm() {
    DiscreteStudentScm s;
    s.concepts = {"substitution", "telescoping"};
    s.difficulty_support = {0.0, 1.0};
    s.difficulty_pmf = {0.5, 0.5};
    s.mastery_a = {0.0, 0.0};
    s.mastery_b = {4.0, 4.0};
    s.w0 = -1.0;
    s.w = {2.0, 2.0};
    s.w_d = 3.0;
    s.validate();
    return s;
}

SimProblem make_problem(DiscreteStudentScm scm, std::string id = "prob-1") {
    SimProblem p;
    p.id = std::move(id);
    p.statement = "Evaluate the telescoping sum.";
    p.gold_answer = "42";
    p.domain = "algebra";
    p.binding = std::move(scm);
    return p;
}

double trial_rate(Simulator& sim, const SimProblem& p, int n, std::uint64_t seed,
                  const std::vector<std::string>& concepts = {}) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        TrialContext ctx{seed, static_cast<std::uint64_t>(i)};
        bool ok = concepts.empty() ? sim.baseline_trial(p, ctx).correct
                                   : sim.do_trial(p, concepts, ctx).correct;
        acc += ok ? 1.0 : 0.0;
    }
    return acc / n;
}

double binom3(double p, int n) { return 3.0 * std::sqrt(p * (1.0 - p) / n + 1e-12); }

} // namespace

TEST_CASE("baseline trials track the enumerated marginal") {
    SyntheticSimulator sim;
    auto p = make_problem(pair_scm());
    const int n = 10000;
    double rate = trial_rate(sim, p, n, 101);
    const double truth = 0.346312920845617;
    CHECK(std::fabs(rate - truth) < binom3(truth, n));

    auto sure = pair_scm();
    sure.w0 = 50.0;
    auto p2 = make_problem(sure, "prob-sure");
    for (int i = 0; i < 200; ++i) {
        CHECK(sim.baseline_trial(p2, {5, static_cast<std::uint64_t>(i)}).correct);
    }

    SimProblem unbound;
    unbound.id = "loose";
    CHECK_THROWS(sim.baseline_trial(unbound, {1, 0}));
}

TEST_CASE("do trials match the interventional distribution") {
    SyntheticSimulator sim;
    auto scm = pair_scm();
    auto p = make_problem(scm);
    const int n = 20000;

    double rate = trial_rate(sim, p, n, 7, {"substitution"});
    double truth = interventional_distribution(scm, 0, 1);
    CHECK(std::fabs(rate - truth) < binom3(truth, n));

    double both = trial_rate(sim, p, n, 7, {"substitution", "telescoping"});
    double truth_both = clamped_outcome_probability(scm, {{0, 1}, {1, 1}});
    CHECK(std::fabs(both - truth_both) < binom3(truth_both, n));

    // A null concept moves nothing.
    auto null_scm = pair_scm();
    null_scm.w[1] = 0.0;
    auto pn = make_problem(null_scm, "prob-null");
    double base = trial_rate(sim, pn, n, 9);
    double clamped = trial_rate(sim, pn, n, 9, {"telescoping"});
    CHECK(std::fabs(base - clamped) < 2.0 * binom3(0.5, n));

    CHECK_THROWS(sim.do_trial(p, {}, {1, 0}));
    CHECK_THROWS(sim.do_trial(p, {"nonexistent"}, {1, 0}));
}

TEST_CASE("concept gap reveals thresholded mastery marginals") {
    DiscreteStudentScm s;
    s.concepts = {"strong", "middling", "weak"};
    s.difficulty_support = {0.0, 1.0};
    s.difficulty_pmf = {0.5, 0.5};
    // Marginals (frozen from enumeration): 0.9054, 0.5, 0.0311.
    s.mastery_a = {3.0, 0.0, -3.0};
    s.mastery_b = {1.2, 0.0, 1.2};
    s.w0 = 0.0;
    s.w = {1.0, 1.0, 1.0};
    s.w_d = 1.0;
    s.validate();
    CHECK(mastery_marginal(s, 0) == doctest::Approx(0.905361530960973).epsilon(1e-12));
    CHECK(mastery_marginal(s, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mastery_marginal(s, 2) == doctest::Approx(0.031099952435420).epsilon(1e-12));

    SyntheticSimulator sim;
    auto report = sim.concept_gap(make_problem(s, "prob-gap"), "wrong", {1, 0});
    REQUIRE(report.items.size() == 3);
    CHECK_FALSE(report.parse_warning);
    CHECK(report.items[0].level == MasteryLevel::High);
    CHECK(report.items[1].level == MasteryLevel::Medium);
    CHECK(report.items[2].level == MasteryLevel::Low);

    // Noise moves levels only stochastically; with huge noise the labels
    // still come back one per concept.
    SyntheticSimulator noisy({.gap_noise_sd = 5.0});
    auto nr = noisy.concept_gap(make_problem(s, "prob-gap"), "wrong", {1, 0});
    CHECK(nr.items.size() == 3);
}

TEST_CASE("lens trials shift the success odds as configured") {
    SyntheticSimulator sim;
    auto scm = pair_scm();
    auto p = make_problem(scm, "prob-lens");
    p.lens_log_odds["invariant"] = 50.0;
    p.lens_log_odds["pigeonhole principle"] = 1.0;

    for (int i = 0; i < 100; ++i) {
        CHECK(sim.lens_trial(p, "invariant", {3, static_cast<std::uint64_t>(i)}).correct);
    }

    const int n = 20000;
    for (std::string_view lens : kCanonicalLenses) {
        double offset = 0.0;
        if (auto it = p.lens_log_odds.find(std::string(lens)); it != p.lens_log_odds.end()) {
            offset = it->second;
        }
        double truth = observational_marginal(scm, offset);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += sim.lens_trial(p, std::string(lens), {11, static_cast<std::uint64_t>(i)})
                       .correct
                       ? 1.0
                       : 0.0;
        }
        CHECK(std::fabs(acc / n - truth) < binom3(truth, n));
    }

    CHECK_THROWS(sim.lens_trial(p, "spectral bashing", {1, 0}));
}

TEST_CASE("perturbation mixes in the baseline distribution") {
    auto inner = std::make_shared<SyntheticSimulator>();
    auto scm = pair_scm();
    auto p = make_problem(scm, "prob-mix");
    const std::vector<std::string> c = {"substitution"};

    SUBCASE("delta zero is bitwise identical to the inner simulator") {
        auto wrapped = perturb(inner, SimulatorFidelity(0.0));
        for (int i = 0; i < 500; ++i) {
            TrialContext ctx{42, static_cast<std::uint64_t>(i)};
            CHECK(wrapped->do_trial(p, c, ctx).correct == inner->do_trial(p, c, ctx).correct);
        }
    }

    SUBCASE("delta one collapses to the baseline rate") {
        auto wrapped = perturb(inner, SimulatorFidelity(1.0));
        const int n = 20000;
        double rate = trial_rate(*wrapped, p, n, 6, c);
        double truth = observational_marginal(scm);
        CHECK(std::fabs(rate - truth) < binom3(truth, n));
    }

    SUBCASE("intermediate delta follows the mixture arithmetic") {
        auto wrapped = perturb(inner, SimulatorFidelity(0.25));
        const int n = 40000;
        double rate = trial_rate(*wrapped, p, n, 8, c);
        double truth = 0.75 * interventional_distribution(scm, 0, 1) +
                       0.25 * observational_marginal(scm);
        CHECK(std::fabs(rate - truth) < binom3(truth, n));
    }

    SUBCASE("composition respects the additive TV budget") {
        auto wrapped = perturb(perturb(inner, SimulatorFidelity(0.2)), SimulatorFidelity(0.15));
        const int n = 40000;
        auto est = measure_tv_gap(*wrapped, *inner, p, "substitution", n, 11);
        CHECK(est.tv <= 0.35 + 3.0 * est.se);
    }

    CHECK_THROWS(SimulatorFidelity(-0.1));
    CHECK_THROWS(SimulatorFidelity(1.1));
}

TEST_CASE("tv gap measurement") {
    auto inner = std::make_shared<SyntheticSimulator>();

    SUBCASE("a simulator has zero gap to itself under one seed") {
        auto p = make_problem(pair_scm(), "prob-tv");
        auto est = measure_tv_gap(*inner, *inner, p, "substitution", 2000, 3);
        CHECK(est.tv == 0.0);
    }

    SUBCASE("gap against a corrupted copy recovers delta on a saturated fixture") {
        DiscreteStudentScm s;
        s.concepts = {"keystone"};
        s.difficulty_support = {0.0};
        s.difficulty_pmf = {1.0};
        s.mastery_a = {-50.0};  // never mastered on its own
        s.mastery_b = {0.0};
        s.w0 = -50.0;
        s.w = {100.0};  // certain success once activated
        s.w_d = 0.0;
        s.validate();
        auto p = make_problem(s, "prob-sat");
        auto wrapped = perturb(inner, SimulatorFidelity(0.3));
        const int n = 20000;
        auto est = measure_tv_gap(*wrapped, *inner, p, "keystone", n, 5);
        CHECK(std::fabs(est.tv - 0.3) < 3.0 * est.se + 1e-9);
        CHECK(est.se < 0.01);
    }

    SUBCASE("identical independent sims stay under a small bound at large N") {
        auto p = make_problem(pair_scm(), "prob-big");
        SyntheticSimulator other;
        auto est = measure_tv_gap(*inner, other, p, "substitution", 100000, 13);
        CHECK(est.tv < 0.02);
    }
}

TEST_CASE("problem jsonl round trip") {
    auto p = make_problem(pair_scm(), "round");
    p.lens_log_odds["invariant"] = 2.0;
    p.control_concepts = {"telescoping"};
    SimProblem bare;
    bare.id = "bare";
    bare.statement = "Endpoint-only problem";
    bare.gold_answer = "7";

    std::string path = "test_problems_roundtrip.jsonl";
    problems_to_jsonl({p, bare}, path);
    auto loaded = problems_from_jsonl(path);
    std::remove(path.c_str());

    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == "round");
    REQUIRE(loaded[0].binding.has_value());
    CHECK(loaded[0].binding->concepts == p.binding->concepts);
    CHECK(loaded[0].lens_log_odds.at("invariant") == 2.0);
    CHECK(loaded[0].control_concepts == p.control_concepts);
    CHECK_FALSE(loaded[1].binding.has_value());
    CHECK(loaded[1].gold_answer == "7");
}

TEST_CASE("call counting wrapper keeps an exact ledger") {
    auto counted = CountingSimulator(std::make_shared<SyntheticSimulator>());
    auto p = make_problem(pair_scm(), "prob-count");
    for (int i = 0; i < 3; ++i) counted.baseline_trial(p, {1, static_cast<std::uint64_t>(i)});
    for (int i = 0; i < 5; ++i) {
        counted.do_trial(p, {"substitution"}, {1, static_cast<std::uint64_t>(i)});
    }
    counted.lens_trial(p, "invariant", {1, 0});
    counted.concept_gap(p, "wrong", {1, 0});
    CHECK(counted.baseline_calls() == 3);
    CHECK(counted.do_calls() == 5);
    CHECK(counted.lens_calls() == 1);
    CHECK(counted.gap_calls() == 1);
    CHECK(counted.total_trials() == 9);
    counted.reset();
    CHECK(counted.total_trials() == 0);
}
