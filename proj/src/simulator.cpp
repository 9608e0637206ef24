#include "cika/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cika/rng.hpp"

namespace cika {

bool is_canonical_lens(std::string_view name) {
    return std::find(kCanonicalLenses.begin(), kCanonicalLenses.end(), name) !=
           kCanonicalLenses.end();
}

std::string_view to_string(MasteryLevel level) {
    switch (level) {
        case MasteryLevel::High: return "HIGH";
        case MasteryLevel::Medium: return "MEDIUM";
        case MasteryLevel::Low: return "LOW";
    }
    return "MEDIUM";
}

SimProblem SimProblem::from_json(const nlohmann::json& j) {
    SimProblem p;
    p.id = j.at("id").get<std::string>();
    p.statement = j.value("statement", std::string{});
    p.gold_answer = j.value("gold_answer", std::string{});
    p.domain = j.value("domain", std::string{});
    if (j.contains("binding") && !j["binding"].is_null()) {
        const auto& b = j["binding"];
        p.binding = DiscreteStudentScm::from_json(b.at("scm"));
        if (b.contains("lens_log_odds")) {
            p.lens_log_odds = b["lens_log_odds"].get<std::map<std::string, double>>();
        }
        if (b.contains("control_concepts")) {
            p.control_concepts = b["control_concepts"].get<std::vector<std::string>>();
        }
    }
    return p;
}

nlohmann::json SimProblem::to_json() const {
    nlohmann::json j = {{"id", id},
                        {"statement", statement},
                        {"gold_answer", gold_answer},
                        {"domain", domain}};
    if (binding) {
        nlohmann::json b = {{"scm", binding->to_json()}};
        if (!lens_log_odds.empty()) b["lens_log_odds"] = lens_log_odds;
        if (!control_concepts.empty()) b["control_concepts"] = control_concepts;
        j["binding"] = std::move(b);
    }
    return j;
}

std::vector<SimProblem> problems_from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("problems_from_jsonl: cannot open " + path);
    std::vector<SimProblem> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(SimProblem::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("problems_from_jsonl: " + path + ":" +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void problems_to_jsonl(const std::vector<SimProblem>& problems, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("problems_to_jsonl: cannot open " + path);
    for (const auto& p : problems) out << p.to_json().dump() << '\n';
}

SimulatorFidelity::SimulatorFidelity(double d) : delta_m(d) {
    if (!(d >= 0.0 && d <= 1.0)) {
        throw std::invalid_argument("SimulatorFidelity: delta must lie in [0, 1]");
    }
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const DiscreteStudentScm& require_binding(const SimProblem& problem) {
    if (!problem.binding) {
        throw std::invalid_argument("synthetic simulator: problem '" + problem.id +
                                    "' has no SCM binding");
    }
    return *problem.binding;
}

/// Draws one (D, m, p) sample with the given clamps and logit offset using
/// the per-(problem, operation, index) substream.
TrialOutcome draw_trial(const DiscreteStudentScm& scm, const std::map<int, int>& clamps,
                        double logit_offset, std::uint64_t tag_hash, TrialContext ctx) {
    Substream rng(ctx.seed, tag_hash, ctx.draw_index);
    double u = rng.next_unit();
    double acc = 0.0;
    std::size_t d_idx = scm.difficulty_pmf.size() - 1;
    for (std::size_t k = 0; k < scm.difficulty_pmf.size(); ++k) {
        acc += scm.difficulty_pmf[k];
        if (u < acc) {
            d_idx = k;
            break;
        }
    }
    const double d = scm.difficulty_support[d_idx];
    double eta = scm.w0 - scm.w_d * d + logit_offset;
    for (int j = 0; j < scm.n_concepts(); ++j) {
        auto it = clamps.find(j);
        int m;
        if (it != clamps.end()) {
            m = it->second;
        } else {
            m = rng.next_bernoulli(logistic(scm.mastery_a[static_cast<std::size_t>(j)] -
                                            scm.mastery_b[static_cast<std::size_t>(j)] * d))
                    ? 1
                    : 0;
        }
        eta += scm.w[static_cast<std::size_t>(j)] * m;
    }
    TrialOutcome out;
    out.correct = rng.next_bernoulli(logistic(eta));
    return out;
}

std::uint64_t problem_tag(std::string_view op, const SimProblem& problem) {
    return fnv1a(op) ^ fnv1a(problem.id);
}

} // namespace

SyntheticSimulator::SyntheticSimulator(SyntheticOptions options) : options_(options) {}

TrialOutcome SyntheticSimulator::baseline_trial(const SimProblem& problem, TrialContext ctx) {
    const auto& scm = require_binding(problem);
    return draw_trial(scm, {}, 0.0, problem_tag("sim.baseline", problem), ctx);
}

TrialOutcome SyntheticSimulator::do_trial(const SimProblem& problem,
                                          const std::vector<std::string>& concepts,
                                          TrialContext ctx) {
    const auto& scm = require_binding(problem);
    if (concepts.empty()) {
        throw std::invalid_argument("do_trial: empty concept set");
    }
    std::map<int, int> clamps;
    std::uint64_t set_hash = problem_tag("sim.do", problem);
    // Canonical order so the stream does not depend on caller ordering.
    std::vector<std::string> sorted = concepts;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& name : sorted) {
        auto idx = scm.concept_index(name);
        if (!idx) throw std::invalid_argument("do_trial: unknown concept '" + name + "'");
        clamps[*idx] = 1;
        set_hash = mix64(set_hash ^ fnv1a(name));
    }
    return draw_trial(scm, clamps, 0.0, set_hash, ctx);
}

GapReport SyntheticSimulator::concept_gap(const SimProblem& problem,
                                          const std::string& /*failed_answer*/,
                                          TrialContext ctx) {
    const auto& scm = require_binding(problem);
    GapReport report;
    Substream rng(ctx.seed, problem_tag("sim.gap", problem), ctx.draw_index);
    for (int j = 0; j < scm.n_concepts(); ++j) {
        double marginal = mastery_marginal(scm, j);
        if (options_.gap_noise_sd > 0.0) {
            double logit = std::log(marginal / (1.0 - marginal));
            marginal = logistic(logit + options_.gap_noise_sd * rng.next_gaussian());
        }
        MasteryLevel level = marginal >= 0.7   ? MasteryLevel::High
                             : marginal >= 0.3 ? MasteryLevel::Medium
                                               : MasteryLevel::Low;
        report.items.push_back({scm.concepts[static_cast<std::size_t>(j)], level});
    }
    return report;
}

TrialOutcome SyntheticSimulator::lens_trial(const SimProblem& problem,
                                            const std::string& lens, TrialContext ctx) {
    const auto& scm = require_binding(problem);
    if (!is_canonical_lens(lens)) {
        throw std::invalid_argument("lens_trial: unknown lens '" + lens + "'");
    }
    double offset = 0.0;
    if (auto it = problem.lens_log_odds.find(lens); it != problem.lens_log_odds.end()) {
        offset = it->second;
    }
    return draw_trial(scm, {}, offset,
                      problem_tag("sim.lens", problem) ^ fnv1a(lens), ctx);
}

bool SyntheticSimulator::can_resolve(const SimProblem& problem,
                                     const std::string& concept_name) const {
    return problem.binding && problem.binding->concept_index(concept_name).has_value();
}

namespace {

class PerturbedSimulator : public Simulator {
public:
    PerturbedSimulator(std::shared_ptr<Simulator> inner, SimulatorFidelity fidelity)
        : inner_(std::move(inner)), delta_(fidelity.delta_m) {}

    TrialOutcome baseline_trial(const SimProblem& problem, TrialContext ctx) override {
        return inner_->baseline_trial(problem, ctx);
    }

    TrialOutcome do_trial(const SimProblem& problem,
                          const std::vector<std::string>& concepts,
                          TrialContext ctx) override {
        // The corruption coin lives on its own substream, so delta = 0
        // reproduces the inner trial stream bit for bit.
        Substream coin(ctx.seed, fnv1a("sim.perturb") ^ fnv1a(problem.id), ctx.draw_index);
        if (delta_ > 0.0 && coin.next_unit() < delta_) {
            return inner_->baseline_trial(problem, ctx);
        }
        return inner_->do_trial(problem, concepts, ctx);
    }

    GapReport concept_gap(const SimProblem& problem, const std::string& failed_answer,
                          TrialContext ctx) override {
        return inner_->concept_gap(problem, failed_answer, ctx);
    }

    TrialOutcome lens_trial(const SimProblem& problem, const std::string& lens,
                            TrialContext ctx) override {
        return inner_->lens_trial(problem, lens, ctx);
    }

    bool can_resolve(const SimProblem& problem, const std::string& concept_name) const override {
        return inner_->can_resolve(problem, concept_name);
    }

private:
    std::shared_ptr<Simulator> inner_;
    double delta_;
};

} // namespace

std::shared_ptr<Simulator> perturb(std::shared_ptr<Simulator> inner,
                                   SimulatorFidelity fidelity) {
    if (!inner) throw std::invalid_argument("perturb: null inner simulator");
    return std::make_shared<PerturbedSimulator>(std::move(inner), fidelity);
}

TvGapEstimate measure_tv_gap(Simulator& sim_a, Simulator& sim_b,
                             const SimProblem& problem, const std::string& concept_name,
                             int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("measure_tv_gap: trials must be >= 1");
    const std::vector<std::string> concepts = {concept_name};
    double pa = 0.0, pb = 0.0;
    for (int i = 0; i < trials; ++i) {
        TrialContext ctx{seed, static_cast<std::uint64_t>(i)};
        pa += sim_a.do_trial(problem, concepts, ctx).correct ? 1.0 : 0.0;
        pb += sim_b.do_trial(problem, concepts, ctx).correct ? 1.0 : 0.0;
    }
    pa /= trials;
    pb /= trials;
    TvGapEstimate est;
    est.tv = std::fabs(pa - pb);
    est.se = std::sqrt(pa * (1.0 - pa) / trials + pb * (1.0 - pb) / trials);
    return est;
}

CountingSimulator::CountingSimulator(std::shared_ptr<Simulator> inner)
    : inner_(std::move(inner)) {
    if (!inner_) throw std::invalid_argument("CountingSimulator: null inner simulator");
}

TrialOutcome CountingSimulator::baseline_trial(const SimProblem& problem, TrialContext ctx) {
    baseline_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->baseline_trial(problem, ctx);
}

TrialOutcome CountingSimulator::do_trial(const SimProblem& problem,
                                         const std::vector<std::string>& concepts,
                                         TrialContext ctx) {
    do_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->do_trial(problem, concepts, ctx);
}

GapReport CountingSimulator::concept_gap(const SimProblem& problem,
                                         const std::string& failed_answer,
                                         TrialContext ctx) {
    gap_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->concept_gap(problem, failed_answer, ctx);
}

TrialOutcome CountingSimulator::lens_trial(const SimProblem& problem,
                                           const std::string& lens, TrialContext ctx) {
    lens_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->lens_trial(problem, lens, ctx);
}

bool CountingSimulator::can_resolve(const SimProblem& problem,
                                    const std::string& concept_name) const {
    return inner_->can_resolve(problem, concept_name);
}

void CountingSimulator::reset() {
    baseline_calls_ = 0;
    do_calls_ = 0;
    gap_calls_ = 0;
    lens_calls_ = 0;
}

} // namespace cika
