#include "cika/svar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cika/rng.hpp"

namespace cika {

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe reduce(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    double n = static_cast<double>(xs.size());
    return {mean, std::sqrt(sq / (n - 1.0)) / std::sqrt(n)};
}

std::vector<int> concept_coords(const LinearSvarScm& scm) {
    std::vector<int> coords;
    for (int i = 0; i < scm.dim(); ++i) {
        if (i != scm.outcome) coords.push_back(i);
    }
    return coords;
}

} // namespace

SvarEstimate estimate_contemporaneous(const LinearSvarScm& scm, int m_trials,
                                      std::uint64_t seed) {
    if (m_trials < 2) {
        throw std::invalid_argument("estimate_contemporaneous: m_trials must be >= 2");
    }
    auto coords = concept_coords(scm);
    SvarEstimate est;
    est.m_trials = m_trials;
    est.lagged_effects.resize(static_cast<Eigen::Index>(coords.size()), 0);
    est.lagged_se.resize(static_cast<Eigen::Index>(coords.size()), 0);
    for (std::size_t c = 0; c < coords.size(); ++c) {
        int i = coords[c];
        est.concepts.push_back(scm.names[static_cast<std::size_t>(i)]);
        std::vector<double> diffs;
        diffs.reserve(static_cast<std::size_t>(m_trials));
        for (int k = 0; k < m_trials; ++k) {
            std::uint64_t base =
                mix64(seed ^ (static_cast<std::uint64_t>(i) << 32) ^
                      static_cast<std::uint64_t>(k));
            auto on = simulate_svar(scm, 1, {{1, i, 1.0}}, mix64(base ^ 0x11));
            auto off = simulate_svar(scm, 1, {{1, i, 0.0}}, mix64(base ^ 0x22));
            diffs.push_back(on(0, scm.outcome) - off(0, scm.outcome));
        }
        auto r = reduce(diffs);
        est.contemporaneous_row.push_back(r.mean);
        est.contemporaneous_se.push_back(r.se);
    }
    return est;
}

SvarEstimate estimate_lagged(const LinearSvarScm& scm, int max_horizon, int m_trials,
                             std::uint64_t seed) {
    if (m_trials < 2) {
        throw std::invalid_argument("estimate_lagged: m_trials must be >= 2");
    }
    if (max_horizon < 1) {
        throw std::invalid_argument("estimate_lagged: horizon must be >= 1");
    }
    auto coords = concept_coords(scm);
    int horizon = 1 + max_horizon;
    SvarEstimate est;
    est.m_trials = m_trials;
    est.lagged_effects.resize(static_cast<Eigen::Index>(coords.size()), max_horizon);
    est.lagged_se.resize(static_cast<Eigen::Index>(coords.size()), max_horizon);
    for (std::size_t c = 0; c < coords.size(); ++c) {
        int i = coords[c];
        est.concepts.push_back(scm.names[static_cast<std::size_t>(i)]);
        est.contemporaneous_row.push_back(0.0);
        est.contemporaneous_se.push_back(0.0);
        std::vector<std::vector<double>> shifts(static_cast<std::size_t>(max_horizon));
        for (int k = 0; k < m_trials; ++k) {
            std::uint64_t s = mix64(seed ^ (static_cast<std::uint64_t>(i) << 32) ^
                                    static_cast<std::uint64_t>(k));
            auto clamped = simulate_svar(scm, horizon, {{1, i, 1.0}}, s);
            auto free_run = simulate_svar(scm, horizon, {}, s);
            for (int l = 1; l <= max_horizon; ++l) {
                shifts[static_cast<std::size_t>(l - 1)].push_back(
                    clamped(l, scm.outcome) - free_run(l, scm.outcome));
            }
        }
        for (int l = 1; l <= max_horizon; ++l) {
            auto r = reduce(shifts[static_cast<std::size_t>(l - 1)]);
            est.lagged_effects(static_cast<Eigen::Index>(c), l - 1) = r.mean;
            est.lagged_se(static_cast<Eigen::Index>(c), l - 1) = r.se;
        }
    }
    return est;
}

ChainIdentification identify_chain(const LinearSvarScm& scm, int m_trials,
                                   std::uint64_t seed) {
    if (m_trials < 2) {
        throw std::invalid_argument("identify_chain: m_trials must be >= 2");
    }
    auto coords = concept_coords(scm);
    int n = static_cast<int>(coords.size());
    ChainIdentification out;
    if (n < 2) {
        throw std::invalid_argument("identify_chain: need at least two concepts");
    }
    out.interventions_used = n - 1;

    // Downstream concept sets from do(1)-vs-do(0) clamps under coupled
    // noise; the paired difference is noise-free, so the 3·SE threshold is
    // floored to keep it meaningful.
    std::vector<std::vector<int>> downstream(static_cast<std::size_t>(n - 1));
    std::vector<bool> outcome_shifted(static_cast<std::size_t>(n - 1), false);
    for (int c = 0; c < n - 1; ++c) {
        int i = coords[static_cast<std::size_t>(c)];
        std::vector<std::vector<double>> diffs(static_cast<std::size_t>(scm.dim()));
        for (int k = 0; k < m_trials; ++k) {
            std::uint64_t s = mix64(seed ^ (static_cast<std::uint64_t>(i) << 32) ^
                                    static_cast<std::uint64_t>(k));
            auto on = simulate_svar(scm, 1, {{1, i, 1.0}}, s);
            auto off = simulate_svar(scm, 1, {{1, i, 0.0}}, s);
            for (int j = 0; j < scm.dim(); ++j) {
                diffs[static_cast<std::size_t>(j)].push_back(on(0, j) - off(0, j));
            }
        }
        for (int j = 0; j < scm.dim(); ++j) {
            if (j == i) continue;
            auto r = reduce(diffs[static_cast<std::size_t>(j)]);
            bool shifted = std::fabs(r.mean) > std::max(3.0 * r.se, 1e-9);
            if (j == scm.outcome) {
                outcome_shifted[static_cast<std::size_t>(c)] = shifted;
            } else if (shifted) {
                downstream[static_cast<std::size_t>(c)].push_back(j);
            }
        }
    }

    // In a chain every clamp must reach the outcome.
    for (int c = 0; c < n - 1; ++c) {
        if (!outcome_shifted[static_cast<std::size_t>(c)]) {
            out.ambiguous = true;
            out.note = "clamping '" +
                       scm.names[static_cast<std::size_t>(coords[static_cast<std::size_t>(c)])] +
                       "' produced no detectable outcome shift";
            return out;
        }
    }

    // Order intervened concepts by downstream count (upstream concepts see
    // more); distinct counts are required for a chain.
    std::vector<int> order(static_cast<std::size_t>(n - 1));
    for (int c = 0; c < n - 1; ++c) order[static_cast<std::size_t>(c)] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return downstream[static_cast<std::size_t>(a)].size() >
               downstream[static_cast<std::size_t>(b)].size();
    });
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (downstream[static_cast<std::size_t>(order[k - 1])].size() ==
            downstream[static_cast<std::size_t>(order[k])].size()) {
            out.ambiguous = true;
            out.note = "two clamps share a downstream count; not a chain signature";
            return out;
        }
    }

    // The unintervened concept sits after every intervened concept that
    // reaches it.
    int missing = coords[static_cast<std::size_t>(n - 1)];
    int upstream_of_missing = 0;
    for (int c = 0; c < n - 1; ++c) {
        const auto& d = downstream[static_cast<std::size_t>(c)];
        if (std::find(d.begin(), d.end(), missing) != d.end()) ++upstream_of_missing;
    }

    std::vector<int> chain;
    chain.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n - 1; ++k) {
        if (k == upstream_of_missing) chain.push_back(missing);
        chain.push_back(coords[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
    }
    if (upstream_of_missing == n - 1) chain.push_back(missing);

    // Every downstream set must be exactly the suffix behind its clamp.
    for (int c = 0; c < n - 1; ++c) {
        int i = coords[static_cast<std::size_t>(c)];
        auto pos = std::find(chain.begin(), chain.end(), i);
        std::vector<int> expected(pos + 1, chain.end());
        auto got = downstream[static_cast<std::size_t>(c)];
        std::sort(expected.begin(), expected.end());
        std::sort(got.begin(), got.end());
        if (expected != got) {
            out.ambiguous = true;
            out.note = "downstream sets are not nested suffixes of one order";
            return out;
        }
    }

    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        out.edges.emplace_back(scm.names[static_cast<std::size_t>(chain[k])],
                               scm.names[static_cast<std::size_t>(chain[k + 1])]);
    }
    out.edges.emplace_back(scm.names[static_cast<std::size_t>(chain.back())],
                           scm.names[static_cast<std::size_t>(scm.outcome)]);
    return out;
}

LinearSvarScm make_chain_scm(const std::vector<std::string>& chain_order,
                             const std::string& outcome_name, double coefficient,
                             double noise_var) {
    if (chain_order.size() < 2) {
        throw std::invalid_argument("make_chain_scm: need at least two concepts");
    }
    LinearSvarScm scm;
    scm.names = chain_order;
    std::sort(scm.names.begin(), scm.names.end());
    if (std::adjacent_find(scm.names.begin(), scm.names.end()) != scm.names.end()) {
        throw std::invalid_argument("make_chain_scm: duplicate concept name");
    }
    if (std::find(scm.names.begin(), scm.names.end(), outcome_name) != scm.names.end()) {
        throw std::invalid_argument("make_chain_scm: outcome name collides with a concept");
    }
    scm.names.push_back(outcome_name);
    int dim = static_cast<int>(scm.names.size());
    auto coord = [&](const std::string& name) {
        for (int i = 0; i < dim; ++i) {
            if (scm.names[static_cast<std::size_t>(i)] == name) return i;
        }
        throw std::invalid_argument("make_chain_scm: name lookup failed");
    };

    scm.b0 = Eigen::MatrixXd::Identity(dim, dim);
    for (std::size_t k = 1; k < chain_order.size(); ++k) {
        scm.b0(coord(chain_order[k]), coord(chain_order[k - 1])) = -coefficient;
    }
    scm.b0(dim - 1, coord(chain_order.back())) = -coefficient;
    scm.noise_var = Eigen::VectorXd::Constant(dim, noise_var);
    scm.outcome = dim - 1;
    scm.validate();
    return scm;
}

} // namespace cika
