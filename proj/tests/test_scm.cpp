#include "doctest.h"

#include <cmath>
#include <map>
#include <vector>

#include "cika/rng.hpp"
#include "cika/scm.hpp"

using cika::DiscreteStudentScm;
using cika::LinearSvarScm;

namespace {

DiscreteStudentScm pair_fixture() {
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

DiscreteStudentScm random_fixture(std::uint64_t seed, int n) {
    cika::Substream rng(seed, "fixture", 0);
    DiscreteStudentScm s;
    for (int j = 0; j < n; ++j) s.concepts.push_back("c" + std::to_string(j));
    const int levels = 2 + static_cast<int>(rng.next_below(3));
    double total = 0.0;
    for (int k = 0; k < levels; ++k) {
        s.difficulty_support.push_back(static_cast<double>(k) / std::max(1, levels - 1));
        double q = 0.1 + rng.next_unit();
        s.difficulty_pmf.push_back(q);
        total += q;
    }
    for (auto& q : s.difficulty_pmf) q /= total;
    // Re-normalize exactly so the 1e-12 pmf invariant holds.
    double resum = 0.0;
    for (double q : s.difficulty_pmf) resum += q;
    s.difficulty_pmf.back() += 1.0 - resum;
    for (int j = 0; j < n; ++j) {
        s.mastery_a.push_back(rng.next_gaussian());
        s.mastery_b.push_back(0.5 + 3.0 * rng.next_unit());
        s.w.push_back(2.0 * rng.next_gaussian());
    }
    s.w0 = rng.next_gaussian();
    s.w_d = 2.0 * rng.next_unit();
    s.validate();
    return s;
}

} // namespace

// Brute-force oracle, written before the library enumeration and kept on a
// different code path: recursion over concepts rather than bitmask loops.
namespace reference {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double walk(const DiscreteStudentScm& s, double d, int j,
            const std::map<int, int>& clamps, std::vector<int>& m) {
    if (j == s.n_concepts()) {
        double eta = s.w0 - s.w_d * d;
        for (int i = 0; i < s.n_concepts(); ++i) eta += s.w[i] * m[i];
        return sigmoid(eta);
    }
    auto it = clamps.find(j);
    if (it != clamps.end()) {
        m[j] = it->second;
        return walk(s, d, j + 1, clamps, m);
    }
    const double pj = sigmoid(s.mastery_a[j] - s.mastery_b[j] * d);
    m[j] = 1;
    double hi = walk(s, d, j + 1, clamps, m);
    m[j] = 0;
    double lo = walk(s, d, j + 1, clamps, m);
    return pj * hi + (1.0 - pj) * lo;
}

double outcome_probability(const DiscreteStudentScm& s, const std::map<int, int>& clamps) {
    double total = 0.0;
    std::vector<int> m(s.n_concepts(), 0);
    for (std::size_t k = 0; k < s.difficulty_support.size(); ++k) {
        total += s.difficulty_pmf[k] * walk(s, s.difficulty_support[k], 0, clamps, m);
    }
    return total;
}

} // namespace reference

TEST_CASE("pair fixture matches values frozen from the pre-build enumeration") {
    auto s = pair_fixture();
    CHECK(cika::observational_marginal(s) == doctest::Approx(0.346312920845617).epsilon(1e-12));
    CHECK(cika::interventional_distribution(s, 0, 1) ==
          doctest::Approx(0.483934185472899).epsilon(1e-12));
    CHECK(cika::interventional_distribution(s, 0, 0) ==
          doctest::Approx(0.259903357498438).epsilon(1e-12));
    CHECK(cika::true_effect(s, 0) == doctest::Approx(0.224030827974461).epsilon(1e-12));
    CHECK(cika::observational_conditional_diff(s, 0) ==
          doctest::Approx(0.635148887984389).epsilon(1e-12));
    // Same answers from the recursive oracle.
    CHECK(reference::outcome_probability(s, {}) ==
          doctest::Approx(cika::observational_marginal(s)).epsilon(1e-13));
    CHECK(reference::outcome_probability(s, {{0, 1}}) ==
          doctest::Approx(cika::interventional_distribution(s, 0, 1)).epsilon(1e-13));
}

TEST_CASE("degenerate true effects") {
    DiscreteStudentScm s;
    s.concepts = {"only"};
    s.difficulty_support = {0.0, 0.5, 1.0};
    s.difficulty_pmf = {0.25, 0.5, 0.25};
    s.mastery_a = {0.0};
    s.mastery_b = {1.0};
    s.w0 = -50.0;
    s.w = {100.0};
    s.w_d = 0.0;
    s.validate();
    CHECK(cika::true_effect(s, 0) == doctest::Approx(1.0).epsilon(1e-12));
    s.w = {0.0};
    CHECK(cika::true_effect(s, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("backdoor identity holds on the fixture and random instances") {
    auto fixture = pair_fixture();
    for (int v : {0, 1}) {
        for (int c = 0; c < fixture.n_concepts(); ++c) {
            CHECK(std::fabs(cika::interventional_distribution(fixture, c, v) -
                            cika::backdoor_adjusted(fixture, c, v)) < 1e-12);
        }
    }
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto s = random_fixture(seed, 1 + static_cast<int>(seed % 5));
        for (int c = 0; c < s.n_concepts(); ++c) {
            for (int v : {0, 1}) {
                double lhs = cika::interventional_distribution(s, c, v);
                double rhs = cika::backdoor_adjusted(s, c, v);
                CHECK(std::fabs(lhs - rhs) < 1e-12);
                // Third, fully independent path.
                CHECK(reference::outcome_probability(s, {{c, v}}) ==
                      doctest::Approx(lhs).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("no confounding cases collapse to plain conditionals") {
    // b_j = 0 and w_d = 0: masteries independent of D and D inert.
    DiscreteStudentScm s;
    s.concepts = {"a", "b"};
    s.difficulty_support = {0.0, 1.0};
    s.difficulty_pmf = {0.5, 0.5};
    s.mastery_a = {0.3, -0.4};
    s.mastery_b = {0.0, 0.0};
    s.w0 = -0.5;
    s.w = {1.2, 0.7};
    s.w_d = 0.0;
    s.validate();
    double diff = cika::observational_conditional_diff(s, 0);
    CHECK(diff == doctest::Approx(cika::true_effect(s, 0)).epsilon(1e-12));

    // D affects p directly but no backdoor through m: adjustment still exact.
    s.w_d = 2.5;
    CHECK(std::fabs(cika::interventional_distribution(s, 0, 1) -
                    cika::backdoor_adjusted(s, 0, 1)) < 1e-12);

    // Single difficulty level: adjustment reduces to the plain conditional.
    DiscreteStudentScm single = pair_fixture();
    single.difficulty_support = {0.5};
    single.difficulty_pmf = {1.0};
    single.validate();
    double plain_num = 0.0, plain_den = 0.0;
    {
        // Conditional P(p=1 | m_0 = 1) at the single level, by enumeration.
        auto p_m = [&](int j, double d) {
            return reference::sigmoid(single.mastery_a[j] - single.mastery_b[j] * d);
        };
        double d = 0.5;
        for (int m1 : {0, 1}) {
            double pr = p_m(0, d) * (m1 ? p_m(1, d) : 1.0 - p_m(1, d));
            double eta = single.w0 + single.w[0] + single.w[1] * m1 - single.w_d * d;
            plain_num += pr * reference::sigmoid(eta);
            plain_den += pr;
        }
    }
    CHECK(cika::backdoor_adjusted(single, 0, 1) ==
          doctest::Approx(plain_num / plain_den).epsilon(1e-12));
}

TEST_CASE("confounding bias grows strictly with the shared-cause weight") {
    auto s = pair_fixture();
    double prev = -1.0;
    for (double w_d : {0.0, 1.0, 2.0, 3.0, 4.0}) {
        s.w_d = w_d;
        double bias = std::fabs(cika::observational_conditional_diff(s, 0) -
                                cika::true_effect(s, 0));
        CHECK(bias > prev);
        prev = bias;
    }
}

TEST_CASE("observational sampling matches the enumerated marginal") {
    auto s = pair_fixture();
    const int n = 100000;
    auto samples = cika::sample_observational(s, n, 7);
    REQUIRE(samples.size() == static_cast<std::size_t>(n));
    double p_hat = 0.0;
    for (const auto& smp : samples) {
        REQUIRE(smp.masteries.size() == 2);
        p_hat += smp.outcome;
    }
    p_hat /= n;
    const double truth = 0.346312920845617;
    const double sigma = std::sqrt(truth * (1.0 - truth) / n);
    CHECK(std::fabs(p_hat - truth) < 3.0 * sigma);
    CHECK_THROWS(cika::sample_observational(s, 0, 7));
}

TEST_CASE("do-sampling semantics") {
    auto s = pair_fixture();

    SUBCASE("empty clamp reproduces the observational stream bit for bit") {
        auto obs = cika::sample_observational(s, 500, 11);
        auto empty_do = cika::sample_do(s, {}, 500, 11);
        for (std::size_t i = 0; i < obs.size(); ++i) {
            CHECK(obs[i].outcome == empty_do[i].outcome);
            CHECK(obs[i].masteries == empty_do[i].masteries);
            CHECK(obs[i].latent_difficulty_index == empty_do[i].latent_difficulty_index);
        }
    }

    SUBCASE("clamping everything leaves only the direct difficulty path") {
        const int n = 40000;
        auto samples = cika::sample_do(s, {{0, 1}, {1, 1}}, n, 13);
        double p_hat = 0.0;
        for (const auto& smp : samples) p_hat += smp.outcome;
        p_hat /= n;
        double truth = 0.0;
        for (std::size_t k = 0; k < s.difficulty_support.size(); ++k) {
            truth += s.difficulty_pmf[k] *
                     reference::sigmoid(s.w0 + s.w[0] + s.w[1] -
                                        s.w_d * s.difficulty_support[k]);
        }
        CHECK(std::fabs(p_hat - truth) < 3.0 * std::sqrt(truth * (1.0 - truth) / n));
    }

    SUBCASE("clamping a mechanism-certain coordinate changes nothing statistically") {
        auto t = s;
        t.mastery_a[0] = 50.0;  // mastery 0 is 1 almost surely
        t.mastery_b[0] = 0.0;
        const int n = 40000;
        auto obs = cika::sample_observational(t, n, 17);
        auto forced = cika::sample_do(t, {{0, 1}}, n, 18);
        double a = 0.0, b = 0.0;
        for (int i = 0; i < n; ++i) {
            a += obs[static_cast<std::size_t>(i)].outcome;
            b += forced[static_cast<std::size_t>(i)].outcome;
        }
        a /= n;
        b /= n;
        CHECK(std::fabs(a - b) < 3.0 * std::sqrt(2.0 * 0.25 / n));
    }

    SUBCASE("bad clamp requests are rejected") {
        CHECK_THROWS(cika::sample_do(s, {{5, 1}}, 10, 1));
        CHECK_THROWS(cika::sample_do(s, {{0, 2}}, 10, 1));
        CHECK_THROWS(cika::interventional_distribution(s, 0, 2));
    }
}

TEST_CASE("scm json round trip") {
    auto s = pair_fixture();
    auto j = s.to_json();
    auto back = DiscreteStudentScm::from_json(j);
    CHECK(back.concepts == s.concepts);
    CHECK(back.w == s.w);
    CHECK(back.w_d == s.w_d);
    CHECK(cika::observational_marginal(back) ==
          doctest::Approx(cika::observational_marginal(s)).epsilon(1e-15));

    auto bad = j;
    bad["difficulty_pmf"] = {0.5, 0.6};
    CHECK_THROWS(DiscreteStudentScm::from_json(bad));
}

// ---------------------------------------------------------------------------

namespace {

LinearSvarScm identity_svar(int dim) {
    LinearSvarScm s;
    s.b0 = Eigen::MatrixXd::Identity(dim, dim);
    s.noise_var = Eigen::VectorXd::Ones(dim);
    s.validate();
    return s;
}

} // namespace

TEST_CASE("identity system reproduces its own noise draws") {
    auto s = identity_svar(3);
    auto x = cika::simulate_svar(s, 5, {}, 99);
    for (int t = 1; t <= 5; ++t) {
        cika::Substream rng(99, "svar.noise", static_cast<std::uint64_t>(t));
        for (int i = 0; i < 3; ++i) {
            CHECK(x(t - 1, i) == doctest::Approx(rng.next_gaussian()).epsilon(1e-15));
        }
    }
}

TEST_CASE("zero noise and zero lags give an identically zero trajectory") {
    auto s = identity_svar(2);
    s.noise_var = Eigen::VectorXd::Zero(2);
    s.validate();
    auto x = cika::simulate_svar(s, 8, {}, 3);
    CHECK(x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deterministic lag-one system decays geometrically") {
    LinearSvarScm s;
    s.b0 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd b1(2, 2);
    b1 << 0.5, 0.0, 0.0, 0.25;
    s.lags = {b1};
    s.noise_var = Eigen::VectorXd::Zero(2);
    s.validate();
    // Kick coordinate 0 to 1 at t=1 via a clamp, then free decay at rate 0.5.
    auto x = cika::simulate_svar(s, 6, {{1, 0, 1.0}}, 5);
    for (int t = 2; t <= 6; ++t) {
        CHECK(x(t - 1, 0) == doctest::Approx(std::pow(0.5, t - 1)).epsilon(1e-12));
        CHECK(x(t - 1, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    }
}

TEST_CASE("clamping a coordinate for the whole run pins it exactly") {
    LinearSvarScm s;
    s.b0 = Eigen::MatrixXd::Identity(3, 3);
    s.b0(2, 0) = -0.4;  // outcome listens to coordinate 0
    s.noise_var = Eigen::VectorXd::Ones(3);
    s.validate();
    std::vector<cika::ClampEvent> schedule;
    for (int t = 1; t <= 7; ++t) schedule.push_back({t, 0, 1.0});
    auto x = cika::simulate_svar(s, 7, schedule, 21);
    for (int t = 0; t < 7; ++t) CHECK(x(t, 0) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS(cika::simulate_svar(s, 7, {{9, 0, 1.0}}, 1));
    CHECK_THROWS(cika::simulate_svar(s, 7, {{1, 5, 1.0}}, 1));
}

TEST_CASE("construction rejects broken systems") {
    LinearSvarScm s;
    s.b0 = Eigen::MatrixXd::Zero(2, 2);  // singular
    s.noise_var = Eigen::VectorXd::Ones(2);
    CHECK_THROWS(s.validate());

    LinearSvarScm ns;
    ns.b0 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Identity(2, 2) * 1.1;  // explosive
    ns.lags = {b1};
    ns.noise_var = Eigen::VectorXd::Ones(2);
    CHECK_THROWS(ns.validate());

    LinearSvarScm neg;
    neg.b0 = Eigen::MatrixXd::Identity(2, 2);
    neg.noise_var = Eigen::VectorXd::Ones(2);
    neg.noise_var(1) = -0.5;
    CHECK_THROWS(neg.validate());
}

TEST_CASE("reduced form covariance") {
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd nv(2);
    nv << 2.0, 3.0;
    Eigen::MatrixXd su = cika::reduced_form_covariance(eye, nv);
    CHECK(su(0, 0) == doctest::Approx(2.0));
    CHECK(su(1, 1) == doctest::Approx(3.0));
    CHECK(su(0, 1) == doctest::Approx(0.0).scale(1.0));

    // Hand-computed 2x2 oracle: B0 = [[1,0],[-0.5,1]], unit noise.
    Eigen::MatrixXd b0(2, 2);
    b0 << 1.0, 0.0, -0.5, 1.0;
    Eigen::MatrixXd got = cika::reduced_form_covariance(b0, Eigen::VectorXd::Ones(2));
    CHECK(got(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(got(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(got(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(got(1, 1) == doctest::Approx(1.25).epsilon(1e-12));

    // Scaling the noise scales the reduced form linearly.
    Eigen::MatrixXd scaled = cika::reduced_form_covariance(b0, 4.0 * Eigen::VectorXd::Ones(2));
    CHECK((scaled - 4.0 * got).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("structural pairs are not identified from the reduced form") {
    SUBCASE("the 45 degree rotation of the identity pair") {
        Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
        double c = std::cos(M_PI / 4.0), sn = std::sin(M_PI / 4.0);
        Eigen::MatrixXd rot(2, 2);
        rot << c, -sn, sn, c;
        auto w = cika::witness_with_rotation(eye, Eigen::VectorXd::Ones(2), rot);
        CHECK((w.b0_alt - rot.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((w.noise_cov_alt - eye).cwiseAbs().maxCoeff() < 1e-14);
        Eigen::MatrixXd su_alt = w.b0_alt.inverse() * w.noise_cov_alt *
                                 w.b0_alt.inverse().transpose();
        CHECK((su_alt - eye).norm() < 1e-12);
    }

    SUBCASE("seeded witnesses preserve the reduced form on random instances") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            cika::Substream rng(seed, "wit", 0);
            const int d = 2 + static_cast<int>(rng.next_below(4));
            // Diagonally dominant draws keep b0 well conditioned; otherwise
            // pure floating-point error in the two inversions below can
            // swamp the 1e-10 residual bound being tested.
            Eigen::MatrixXd b0 = Eigen::MatrixXd::Identity(d, d);
            for (int r = 0; r < d; ++r) {
                for (int cidx = 0; cidx < d; ++cidx) {
                    if (r != cidx) b0(r, cidx) = 0.3 * rng.next_gaussian() / d;
                }
            }
            Eigen::VectorXd nv(d);
            for (int i = 0; i < d; ++i) nv(i) = 0.2 + rng.next_unit();
            auto w = cika::nonidentifiability_witness(b0, nv, seed * 31 + 1);
            CHECK((w.b0_alt - b0).cwiseAbs().maxCoeff() >= 1e-3);
            Eigen::MatrixXd su = cika::reduced_form_covariance(b0, nv);
            Eigen::MatrixXd su_alt = w.b0_alt.inverse() * w.noise_cov_alt *
                                     w.b0_alt.inverse().transpose();
            CHECK((su_alt - su).norm() < 1e-10);
        }
    }

    SUBCASE("dimension one degenerates to the sign flip") {
        Eigen::MatrixXd b0(1, 1);
        b0 << 2.0;
        auto w = cika::nonidentifiability_witness(b0, Eigen::VectorXd::Ones(1), 9);
        CHECK(w.b0_alt(0, 0) == doctest::Approx(-2.0));
        Eigen::MatrixXd su = cika::reduced_form_covariance(b0, Eigen::VectorXd::Ones(1));
        Eigen::MatrixXd su_alt =
            cika::reduced_form_covariance(w.b0_alt, w.noise_cov_alt.diagonal());
        CHECK(su_alt(0, 0) == doctest::Approx(su(0, 0)).epsilon(1e-14));
    }
}

TEST_CASE("svar json round trip") {
    LinearSvarScm s;
    s.names = {"m1", "m2", "p"};
    s.b0 = Eigen::MatrixXd::Identity(3, 3);
    s.b0(2, 0) = -0.6;
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Zero(3, 3);
    b1(1, 0) = 0.3;
    s.lags = {b1};
    s.noise_var = Eigen::VectorXd::Ones(3);
    s.validate();
    auto j = s.to_json();
    auto back = LinearSvarScm::from_json(j);
    CHECK(back.names == s.names);
    CHECK(back.outcome == 2);
    CHECK((back.b0 - s.b0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.lags[0] - b1).cwiseAbs().maxCoeff() == 0.0);
}
