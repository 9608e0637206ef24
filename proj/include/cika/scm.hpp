#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace cika {

/// Student-knowledge structural causal model over binary concept masteries.
///
/// A latent difficulty D (finite support) is a common cause of every mastery
/// and of the outcome:
///   P(m_j = 1 | D) = logistic(a_j - b_j * D)
///   P(p = 1 | m, D) = logistic(w0 + sum_j w_j * m_j - w_d * D)
/// There are deliberately no mastery-to-mastery edges, so {D} is a valid
/// backdoor adjustment set for every concept -> outcome query.
struct DiscreteStudentScm {
    std::vector<std::string> concepts;
    std::vector<double> difficulty_support;  // levels in [0, 1]
    std::vector<double> difficulty_pmf;      // sums to 1 within 1e-12
    std::vector<double> mastery_a;
    std::vector<double> mastery_b;
    double w0 = 0.0;
    std::vector<double> w;
    double w_d = 0.0;

    int n_concepts() const { return static_cast<int>(concepts.size()); }

    /// Index of a concept name, or nullopt when absent.
    std::optional<int> concept_index(std::string_view name) const;

    /// Throws std::invalid_argument when any type invariant fails
    /// (size mismatches, pmf off by more than 1e-12, n > 16).
    void validate() const;

    static DiscreteStudentScm from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Sample {
    std::vector<std::uint8_t> masteries;
    int outcome = 0;
    /// Index into difficulty_support. Latent: estimators must not read it;
    /// it exists only for oracle-adjusted diagnostics.
    int latent_difficulty_index = 0;
};

/// Draws N independent (D, m, p) samples from the observational joint.
std::vector<Sample> sample_observational(const DiscreteStudentScm& scm, int count,
                                         std::uint64_t seed);

/// Draws N samples with the clamped masteries forced to the given values
/// (their incoming edge from D removed). An empty clamp map reproduces
/// sample_observational exactly, including the random stream.
std::vector<Sample> sample_do(const DiscreteStudentScm& scm,
                              const std::map<int, int>& clamped, int count,
                              std::uint64_t seed);

/// Exact P(p=1) under do(clamps), enumerated over support x free masteries.
/// logit_offset shifts the outcome link (used for lens modifiers).
double clamped_outcome_probability(const DiscreteStudentScm& scm,
                                   const std::map<int, int>& clamps,
                                   double logit_offset = 0.0);

/// Exact P(p=1 | do(concept = value)).
double interventional_distribution(const DiscreteStudentScm& scm, int concept_idx,
                                   int value);

/// Exact e* = P(p=1 | do(c=1)) - P(p=1 | do(c=0)).
double true_effect(const DiscreteStudentScm& scm, int concept_idx);

/// Exact observational marginal P(p=1), optionally with a logit offset.
double observational_marginal(const DiscreteStudentScm& scm,
                              double logit_offset = 0.0);

/// Exact observational conditional difference E[p|m_i=1] - E[p|m_i=0].
/// This is the confounded quantity the adjustment formulas exist to fix.
double observational_conditional_diff(const DiscreteStudentScm& scm, int concept_idx);

/// Backdoor-adjusted P(p=1 | do(concept = value)) computed from the
/// observational joint table: condition on (m_i = value, D), marginalize the
/// other masteries, then average over P(D). This never touches the
/// do-mechanism, so agreement with interventional_distribution is a real
/// check of the adjustment identity rather than of one shared code path.
double backdoor_adjusted(const DiscreteStudentScm& scm, int concept_idx, int value);

/// Per-concept exact mastery marginal P(m_j = 1).
double mastery_marginal(const DiscreteStudentScm& scm, int concept_idx);

// ---------------------------------------------------------------------------
// Linear structural VAR over (masteries..., p).

/// x_t solves b0 * x_t = sum_l lags[l] * x_{t-l-1} + eps_t with diagonal
/// noise covariance. The last coordinate is the outcome unless stated
/// otherwise at construction.
struct LinearSvarScm {
    std::vector<std::string> names;
    Eigen::MatrixXd b0;
    std::vector<Eigen::MatrixXd> lags;
    Eigen::VectorXd noise_var;  // diagonal of the noise covariance
    int outcome = -1;           // defaults to dim - 1 in validate()

    int dim() const { return static_cast<int>(b0.rows()); }
    int lag_count() const { return static_cast<int>(lags.size()); }

    /// Condition number of b0 (largest/smallest singular value).
    double b0_condition() const;

    /// Spectral radius of the companion matrix of B0^{-1} B_l.
    double companion_spectral_radius() const;

    /// Throws when b0 is non-square, ill-conditioned beyond 1e8, the system
    /// is non-stationary, or the noise variances are not all positive.
    void validate();

    static LinearSvarScm from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct ClampEvent {
    int time = 0;  // 1-based step index
    int coordinate = 0;
    double value = 0.0;
};

/// Simulates x_1..x_T from zero history. At clamped (time, coordinate)
/// pairs the coordinate's structural equation is replaced by the clamp
/// value before the remaining system is solved.
Eigen::MatrixXd simulate_svar(const LinearSvarScm& scm, int horizon,
                              const std::vector<ClampEvent>& interventions,
                              std::uint64_t seed);

/// Sigma_u = B0^{-1} Sigma_eps B0^{-T}.
Eigen::MatrixXd reduced_form_covariance(const Eigen::MatrixXd& b0,
                                        const Eigen::VectorXd& noise_var);

struct SvarWitness {
    Eigen::MatrixXd b0_alt;
    Eigen::MatrixXd noise_cov_alt;  // full matrix; need not be diagonal
    Eigen::MatrixXd rotation;
};

/// A distinct structural pair with the same reduced-form covariance,
/// built by rotating the whitened shocks with the given orthogonal matrix.
SvarWitness witness_with_rotation(const Eigen::MatrixXd& b0,
                                  const Eigen::VectorXd& noise_var,
                                  const Eigen::MatrixXd& rotation);

/// Seeded witness: draws Haar-random rotations until the alternative b0
/// differs from the input by at least 1e-3 in max norm. Dimension 1 has no
/// rotations, so the sign-flipped pair is returned instead.
SvarWitness nonidentifiability_witness(const Eigen::MatrixXd& b0,
                                       const Eigen::VectorXd& noise_var,
                                       std::uint64_t rotation_seed);

/// Haar-distributed orthogonal matrix (QR of a Gaussian draw).
Eigen::MatrixXd haar_orthogonal(int dim, std::uint64_t seed);

} // namespace cika
