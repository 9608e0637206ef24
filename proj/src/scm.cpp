#include "cika/scm.hpp"

#include <cmath>
#include <stdexcept>

#include "cika/rng.hpp"

namespace cika {

namespace {

constexpr int kMaxConcepts = 16;
constexpr double kMaxCondition = 1e8;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

std::optional<int> DiscreteStudentScm::concept_index(std::string_view name) const {
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        if (concepts[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

void DiscreteStudentScm::validate() const {
    const std::size_t n = concepts.size();
    if (n < 1 || n > kMaxConcepts) {
        throw std::invalid_argument("DiscreteStudentScm: need 1..16 concepts");
    }
    if (mastery_a.size() != n || mastery_b.size() != n || w.size() != n) {
        throw std::invalid_argument("DiscreteStudentScm: per-concept vectors must match concept count");
    }
    if (difficulty_support.empty() || difficulty_support.size() != difficulty_pmf.size()) {
        throw std::invalid_argument("DiscreteStudentScm: difficulty grid is empty or mismatched");
    }
    double total = 0.0;
    for (double q : difficulty_pmf) {
        if (q < 0.0) throw std::invalid_argument("DiscreteStudentScm: negative pmf entry");
        total += q;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("DiscreteStudentScm: pmf must sum to 1 within 1e-12");
    }
}

DiscreteStudentScm DiscreteStudentScm::from_json(const nlohmann::json& j) {
    DiscreteStudentScm s;
    s.concepts = j.at("concepts").get<std::vector<std::string>>();
    s.difficulty_support = j.at("difficulty_support").get<std::vector<double>>();
    s.difficulty_pmf = j.at("difficulty_pmf").get<std::vector<double>>();
    s.mastery_a = j.at("mastery_a").get<std::vector<double>>();
    s.mastery_b = j.at("mastery_b").get<std::vector<double>>();
    s.w0 = j.at("w0").get<double>();
    s.w = j.at("w").get<std::vector<double>>();
    s.w_d = j.at("w_d").get<double>();
    s.validate();
    return s;
}

nlohmann::json DiscreteStudentScm::to_json() const {
    return {{"concepts", concepts},
            {"difficulty_support", difficulty_support},
            {"difficulty_pmf", difficulty_pmf},
            {"mastery_a", mastery_a},
            {"mastery_b", mastery_b},
            {"w0", w0},
            {"w", w},
            {"w_d", w_d}};
}

namespace {

void check_clamps(const DiscreteStudentScm& scm, const std::map<int, int>& clamped) {
    for (const auto& [idx, val] : clamped) {
        if (idx < 0 || idx >= scm.n_concepts()) {
            throw std::out_of_range("sample_do: unknown concept index");
        }
        if (val != 0 && val != 1) {
            throw std::invalid_argument("sample_do: clamp values must be 0 or 1");
        }
    }
}

} // namespace

std::vector<Sample> sample_do(const DiscreteStudentScm& scm,
                              const std::map<int, int>& clamped, int count,
                              std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_do: count must be >= 1");
    check_clamps(scm, clamped);
    const int n = scm.n_concepts();
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        // One substream per sample keeps the observational and empty-clamp
        // streams identical and makes the draw replayable in isolation.
        Substream rng(seed, "scm.sample", static_cast<std::uint64_t>(i));
        double u = rng.next_unit();
        int d_idx = 0;
        double acc = 0.0;
        for (std::size_t k = 0; k < scm.difficulty_pmf.size(); ++k) {
            acc += scm.difficulty_pmf[k];
            if (u < acc) {
                d_idx = static_cast<int>(k);
                break;
            }
            d_idx = static_cast<int>(k);
        }
        const double d = scm.difficulty_support[static_cast<std::size_t>(d_idx)];
        Sample s;
        s.latent_difficulty_index = d_idx;
        s.masteries.resize(static_cast<std::size_t>(n));
        double eta = scm.w0 - scm.w_d * d;
        for (int jj = 0; jj < n; ++jj) {
            auto it = clamped.find(jj);
            int m;
            if (it != clamped.end()) {
                m = it->second;
            } else {
                m = rng.next_bernoulli(logistic(scm.mastery_a[static_cast<std::size_t>(jj)] -
                                                scm.mastery_b[static_cast<std::size_t>(jj)] * d))
                        ? 1
                        : 0;
            }
            s.masteries[static_cast<std::size_t>(jj)] = static_cast<std::uint8_t>(m);
            eta += scm.w[static_cast<std::size_t>(jj)] * m;
        }
        s.outcome = rng.next_bernoulli(logistic(eta)) ? 1 : 0;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> sample_observational(const DiscreteStudentScm& scm, int count,
                                         std::uint64_t seed) {
    return sample_do(scm, {}, count, seed);
}

double clamped_outcome_probability(const DiscreteStudentScm& scm,
                                   const std::map<int, int>& clamps,
                                   double logit_offset) {
    check_clamps(scm, clamps);
    const int n = scm.n_concepts();
    double total = 0.0;
    for (std::size_t k = 0; k < scm.difficulty_support.size(); ++k) {
        const double d = scm.difficulty_support[k];
        const double pd = scm.difficulty_pmf[k];
        if (pd == 0.0) continue;
        double acc = 0.0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            double pm = 1.0;
            bool consistent = true;
            double eta = scm.w0 - scm.w_d * d + logit_offset;
            for (int j = 0; j < n; ++j) {
                const int m = (mask >> j) & 1u;
                auto it = clamps.find(j);
                if (it != clamps.end()) {
                    if (m != it->second) {
                        consistent = false;
                        break;
                    }
                } else {
                    const double pj = logistic(scm.mastery_a[static_cast<std::size_t>(j)] -
                                               scm.mastery_b[static_cast<std::size_t>(j)] * d);
                    pm *= m ? pj : 1.0 - pj;
                }
                eta += scm.w[static_cast<std::size_t>(j)] * m;
            }
            if (consistent) acc += pm * logistic(eta);
        }
        total += pd * acc;
    }
    return total;
}

double interventional_distribution(const DiscreteStudentScm& scm, int concept_idx,
                                   int value) {
    if (value != 0 && value != 1) {
        throw std::invalid_argument("interventional_distribution: value must be 0 or 1");
    }
    return clamped_outcome_probability(scm, {{concept_idx, value}});
}

double true_effect(const DiscreteStudentScm& scm, int concept_idx) {
    return interventional_distribution(scm, concept_idx, 1) -
           interventional_distribution(scm, concept_idx, 0);
}

double observational_marginal(const DiscreteStudentScm& scm, double logit_offset) {
    return clamped_outcome_probability(scm, {}, logit_offset);
}

namespace {

// Full observational joint, tabulated: cell (d, mask) holds P(D=d, m=mask)
// and P(p=1 | m, D). The adjustment-formula path works only off this table.
struct JointTable {
    std::size_t levels = 0;
    int n = 0;
    std::vector<double> prob;       // levels * 2^n
    std::vector<double> p_outcome;  // levels * 2^n

    double& at(std::size_t d, std::uint32_t mask, std::vector<double>& v) {
        return v[d * (1u << n) + mask];
    }
};

JointTable build_joint(const DiscreteStudentScm& scm) {
    JointTable t;
    t.levels = scm.difficulty_support.size();
    t.n = scm.n_concepts();
    t.prob.assign(t.levels << t.n, 0.0);
    t.p_outcome.assign(t.levels << t.n, 0.0);
    for (std::size_t k = 0; k < t.levels; ++k) {
        const double d = scm.difficulty_support[k];
        for (std::uint32_t mask = 0; mask < (1u << t.n); ++mask) {
            double pm = scm.difficulty_pmf[k];
            double eta = scm.w0 - scm.w_d * d;
            for (int j = 0; j < t.n; ++j) {
                const int m = (mask >> j) & 1u;
                const double pj = logistic(scm.mastery_a[static_cast<std::size_t>(j)] -
                                           scm.mastery_b[static_cast<std::size_t>(j)] * d);
                pm *= m ? pj : 1.0 - pj;
                eta += scm.w[static_cast<std::size_t>(j)] * m;
            }
            t.prob[(k << t.n) + mask] = pm;
            t.p_outcome[(k << t.n) + mask] = logistic(eta);
        }
    }
    return t;
}

} // namespace

double observational_conditional_diff(const DiscreteStudentScm& scm, int concept_idx) {
    if (concept_idx < 0 || concept_idx >= scm.n_concepts()) {
        throw std::out_of_range("observational_conditional_diff: concept index");
    }
    JointTable t = build_joint(scm);
    double num[2] = {0.0, 0.0}, den[2] = {0.0, 0.0};
    for (std::size_t k = 0; k < t.levels; ++k) {
        for (std::uint32_t mask = 0; mask < (1u << t.n); ++mask) {
            const int v = (mask >> concept_idx) & 1u;
            const double pr = t.prob[(k << t.n) + mask];
            num[v] += pr * t.p_outcome[(k << t.n) + mask];
            den[v] += pr;
        }
    }
    if (den[0] == 0.0 || den[1] == 0.0) {
        throw std::domain_error("observational_conditional_diff: degenerate conditioning cell");
    }
    return num[1] / den[1] - num[0] / den[0];
}

double backdoor_adjusted(const DiscreteStudentScm& scm, int concept_idx, int value) {
    if (concept_idx < 0 || concept_idx >= scm.n_concepts()) {
        throw std::out_of_range("backdoor_adjusted: concept index");
    }
    if (value != 0 && value != 1) {
        throw std::invalid_argument("backdoor_adjusted: value must be 0 or 1");
    }
    JointTable t = build_joint(scm);
    double total = 0.0;
    for (std::size_t k = 0; k < t.levels; ++k) {
        const double pd = scm.difficulty_pmf[k];
        if (pd == 0.0) continue;
        // P(p=1 | m_i = value, D = d) from the joint, other masteries
        // marginalized out.
        double num = 0.0, den = 0.0;
        for (std::uint32_t mask = 0; mask < (1u << t.n); ++mask) {
            if (((mask >> concept_idx) & 1u) != static_cast<std::uint32_t>(value)) continue;
            const double pr = t.prob[(k << t.n) + mask];
            num += pr * t.p_outcome[(k << t.n) + mask];
            den += pr;
        }
        if (den == 0.0) {
            throw std::domain_error("backdoor_adjusted: conditioning cell has zero mass");
        }
        total += pd * (num / den);
    }
    return total;
}

double mastery_marginal(const DiscreteStudentScm& scm, int concept_idx) {
    if (concept_idx < 0 || concept_idx >= scm.n_concepts()) {
        throw std::out_of_range("mastery_marginal: concept index");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < scm.difficulty_support.size(); ++k) {
        total += scm.difficulty_pmf[k] *
                 logistic(scm.mastery_a[static_cast<std::size_t>(concept_idx)] -
                          scm.mastery_b[static_cast<std::size_t>(concept_idx)] *
                              scm.difficulty_support[k]);
    }
    return total;
}

// ---------------------------------------------------------------------------

double LinearSvarScm::b0_condition() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b0);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return sv(0) / sv(sv.size() - 1);
}

double LinearSvarScm::companion_spectral_radius() const {
    const int d = dim();
    const int l = lag_count();
    if (l == 0) return 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b0);
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d * l, d * l);
    for (int k = 0; k < l; ++k) {
        comp.block(0, k * d, d, d) = lu.solve(lags[static_cast<std::size_t>(k)]);
    }
    if (l > 1) {
        comp.block(d, 0, d * (l - 1), d * (l - 1)) =
            Eigen::MatrixXd::Identity(d * (l - 1), d * (l - 1));
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    double radius = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        radius = std::max(radius, std::abs(es.eigenvalues()(i)));
    }
    return radius;
}

void LinearSvarScm::validate() {
    if (b0.rows() != b0.cols() || b0.rows() < 1) {
        throw std::invalid_argument("LinearSvarScm: b0 must be square and nonempty");
    }
    const int d = dim();
    for (const auto& l : lags) {
        if (l.rows() != d || l.cols() != d) {
            throw std::invalid_argument("LinearSvarScm: lag matrix dimension mismatch");
        }
    }
    if (noise_var.size() != d) {
        throw std::invalid_argument("LinearSvarScm: noise variance dimension mismatch");
    }
    for (int i = 0; i < d; ++i) {
        // Zero is allowed so deterministic decay fixtures can be expressed;
        // the witness construction separately insists on positive variances.
        if (!(noise_var(i) >= 0.0)) {
            throw std::invalid_argument("LinearSvarScm: noise variances must be nonnegative");
        }
    }
    if (!names.empty() && static_cast<int>(names.size()) != d) {
        throw std::invalid_argument("LinearSvarScm: name count mismatch");
    }
    if (outcome < 0) outcome = d - 1;
    if (outcome >= d) throw std::invalid_argument("LinearSvarScm: outcome index out of range");
    const double cond = b0_condition();
    if (!(cond < kMaxCondition)) {
        throw std::invalid_argument("LinearSvarScm: b0 condition number exceeds 1e8");
    }
    const double radius = companion_spectral_radius();
    if (!(radius < 1.0)) {
        throw std::invalid_argument("LinearSvarScm: non-stationary (companion spectral radius >= 1)");
    }
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::invalid_argument("matrix_from_json: empty matrix");
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) {
            throw std::invalid_argument("matrix_from_json: ragged rows");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

LinearSvarScm LinearSvarScm::from_json(const nlohmann::json& j) {
    LinearSvarScm s;
    s.b0 = matrix_from_json(j.at("b0"));
    for (const auto& l : j.value("lags", nlohmann::json::array())) {
        s.lags.push_back(matrix_from_json(l));
    }
    auto nv = j.at("noise_var").get<std::vector<double>>();
    s.noise_var = Eigen::Map<Eigen::VectorXd>(nv.data(), static_cast<Eigen::Index>(nv.size()));
    s.names = j.value("names", std::vector<std::string>{});
    s.outcome = j.value("outcome", -1);
    s.validate();
    return s;
}

nlohmann::json LinearSvarScm::to_json() const {
    nlohmann::json lag_arr = nlohmann::json::array();
    for (const auto& l : lags) lag_arr.push_back(matrix_to_json(l));
    std::vector<double> nv(noise_var.data(), noise_var.data() + noise_var.size());
    return {{"b0", matrix_to_json(b0)},
            {"lags", lag_arr},
            {"noise_var", nv},
            {"names", names},
            {"outcome", outcome}};
}

Eigen::MatrixXd simulate_svar(const LinearSvarScm& scm, int horizon,
                              const std::vector<ClampEvent>& interventions,
                              std::uint64_t seed) {
    const int d = scm.dim();
    const int l = scm.lag_count();
    if (horizon < l + 1) {
        throw std::invalid_argument("simulate_svar: horizon must be >= lag count + 1");
    }
    std::map<int, std::vector<std::pair<int, double>>> schedule;
    for (const auto& ev : interventions) {
        if (ev.time < 1 || ev.time > horizon) {
            throw std::out_of_range("simulate_svar: intervention time outside 1..T");
        }
        if (ev.coordinate < 0 || ev.coordinate >= d) {
            throw std::out_of_range("simulate_svar: intervention coordinate out of range");
        }
        schedule[ev.time].emplace_back(ev.coordinate, ev.value);
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> base_lu(scm.b0);
    Eigen::VectorXd noise_sd = scm.noise_var.array().sqrt();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(horizon + l, d);  // rows 0..l-1 are history

    for (int t = 1; t <= horizon; ++t) {
        Substream rng(seed, "svar.noise", static_cast<std::uint64_t>(t));
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < l; ++k) {
            rhs += scm.lags[static_cast<std::size_t>(k)] * x.row(l + t - 2 - k).transpose();
        }
        for (int i = 0; i < d; ++i) rhs(i) += noise_sd(i) * rng.next_gaussian();

        auto it = schedule.find(t);
        if (it == schedule.end()) {
            x.row(l + t - 1) = base_lu.solve(rhs).transpose();
        } else {
            Eigen::MatrixXd a = scm.b0;
            for (const auto& [coord, value] : it->second) {
                a.row(coord).setZero();
                a(coord, coord) = 1.0;
                rhs(coord) = value;
            }
            x.row(l + t - 1) = a.partialPivLu().solve(rhs).transpose();
        }
    }
    return x.bottomRows(horizon);
}

Eigen::MatrixXd reduced_form_covariance(const Eigen::MatrixXd& b0,
                                        const Eigen::VectorXd& noise_var) {
    if (b0.rows() != b0.cols() || b0.rows() != noise_var.size()) {
        throw std::invalid_argument("reduced_form_covariance: dimension mismatch");
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b0);
    Eigen::MatrixXd inv = lu.inverse();
    return inv * noise_var.asDiagonal() * inv.transpose();
}

SvarWitness witness_with_rotation(const Eigen::MatrixXd& b0,
                                  const Eigen::VectorXd& noise_var,
                                  const Eigen::MatrixXd& rotation) {
    const Eigen::Index d = b0.rows();
    if (rotation.rows() != d || rotation.cols() != d) {
        throw std::invalid_argument("witness_with_rotation: rotation dimension mismatch");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(noise_var(i) > 0.0)) {
            throw std::invalid_argument("witness_with_rotation: whitening needs positive variances");
        }
    }
    // Whiten the shocks (S^{-1} eps has identity covariance), rotate them by
    // Q, and fold both maps into the structural matrix. The new pair
    // (Q^T S^{-1} B0, I) reproduces the reduced form exactly:
    //   (B0^{-1} S Q)(B0^{-1} S Q)^T = B0^{-1} S S^T B0^{-T} = Sigma_u.
    Eigen::VectorXd inv_sd = noise_var.array().sqrt().inverse();
    SvarWitness w;
    w.rotation = rotation;
    w.b0_alt = rotation.transpose() * inv_sd.asDiagonal() * b0;
    w.noise_cov_alt = Eigen::MatrixXd::Identity(d, d);
    return w;
}

Eigen::MatrixXd haar_orthogonal(int dim, std::uint64_t seed) {
    Eigen::MatrixXd g(dim, dim);
    Substream rng(seed, "svar.haar", 0);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) g(r, c) = rng.next_gaussian();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix the sign convention so the distribution is Haar.
    for (int i = 0; i < dim; ++i) {
        if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    }
    return q;
}

SvarWitness nonidentifiability_witness(const Eigen::MatrixXd& b0,
                                       const Eigen::VectorXd& noise_var,
                                       std::uint64_t rotation_seed) {
    const Eigen::Index d = b0.rows();
    if (d == 1) {
        SvarWitness w;
        w.b0_alt = -b0;
        w.noise_cov_alt = noise_var.asDiagonal();
        w.rotation = -Eigen::MatrixXd::Identity(1, 1);
        return w;
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
        Eigen::MatrixXd q =
            haar_orthogonal(static_cast<int>(d), rotation_seed + static_cast<std::uint64_t>(attempt));
        SvarWitness w = witness_with_rotation(b0, noise_var, q);
        if ((w.b0_alt - b0).cwiseAbs().maxCoeff() >= 1e-3) return w;
    }
    throw std::runtime_error("nonidentifiability_witness: could not find a distinct rotation");
}

} // namespace cika
