#include "t3/objective.hpp"

#include <cmath>

namespace t3 {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

void check_distribution(const Eigen::VectorXd& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (!(p(i) >= 0.0) || p(i) > 1.0 + 1e-9)
            throw InvalidDistribution("probability entry out of range");
    if (std::abs(p.sum() - 1.0) > 1e-6)
        throw InvalidDistribution("probabilities sum to " + std::to_string(p.sum()));
}

}  // namespace

double cross_entropy(const Eigen::VectorXd& logits, int label) {
    return -logits(label) + log_sum_exp(logits);
}

double uncertainty_ce(const Eigen::VectorXd& logits, double sigma, int label) {
    if (!(sigma > 0.0)) throw NonPositiveSigma("uncertainty_ce needs sigma > 0");
    return cross_entropy(logits, label) / (sigma * sigma) + std::log(sigma);
}

double exact_vs_approx_gap(const Eigen::VectorXd& logits, double sigma, int label) {
    if (!(sigma > 0.0)) throw NonPositiveSigma("exact_vs_approx_gap needs sigma > 0");
    const double inv_s2 = 1.0 / (sigma * sigma);
    const double exact = -inv_s2 * logits(label) + log_sum_exp(logits * inv_s2);
    return std::abs(exact - uncertainty_ce(logits, sigma, label));
}

double batch_cls_loss(const std::vector<Eigen::MatrixXd>& logits_per_domain,
                      const std::vector<Eigen::VectorXd>& sigma_per_domain,
                      const std::vector<std::vector<int>>& labels_per_domain) {
    const std::size_t domains = logits_per_domain.size();
    if (domains == 0) throw EmptyDomainBatch("batch_cls_loss needs at least one domain");
    if (sigma_per_domain.size() != domains || labels_per_domain.size() != domains)
        throw DimMismatch("batch_cls_loss: per-domain lists differ in length");

    double outer = 0.0;
    for (std::size_t m = 0; m < domains; ++m) {
        const Eigen::Index n = logits_per_domain[m].rows();
        if (n == 0) throw EmptyDomainBatch("domain " + std::to_string(m) + " has no samples");
        double inner = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            inner += uncertainty_ce(logits_per_domain[m].row(i).transpose(), sigma_per_domain[m](i),
                                    labels_per_domain[m][static_cast<std::size_t>(i)]);
        outer += inner / static_cast<double>(n);
    }
    return outer / static_cast<double>(domains);
}

double target_entropy(const Eigen::MatrixXd& prob_rows) {
    if (prob_rows.rows() == 0) throw EmptyDomainBatch("target_entropy needs at least one row");
    double total = 0.0;
    for (Eigen::Index i = 0; i < prob_rows.rows(); ++i) {
        Eigen::VectorXd p = prob_rows.row(i).transpose();
        check_distribution(p);
        double h = 0.0;
        for (Eigen::Index c = 0; c < p.size(); ++c)
            if (p(c) > 0.0) h -= p(c) * std::log(p(c));
        total += h;
    }
    return total / static_cast<double>(prob_rows.rows());
}

double coupling_loss(const Tensor3& a, const Tensor3& g, double eta) {
    if (eta < 0.0) throw NegativeThreshold("coupling_loss needs eta >= 0");
    return 0.5 * eta * frobenius_norm_sq(sub(a, g));
}

}  // namespace t3
