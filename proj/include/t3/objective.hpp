#pragma once

#include <vector>

#include <Eigen/Dense>

#include "t3/errors.hpp"
#include "t3/tensor3.hpp"

namespace t3 {

/// Scalar loss terms of one training iteration. `tnn` is reported only; the
/// low-rank term is handled by the auxiliary-tensor update, not by gradient
/// descent, so it is excluded from `total`.
struct LossBreakdown {
    double cls = 0.0;       // uncertainty-weighted classification loss
    double entropy = 0.0;   // target entropy (unweighted; total applies w_ent)
    double coupling = 0.0;  // (eta/2) ||A - G||_F^2
    double tnn = 0.0;       // lambda * TNN(rotate(A))
    double total = 0.0;     // cls + w_ent * entropy + coupling
};

/// Stable cross-entropy -h[label] + log sum_c exp(h[c]) with unscaled logits.
double cross_entropy(const Eigen::VectorXd& logits, int label);

/// (1/sigma^2) * CE(logits, label) + log(sigma).
double uncertainty_ce(const Eigen::VectorXd& logits, double sigma, int label);

/// |exact negative log-likelihood of the sigma-scaled softmax - uncertainty_ce|;
/// the gap of the simplifying approximation, zero at sigma = 1. Test support.
double exact_vs_approx_gap(const Eigen::VectorXd& logits, double sigma, int label);

/// Mean over domains of the per-domain mean of uncertainty_ce (two-level
/// averaging, not a pooled mean). One row of logits per sample.
double batch_cls_loss(const std::vector<Eigen::MatrixXd>& logits_per_domain,
                      const std::vector<Eigen::VectorXd>& sigma_per_domain,
                      const std::vector<std::vector<int>>& labels_per_domain);

/// Mean Shannon entropy of the given probability rows, with 0*log 0 = 0.
double target_entropy(const Eigen::MatrixXd& prob_rows);

/// (eta/2) * ||a - g||_F^2.
double coupling_loss(const Tensor3& a, const Tensor3& g, double eta);

}  // namespace t3
