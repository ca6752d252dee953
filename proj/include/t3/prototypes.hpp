#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "t3/errors.hpp"
#include "t3/tensor3.hpp"

namespace t3 {

/// Per-domain, per-class feature centroids with EMA state. The target domain
/// is always the last one. A cell becomes valid when its class is first
/// observed and stays valid; invalid cells never feed the similarity kernel
/// directly (they are substituted by the cross-domain mean of that class).
struct PrototypeBank {
    int num_domains = 0;  // M sources + 1 target
    int num_classes = 0;
    int feat_dim = 0;
    double alpha = 0.3;   // EMA weight on the current batch
    double gamma = 0.05;  // Gaussian kernel bandwidth
    std::vector<Eigen::MatrixXd> protos;        // per domain: C x feat_dim
    std::vector<std::vector<std::uint8_t>> valid;  // per domain: C flags
};

PrototypeBank make_bank(int num_domains, int num_classes, int feat_dim, double alpha, double gamma);

/// Stack of per-domain similarity matrices, dims (C, C, M+1), sources first.
struct SimilarityTensor {
    Tensor3 g;
};

/// argmax class when its probability strictly exceeds tau, otherwise none.
/// Ties go to the lowest index.
std::optional<int> pseudo_label(const Eigen::VectorXd& probs, double tau);

/// Per-(domain, class) mean features of one batch plus presence mask.
struct BatchPrototypes {
    std::vector<Eigen::MatrixXd> means;              // per domain: C x feat_dim
    std::vector<std::vector<std::uint8_t>> present;  // per domain: C
    std::vector<std::vector<int>> counts;            // per domain: C
};

/// Labels of -1 mark samples without a (pseudo) label; they are skipped.
BatchPrototypes batch_prototypes(const std::vector<Eigen::MatrixXd>& features_per_domain,
                                 const std::vector<std::vector<int>>& labels_per_domain,
                                 int num_domains, int num_classes);

/// EMA update: present cells become alpha * batch_mean + (1 - alpha) * old;
/// first observations take the batch mean directly; absent cells keep their
/// value.
PrototypeBank ema_update(const PrototypeBank& bank, const BatchPrototypes& batch);

/// The prototypes actually used to build similarity matrices, with invalid
/// cells substituted and the adjoint bookkeeping needed to route gradients
/// back to batch means.
struct EffectiveProtos {
    std::vector<Eigen::MatrixXd> protos;  // per domain: C x feat_dim
    /// protos[m].row(c) = sum_k weight_k * bank.protos[source_k.domain].row(c)
    struct Source {
        int domain;
        double weight;
    };
    std::vector<std::vector<std::vector<Source>>> sources;  // [domain][class]
};

/// When target_use_source_mean is set, every target cell is substituted by
/// the mean of the valid source prototypes of its class (warm-up behavior)
/// and the target does not contribute to substitutions elsewhere.
EffectiveProtos effective_prototypes(const PrototypeBank& bank, bool target_use_source_mean);

/// Gaussian-kernel similarity matrix of one domain's prototype rows:
/// entries exp(-||f_i - f_j||^2 / (2 gamma^2)), floored at 1e-300 so they
/// stay inside (0, 1].
Eigen::MatrixXd similarity_from_protos(const Eigen::MatrixXd& protos, double gamma);

/// Similarity matrix of domain m. Requires at least two valid classes in m.
Eigen::MatrixXd similarity_matrix(const PrototypeBank& bank, int domain);

/// Stacks similarity_matrix(bank, m) for every domain along mode 3.
SimilarityTensor assemble_tensor(const PrototypeBank& bank);

SimilarityTensor assemble_from_protos(const std::vector<Eigen::MatrixXd>& protos, double gamma);

/// Adjoint of similarity_from_protos over all domains: given d(loss)/dG per
/// slice, returns d(loss)/d(protos) per domain.
std::vector<Eigen::MatrixXd> kernel_backward(const std::vector<Eigen::MatrixXd>& protos,
                                             const std::vector<Eigen::MatrixXd>& g_slices,
                                             const std::vector<Eigen::MatrixXd>& d_g_slices,
                                             double gamma);

}  // namespace t3
