#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "t3/errors.hpp"

namespace t3 {

/// Geometry of one synthetic domain. All domains of a dataset share the same
/// canonical class centers; a domain shifts them by a rotation (applied to
/// consecutive coordinate pairs) plus a translation before sampling Gaussian
/// clusters around them.
struct DomainSpec {
    double angle = 0.0;            // radians, rotation of each coordinate pair
    Eigen::VectorXd translation;   // input_dim
    Eigen::MatrixXd centers;       // C x input_dim, canonical class centers
    double std_dev = 0.1;
    double label_noise = 0.0;      // probability of replacing a label
    int count = 0;

    void validate() const;
};

struct DomainData {
    Eigen::MatrixXd x;   // N x input_dim
    std::vector<int> y;  // N labels; the target's labels are evaluation-only
};

/// M labeled source domains plus one unlabeled target (labels retained for
/// evaluation).
struct DomainDataset {
    std::vector<DomainData> sources;
    DomainData target;
    int num_classes = 0;
    int input_dim = 0;
};

/// The last spec is the target. Sampling is class-balanced (counts per class
/// within +/- 1 before label noise) and deterministic per seed.
DomainDataset generate(const std::vector<DomainSpec>& specs, std::uint64_t seed);

/// x + r * epsilon with epsilon ~ N(0, I) drawn from `seed`; the noise draw
/// does not depend on r.
Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& samples, double r, std::uint64_t seed);

/// Canonical class centers: C points on the sphere of the given radius,
/// seeded. Shared by every domain of a dataset.
Eigen::MatrixXd make_class_centers(int num_classes, int input_dim, double radius,
                                   std::uint64_t seed);

}  // namespace t3
