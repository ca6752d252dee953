#pragma once

#include <random>

#include <Eigen/Dense>

#include "t3/errors.hpp"

namespace t3 {

struct LinearLayer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;  // out
};

/// Parameters of the three sub-networks: feature extractor f (two layers with
/// a ReLU in between), classifier head mu (linear) and uncertainty head sigma
/// (linear + positivity transform).
struct ModelParams {
    LinearLayer f1;     // input_dim -> hidden
    LinearLayer f2;     // hidden -> feat_dim
    LinearLayer mu;     // feat_dim -> C
    LinearLayer sigma;  // feat_dim -> 1

    int input_dim() const { return static_cast<int>(f1.w.cols()); }
    int hidden_dim() const { return static_cast<int>(f1.w.rows()); }
    int feat_dim() const { return static_cast<int>(f2.w.rows()); }
    int num_classes() const { return static_cast<int>(mu.w.rows()); }
};

/// Gradients mirror the parameter layout exactly.
using GradientSet = ModelParams;

/// sigma = exp(raw) clamped to [kSigmaMin, kSigmaMax]; the clamp zeroes the
/// gradient outside the interval.
constexpr double kSigmaMin = 1e-3;
constexpr double kSigmaMax = 1e3;

/// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ModelParams init_params(int input_dim, int hidden_dim, int feat_dim, int num_classes,
                        std::mt19937_64& rng);

struct ForwardResult {
    Eigen::MatrixXd features;   // B x feat_dim
    Eigen::MatrixXd logits;     // B x C
    Eigen::VectorXd sigma;      // B, strictly positive
    // cached intermediates for backward
    Eigen::MatrixXd input;      // B x input_dim
    Eigen::MatrixXd z1;         // B x hidden (pre-ReLU)
    Eigen::MatrixXd a1;         // B x hidden (post-ReLU)
    Eigen::VectorXd raw_sigma;  // B (pre-positivity)
};

/// Rows of `batch` are samples. Throws NonFiniteInput on NaN/Inf entries.
ForwardResult forward(const ModelParams& params, const Eigen::MatrixXd& batch);

/// Upstream partials of the scalar loss with respect to the forward outputs.
/// Zero-sized members are treated as all-zero.
struct UpstreamGrads {
    Eigen::MatrixXd d_logits;    // B x C
    Eigen::VectorXd d_sigma;     // B
    Eigen::MatrixXd d_features;  // B x feat_dim (paths that bypass the heads)
};

/// Exact parameter gradients for the loss described by `upstream`, evaluated
/// at the cached forward pass. Throws NonFiniteGradient if any entry diverged.
GradientSet backward(const ModelParams& params, const ForwardResult& fwd,
                     const UpstreamGrads& upstream);

void accumulate(GradientSet& into, const GradientSet& grads);
GradientSet zero_like(const ModelParams& params);

/// params - lr * grads, elementwise.
ModelParams sgd_step(const ModelParams& params, const GradientSet& grads, double lr);

/// Softmax of logits / sigma^2, computed with max subtraction.
Eigen::VectorXd scaled_softmax(const Eigen::VectorXd& logits, double sigma);

}  // namespace t3
