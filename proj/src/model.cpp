#include "t3/model.hpp"

#include <cmath>

namespace t3 {

namespace {

LinearLayer init_layer(int out, int in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    LinearLayer layer;
    layer.w.resize(out, in);
    for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) layer.w(i, j) = dist(rng);
    layer.b = Eigen::VectorXd::Zero(out);
    return layer;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw NonFiniteInput(std::string(what) + " contains NaN/Inf");
}

}  // namespace

ModelParams init_params(int input_dim, int hidden_dim, int feat_dim, int num_classes,
                        std::mt19937_64& rng) {
    ModelParams p;
    p.f1 = init_layer(hidden_dim, input_dim, rng);
    p.f2 = init_layer(feat_dim, hidden_dim, rng);
    p.mu = init_layer(num_classes, feat_dim, rng);
    p.sigma = init_layer(1, feat_dim, rng);
    return p;
}

ForwardResult forward(const ModelParams& params, const Eigen::MatrixXd& batch) {
    check_finite(batch, "forward input");
    if (batch.cols() != params.input_dim())
        throw DimMismatch("forward: batch has " + std::to_string(batch.cols()) +
                          " columns, model expects " + std::to_string(params.input_dim()));

    ForwardResult r;
    r.input = batch;
    r.z1 = (batch * params.f1.w.transpose()).rowwise() + params.f1.b.transpose();
    r.a1 = r.z1.cwiseMax(0.0);
    r.features = (r.a1 * params.f2.w.transpose()).rowwise() + params.f2.b.transpose();
    r.logits = (r.features * params.mu.w.transpose()).rowwise() + params.mu.b.transpose();
    r.raw_sigma = r.features * params.sigma.w.row(0).transpose() +
                  Eigen::VectorXd::Constant(batch.rows(), params.sigma.b(0));
    r.sigma = r.raw_sigma.array().exp().min(kSigmaMax).max(kSigmaMin);
    return r;
}

GradientSet zero_like(const ModelParams& params) {
    GradientSet g;
    g.f1 = {Eigen::MatrixXd::Zero(params.f1.w.rows(), params.f1.w.cols()),
            Eigen::VectorXd::Zero(params.f1.b.size())};
    g.f2 = {Eigen::MatrixXd::Zero(params.f2.w.rows(), params.f2.w.cols()),
            Eigen::VectorXd::Zero(params.f2.b.size())};
    g.mu = {Eigen::MatrixXd::Zero(params.mu.w.rows(), params.mu.w.cols()),
            Eigen::VectorXd::Zero(params.mu.b.size())};
    g.sigma = {Eigen::MatrixXd::Zero(params.sigma.w.rows(), params.sigma.w.cols()),
               Eigen::VectorXd::Zero(params.sigma.b.size())};
    return g;
}

GradientSet backward(const ModelParams& params, const ForwardResult& fwd,
                     const UpstreamGrads& upstream) {
    const Eigen::Index batch = fwd.input.rows();
    GradientSet g = zero_like(params);

    Eigen::MatrixXd d_feat = Eigen::MatrixXd::Zero(batch, params.feat_dim());
    if (upstream.d_features.size() > 0) d_feat = upstream.d_features;

    if (upstream.d_logits.size() > 0) {
        g.mu.w = upstream.d_logits.transpose() * fwd.features;
        g.mu.b = upstream.d_logits.colwise().sum().transpose();
        d_feat.noalias() += upstream.d_logits * params.mu.w;
    }

    if (upstream.d_sigma.size() > 0) {
        // d sigma / d raw = sigma inside the clamp window. At a clamp
        // boundary the gradient passes only when descent re-enters the
        // window, so the boundary is not an absorbing state.
        Eigen::VectorXd d_raw(batch);
        for (Eigen::Index i = 0; i < batch; ++i) {
            const double s = fwd.sigma(i);
            const double g = upstream.d_sigma(i) * s;
            if ((s <= kSigmaMin && g > 0.0) || (s >= kSigmaMax && g < 0.0))
                d_raw(i) = 0.0;
            else
                d_raw(i) = g;
        }
        g.sigma.w.row(0) = d_raw.transpose() * fwd.features;
        g.sigma.b(0) = d_raw.sum();
        d_feat.noalias() += d_raw * params.sigma.w.row(0);
    }

    g.f2.w = d_feat.transpose() * fwd.a1;
    g.f2.b = d_feat.colwise().sum().transpose();
    Eigen::MatrixXd d_a1 = d_feat * params.f2.w;
    // ReLU subgradient at 0 is taken as 0.
    Eigen::MatrixXd d_z1 = (fwd.z1.array() > 0.0).select(d_a1, 0.0);
    g.f1.w = d_z1.transpose() * fwd.input;
    g.f1.b = d_z1.colwise().sum().transpose();

    if (!g.f1.w.allFinite() || !g.f2.w.allFinite() || !g.mu.w.allFinite() ||
        !g.sigma.w.allFinite() || !g.f1.b.allFinite() || !g.f2.b.allFinite() ||
        !g.mu.b.allFinite() || !g.sigma.b.allFinite())
        throw NonFiniteGradient("backward produced NaN/Inf gradients");
    return g;
}

void accumulate(GradientSet& into, const GradientSet& grads) {
    into.f1.w += grads.f1.w;
    into.f1.b += grads.f1.b;
    into.f2.w += grads.f2.w;
    into.f2.b += grads.f2.b;
    into.mu.w += grads.mu.w;
    into.mu.b += grads.mu.b;
    into.sigma.w += grads.sigma.w;
    into.sigma.b += grads.sigma.b;
}

ModelParams sgd_step(const ModelParams& params, const GradientSet& grads, double lr) {
    ModelParams p = params;
    p.f1.w -= lr * grads.f1.w;
    p.f1.b -= lr * grads.f1.b;
    p.f2.w -= lr * grads.f2.w;
    p.f2.b -= lr * grads.f2.b;
    p.mu.w -= lr * grads.mu.w;
    p.mu.b -= lr * grads.mu.b;
    p.sigma.w -= lr * grads.sigma.w;
    p.sigma.b -= lr * grads.sigma.b;
    return p;
}

Eigen::VectorXd scaled_softmax(const Eigen::VectorXd& logits, double sigma) {
    if (!(sigma > 0.0)) throw NonPositiveSigma("scaled_softmax needs sigma > 0");
    Eigen::VectorXd scaled = logits / (sigma * sigma);
    const double m = scaled.maxCoeff();
    Eigen::VectorXd e = (scaled.array() - m).exp();
    return e / e.sum();
}

}  // namespace t3
