#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "t3/model.hpp"
#include "t3/objective.hpp"
#include "t3/prototypes.hpp"
#include "t3/synthdata.hpp"
#include "t3/tensor3.hpp"
#include "t3/tsvd.hpp"

namespace t3 {

struct TrainConfig {
    double lambda = 1000.0;  // low-rank weight
    double eta0 = 1e-3;      // initial penalty
    double eta_max = 1.0;
    double rho = 1.1;        // penalty growth rate
    double lr = 0.05;
    int batch_size = 128;    // per domain
    int epochs = 30;
    double tau = 0.9;        // pseudo-label confidence threshold
    double alpha = 0.3;      // EMA weight on the current batch
    double gamma = 0.05;     // kernel bandwidth
    double w_ent = 0.1;      // entropy weight
    int warmup_iters = 100;  // target slice uses source means before this
    std::uint64_t seed = 1;
    bool use_entropy = true;
    bool use_tlr = true;
    bool use_uncertainty = true;
    int hidden_dim = 64;
    int feat_dim = 32;

    void validate() const;
};

/// One iteration's mini-batches: batch_size samples per source plus
/// batch_size unlabeled target samples.
struct Batch {
    std::vector<Eigen::MatrixXd> source_x;
    std::vector<std::vector<int>> source_y;
    Eigen::MatrixXd target_x;
};

struct TrainState {
    ModelParams params;
    Tensor3 aux;            // auxiliary low-rank tensor, C x C x (M+1)
    bool aux_ready = false;  // aux is a copy of the first assembled G
    double eta = 0.0;
    long iter = 0;
    PrototypeBank bank;
    std::mt19937_64 rng;
};

/// min(rho * eta, eta_max).
double eta_step(double eta, double rho, double eta_max);

/// Everything one batch evaluation produces at fixed (bank, aux, eta): the
/// loss breakdown, exact parameter gradients, the EMA-updated bank and the
/// assembled similarity tensor. Pure in its arguments; finite-difference
/// tests probe it directly.
struct StepEval {
    LossBreakdown loss;
    GradientSet grads;
    PrototypeBank bank_after;
    Tensor3 g;
    Tensor3 aux_used;                // = *aux, or a copy of g when aux is null
    std::vector<double> mean_sigma;  // per domain, model-predicted sigma
    int pseudo_count = 0;
};

/// `aux` may be null on the first iteration; the coupling term then vanishes
/// because the auxiliary tensor is initialized to the assembled g itself.
StepEval evaluate_step(const ModelParams& params, const Batch& batch, const PrototypeBank& bank,
                       const Tensor3* aux, double eta, const TrainConfig& cfg, long iter);

/// One SGD step on the model at fixed aux; EMA-updates the prototype bank.
TrainState theta_step(const TrainState& state, const Batch& batch, const TrainConfig& cfg);

/// aux <- rotated_prox(G, lambda/eta), then the eta schedule advances.
TrainState aux_step(const TrainState& state, const TrainConfig& cfg);

struct MetricsRow {
    long iter = 0;
    double cls = 0.0;
    double entropy = 0.0;
    double coupling = 0.0;
    double tnn_g = 0.0;  // TNN(rotate(G))
    double tnn_a = 0.0;  // TNN(rotate(aux))
    double eta = 0.0;
    double target_acc = 0.0;
    std::vector<double> mean_sigma;
};

struct TrainResult {
    ModelParams params;
    PrototypeBank bank;
    std::vector<MetricsRow> metrics;
    bool diverged = false;
    std::string error;
};

/// Full alternating optimization. `on_metrics`, when given, receives each row
/// as soon as it exists, so partial logs survive a divergence abort.
TrainResult train(const TrainConfig& cfg, const DomainDataset& data,
                  const std::function<void(const MetricsRow&)>& on_metrics = {});

struct EvalResult {
    double accuracy = 0.0;
    std::vector<int> predictions;
    Eigen::VectorXd sigma;
};

/// Argmax of the unscaled softmax; sigma is reported, not used for prediction.
EvalResult evaluate(const ModelParams& params, const Eigen::MatrixXd& x,
                    const std::vector<int>& y);

Batch draw_batch(const DomainDataset& data, int batch_size, std::mt19937_64& rng);

}  // namespace t3
