#include "t3/trainer.hpp"

#include <cmath>

namespace t3 {

namespace {

Eigen::VectorXd softmax_row(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

}  // namespace

void TrainConfig::validate() const {
    if (!(rho > 1.0)) throw ConfigError("rho must be > 1");
    if (!(eta0 > 0.0) || eta0 > eta_max) throw ConfigError("need 0 < eta0 <= eta_max");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(tau > 0.0) || !(tau < 1.0)) throw ConfigError("tau must be in (0, 1)");
    if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("alpha must be in (0, 1]");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (w_ent < 0.0) throw ConfigError("w_ent must be >= 0");
    if (warmup_iters < 0) throw ConfigError("warmup_iters must be >= 0");
    if (hidden_dim < 1 || feat_dim < 1) throw ConfigError("model dims must be positive");
}

double eta_step(double eta, double rho, double eta_max) {
    return std::min(rho * eta, eta_max);
}

StepEval evaluate_step(const ModelParams& params, const Batch& batch, const PrototypeBank& bank,
                       const Tensor3* aux, double eta, const TrainConfig& cfg, long iter) {
    const int num_sources = static_cast<int>(batch.source_x.size());
    const int num_domains = num_sources + 1;
    const int num_classes = params.num_classes();
    if (num_sources < 1) throw EmptyDomainBatch("need at least one source domain batch");
    if (bank.num_domains != num_domains) throw DimMismatch("bank/batch domain count mismatch");

    StepEval ev;

    // Forward passes, sources first, target last.
    std::vector<ForwardResult> fwd;
    fwd.reserve(num_domains);
    for (int m = 0; m < num_sources; ++m) fwd.push_back(forward(params, batch.source_x[m]));
    fwd.push_back(forward(params, batch.target_x));
    const ForwardResult& fwd_t = fwd.back();
    const Eigen::Index n_target = batch.target_x.rows();

    for (const ForwardResult& f : fwd)
        if (!f.logits.allFinite() || !f.features.allFinite())
            throw NonFiniteGradient("model outputs diverged");

    ev.mean_sigma.resize(num_domains);
    for (int m = 0; m < num_domains; ++m) ev.mean_sigma[m] = fwd[m].sigma.mean();

    // Effective sigmas: pinned to 1 when uncertainty weighting is off.
    std::vector<Eigen::VectorXd> sigma_eff(num_sources);
    for (int m = 0; m < num_sources; ++m)
        sigma_eff[m] = cfg.use_uncertainty ? fwd[m].sigma
                                           : Eigen::VectorXd::Ones(fwd[m].sigma.size());

    // Target predictive distribution (sigma-scaled softmax when uncertainty
    // weighting is on) and pseudo labels.
    Eigen::VectorXd sigma_t = cfg.use_uncertainty ? fwd_t.sigma
                                                  : Eigen::VectorXd::Ones(n_target);
    Eigen::MatrixXd target_probs(n_target, num_classes);
    std::vector<int> target_labels(static_cast<std::size_t>(n_target), -1);
    for (Eigen::Index i = 0; i < n_target; ++i) {
        Eigen::VectorXd p = scaled_softmax(fwd_t.logits.row(i).transpose(), sigma_t(i));
        target_probs.row(i) = p.transpose();
        if (auto c = pseudo_label(p, cfg.tau)) {
            target_labels[static_cast<std::size_t>(i)] = *c;
            ++ev.pseudo_count;
        }
    }

    // Prototypes: batch means -> EMA -> effective (substituted) prototypes.
    std::vector<Eigen::MatrixXd> feats;
    std::vector<std::vector<int>> labels;
    for (int m = 0; m < num_sources; ++m) {
        feats.push_back(fwd[m].features);
        labels.push_back(batch.source_y[m]);
    }
    feats.push_back(fwd_t.features);
    labels.push_back(target_labels);
    BatchPrototypes bp = batch_prototypes(feats, labels, num_domains, num_classes);
    ev.bank_after = ema_update(bank, bp);

    const bool warmup = iter < cfg.warmup_iters;
    EffectiveProtos eff = effective_prototypes(ev.bank_after, warmup);
    SimilarityTensor sim = assemble_from_protos(eff.protos, cfg.gamma);
    ev.g = sim.g;
    ev.aux_used = aux ? *aux : ev.g;

    // Loss terms.
    std::vector<Eigen::MatrixXd> src_logits;
    for (int m = 0; m < num_sources; ++m) src_logits.push_back(fwd[m].logits);
    ev.loss.cls = batch_cls_loss(src_logits, sigma_eff, batch.source_y);
    ev.loss.entropy = cfg.use_entropy ? target_entropy(target_probs) : 0.0;
    ev.loss.coupling = cfg.use_tlr ? coupling_loss(ev.aux_used, ev.g, eta) : 0.0;
    ev.loss.tnn = cfg.lambda * tensor_nuclear_norm(rotate(ev.aux_used));
    ev.loss.total = ev.loss.cls + cfg.w_ent * ev.loss.entropy + ev.loss.coupling;

    // --- gradients ---

    // Coupling gradient into the effective prototypes, routed back to each
    // domain's batch means. The EMA history term is a constant; only the
    // current batch's contribution carries gradient.
    std::vector<Eigen::MatrixXd> d_mean(
        num_domains, Eigen::MatrixXd::Zero(num_classes, params.feat_dim()));
    if (cfg.use_tlr) {
        std::vector<Eigen::MatrixXd> g_slices(num_domains), d_g(num_domains);
        for (int m = 0; m < num_domains; ++m) {
            g_slices[m].resize(num_classes, num_classes);
            d_g[m].resize(num_classes, num_classes);
            for (int i = 0; i < num_classes; ++i)
                for (int j = 0; j < num_classes; ++j) {
                    g_slices[m](i, j) = ev.g(i, j, m);
                    d_g[m](i, j) = eta * (ev.g(i, j, m) - ev.aux_used(i, j, m));
                }
        }
        std::vector<Eigen::MatrixXd> d_protos =
            kernel_backward(eff.protos, g_slices, d_g, cfg.gamma);

        std::vector<Eigen::MatrixXd> d_direct(
            num_domains, Eigen::MatrixXd::Zero(num_classes, params.feat_dim()));
        for (int m = 0; m < num_domains; ++m)
            for (int c = 0; c < num_classes; ++c)
                for (const auto& src : eff.sources[m][c])
                    d_direct[src.domain].row(c) += src.weight * d_protos[m].row(c);

        for (int m = 0; m < num_domains; ++m)
            for (int c = 0; c < num_classes; ++c) {
                if (!bp.present[m][c]) continue;
                const double coeff = bank.valid[m][c] ? bank.alpha : 1.0;
                d_mean[m].row(c) = coeff * d_direct[m].row(c);
            }
    }

    ev.grads = zero_like(params);
    const double inv_m = 1.0 / static_cast<double>(num_sources);

    for (int m = 0; m < num_sources; ++m) {
        const Eigen::Index n = batch.source_x[m].rows();
        UpstreamGrads up;
        up.d_logits = Eigen::MatrixXd::Zero(n, num_classes);
        up.d_sigma = Eigen::VectorXd::Zero(n);
        up.d_features = Eigen::MatrixXd::Zero(n, params.feat_dim());
        const double w = inv_m / static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = batch.source_y[m][static_cast<std::size_t>(i)];
            const double s = sigma_eff[m](i);
            Eigen::VectorXd p = softmax_row(fwd[m].logits.row(i).transpose());
            p(y) -= 1.0;
            up.d_logits.row(i) = (w / (s * s)) * p.transpose();
            if (cfg.use_uncertainty) {
                const double ce = cross_entropy(fwd[m].logits.row(i).transpose(), y);
                up.d_sigma(i) = w * (-2.0 * ce / (s * s * s) + 1.0 / s);
            }
            const int c = y;
            if (bp.counts[m][c] > 0)
                up.d_features.row(i) = d_mean[m].row(c) / static_cast<double>(bp.counts[m][c]);
        }
        accumulate(ev.grads, backward(params, fwd[m], up));
    }

    {
        UpstreamGrads up;
        up.d_logits = Eigen::MatrixXd::Zero(n_target, num_classes);
        up.d_sigma = Eigen::VectorXd::Zero(n_target);
        up.d_features = Eigen::MatrixXd::Zero(n_target, params.feat_dim());
        const int t = num_domains - 1;
        for (Eigen::Index i = 0; i < n_target; ++i) {
            if (cfg.use_entropy) {
                // Entropy of p = softmax(h / s^2): in scaled-logit space
                // dH/du_j = -p_j (log p_j + H); chain through u = h / s^2.
                Eigen::VectorXd p = target_probs.row(i).transpose();
                const double s = sigma_t(i);
                double ent = 0.0;
                for (Eigen::Index c = 0; c < p.size(); ++c)
                    if (p(c) > 0.0) ent -= p(c) * std::log(p(c));
                const double w = cfg.w_ent / static_cast<double>(n_target);
                double h_dot = 0.0;  // sum_j h_j p_j (log p_j + H)
                for (Eigen::Index c = 0; c < p.size(); ++c) {
                    if (p(c) <= 0.0) continue;
                    const double du = -p(c) * (std::log(p(c)) + ent);
                    up.d_logits(i, c) = w * du / (s * s);
                    h_dot += fwd_t.logits(i, c) * p(c) * (std::log(p(c)) + ent);
                }
                if (cfg.use_uncertainty) up.d_sigma(i) = w * 2.0 * h_dot / (s * s * s);
            }
            const int c = target_labels[static_cast<std::size_t>(i)];
            if (c >= 0 && bp.counts[t][c] > 0)
                up.d_features.row(i) = d_mean[t].row(c) / static_cast<double>(bp.counts[t][c]);
        }
        accumulate(ev.grads, backward(params, fwd_t, up));
    }

    if (!std::isfinite(ev.loss.total)) throw NonFiniteGradient("loss is not finite");
    return ev;
}

TrainState theta_step(const TrainState& state, const Batch& batch, const TrainConfig& cfg) {
    StepEval ev = evaluate_step(state.params, batch, state.bank,
                                state.aux_ready ? &state.aux : nullptr, state.eta, cfg, state.iter);
    TrainState out = state;
    out.params = sgd_step(state.params, ev.grads, cfg.lr);
    out.bank = ev.bank_after;
    if (!state.aux_ready) {
        out.aux = ev.aux_used;
        out.aux_ready = true;
    }
    return out;
}

TrainState aux_step(const TrainState& state, const TrainConfig& cfg) {
    const bool warmup = state.iter < cfg.warmup_iters;
    EffectiveProtos eff = effective_prototypes(state.bank, warmup);
    SimilarityTensor sim = assemble_from_protos(eff.protos, state.bank.gamma);
    TrainState out = state;
    out.aux = rotated_prox(sim.g, cfg.lambda / state.eta);
    out.aux_ready = true;
    out.eta = eta_step(state.eta, cfg.rho, cfg.eta_max);
    return out;
}

Batch draw_batch(const DomainDataset& data, int batch_size, std::mt19937_64& rng) {
    Batch batch;
    auto draw = [&](const DomainData& d, bool keep_labels) {
        std::uniform_int_distribution<Eigen::Index> pick(0, d.x.rows() - 1);
        Eigen::MatrixXd x(batch_size, d.x.cols());
        std::vector<int> y;
        for (int i = 0; i < batch_size; ++i) {
            const Eigen::Index idx = pick(rng);
            x.row(i) = d.x.row(idx);
            if (keep_labels) y.push_back(d.y[static_cast<std::size_t>(idx)]);
        }
        return std::make_pair(std::move(x), std::move(y));
    };
    for (const auto& src : data.sources) {
        auto [x, y] = draw(src, true);
        batch.source_x.push_back(std::move(x));
        batch.source_y.push_back(std::move(y));
    }
    auto [tx, ty] = draw(data.target, false);
    batch.target_x = std::move(tx);
    return batch;
}

TrainResult train(const TrainConfig& cfg, const DomainDataset& data,
                  const std::function<void(const MetricsRow&)>& on_metrics) {
    cfg.validate();
    if (data.sources.size() < 2) throw SpecInvalid("need at least two source domains");
    if (data.target.x.rows() == 0) throw SpecInvalid("target domain is empty");

    const int num_domains = static_cast<int>(data.sources.size()) + 1;

    TrainState st;
    st.rng.seed(cfg.seed);
    st.params = init_params(data.input_dim, cfg.hidden_dim, cfg.feat_dim, data.num_classes, st.rng);
    st.bank = make_bank(num_domains, data.num_classes, cfg.feat_dim, cfg.alpha, cfg.gamma);
    st.eta = cfg.eta0;

    Eigen::Index max_count = data.target.x.rows();
    for (const auto& src : data.sources) max_count = std::max(max_count, src.x.rows());
    const long iters_per_epoch =
        (static_cast<long>(max_count) + cfg.batch_size - 1) / cfg.batch_size;
    const long total_iters = static_cast<long>(cfg.epochs) * iters_per_epoch;

    TrainResult result;
    for (long it = 0; it < total_iters; ++it) {
        st.iter = it;
        Batch batch = draw_batch(data, cfg.batch_size, st.rng);

        MetricsRow row;
        row.iter = it;
        row.eta = st.eta;
        try {
            StepEval ev = evaluate_step(st.params, batch, st.bank,
                                        st.aux_ready ? &st.aux : nullptr, st.eta, cfg, st.iter);
            st.params = sgd_step(st.params, ev.grads, cfg.lr);
            st.bank = ev.bank_after;
            if (!st.aux_ready) {
                st.aux = ev.aux_used;
                st.aux_ready = true;
            }
            st = aux_step(st, cfg);

            row.cls = ev.loss.cls;
            row.entropy = ev.loss.entropy;
            row.coupling = ev.loss.coupling;
            row.tnn_g = tensor_nuclear_norm(rotate(ev.g));
            row.tnn_a = tensor_nuclear_norm(rotate(st.aux));
            row.target_acc = evaluate(st.params, data.target.x, data.target.y).accuracy;
            row.mean_sigma = ev.mean_sigma;
        } catch (const NonFiniteGradient& e) {
            result.diverged = true;
            result.error = e.what();
            break;
        } catch (const NonFiniteInput& e) {
            result.diverged = true;
            result.error = e.what();
            break;
        }
        result.metrics.push_back(row);
        if (on_metrics) on_metrics(row);
    }

    result.params = st.params;
    result.bank = st.bank;
    return result;
}

EvalResult evaluate(const ModelParams& params, const Eigen::MatrixXd& x,
                    const std::vector<int>& y) {
    if (x.rows() == 0) throw EmptyEvalSet("evaluation set is empty");
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw DimMismatch("evaluate: sample/label count mismatch");
    ForwardResult fwd = forward(params, x);
    EvalResult out;
    out.sigma = fwd.sigma;
    out.predictions.resize(static_cast<std::size_t>(x.rows()));
    int correct = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index best;
        fwd.logits.row(i).maxCoeff(&best);
        out.predictions[static_cast<std::size_t>(i)] = static_cast<int>(best);
        if (static_cast<int>(best) == y[static_cast<std::size_t>(i)]) ++correct;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
    return out;
}

}  // namespace t3
