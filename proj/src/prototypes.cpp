#include "t3/prototypes.hpp"

#include <cmath>

namespace t3 {

namespace {

constexpr double kKernelFloor = 1e-300;  // keeps entries inside (0, 1]

void check_domain_index(const PrototypeBank& bank, int domain) {
    if (domain < 0 || domain >= bank.num_domains)
        throw DimMismatch("domain index " + std::to_string(domain) + " out of range");
}

SimilarityTensor stack_slices(const std::vector<Eigen::MatrixXd>& slices) {
    const int c = static_cast<int>(slices.front().rows());
    const int n3 = static_cast<int>(slices.size());
    Tensor3 g(c, c, n3);
    for (int m = 0; m < n3; ++m)
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) g(i, j, m) = slices[static_cast<std::size_t>(m)](i, j);
    return SimilarityTensor{std::move(g)};
}

}  // namespace

PrototypeBank make_bank(int num_domains, int num_classes, int feat_dim, double alpha, double gamma) {
    if (num_domains < 2 || num_classes < 2 || feat_dim < 1)
        throw SpecInvalid("bank needs >= 2 domains, >= 2 classes and a positive feature dim");
    if (!(alpha > 0.0) || alpha > 1.0) throw SpecInvalid("alpha must be in (0, 1]");
    if (!(gamma > 0.0)) throw SpecInvalid("gamma must be positive");
    PrototypeBank bank;
    bank.num_domains = num_domains;
    bank.num_classes = num_classes;
    bank.feat_dim = feat_dim;
    bank.alpha = alpha;
    bank.gamma = gamma;
    bank.protos.assign(num_domains, Eigen::MatrixXd::Zero(num_classes, feat_dim));
    bank.valid.assign(num_domains, std::vector<std::uint8_t>(num_classes, 0));
    return bank;
}

std::optional<int> pseudo_label(const Eigen::VectorXd& probs, double tau) {
    if (probs.size() == 0) throw InvalidDistribution("empty probability vector");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (!(probs(i) >= 0.0) || probs(i) > 1.0 + 1e-9)
            throw InvalidDistribution("probability entry out of range");
        sum += probs(i);
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InvalidDistribution("probabilities do not sum to 1");

    int best = 0;
    for (Eigen::Index i = 1; i < probs.size(); ++i)
        if (probs(i) > probs(best)) best = static_cast<int>(i);
    if (probs(best) > tau) return best;
    return std::nullopt;
}

BatchPrototypes batch_prototypes(const std::vector<Eigen::MatrixXd>& features_per_domain,
                                 const std::vector<std::vector<int>>& labels_per_domain,
                                 int num_domains, int num_classes) {
    if (features_per_domain.size() != static_cast<std::size_t>(num_domains) ||
        labels_per_domain.size() != static_cast<std::size_t>(num_domains))
        throw DimMismatch("batch_prototypes: need one feature matrix and label list per domain");

    BatchPrototypes out;
    out.means.reserve(num_domains);
    out.present.assign(num_domains, std::vector<std::uint8_t>(num_classes, 0));
    out.counts.assign(num_domains, std::vector<int>(num_classes, 0));

    for (int m = 0; m < num_domains; ++m) {
        const Eigen::MatrixXd& feats = features_per_domain[m];
        const auto& labels = labels_per_domain[m];
        if (static_cast<std::size_t>(feats.rows()) != labels.size())
            throw DimMismatch("batch_prototypes: feature/label count mismatch in domain " +
                              std::to_string(m));
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(num_classes, feats.cols());
        for (Eigen::Index i = 0; i < feats.rows(); ++i) {
            const int c = labels[static_cast<std::size_t>(i)];
            if (c < 0) continue;  // unlabeled
            if (c >= num_classes) throw DimMismatch("label out of range");
            sum.row(c) += feats.row(i);
            out.counts[m][c] += 1;
        }
        for (int c = 0; c < num_classes; ++c) {
            if (out.counts[m][c] > 0) {
                sum.row(c) /= static_cast<double>(out.counts[m][c]);
                out.present[m][c] = 1;
            }
        }
        out.means.push_back(std::move(sum));
    }
    return out;
}

PrototypeBank ema_update(const PrototypeBank& bank, const BatchPrototypes& batch) {
    if (batch.means.size() != static_cast<std::size_t>(bank.num_domains))
        throw DimMismatch("ema_update: domain count mismatch");
    PrototypeBank out = bank;
    for (int m = 0; m < bank.num_domains; ++m) {
        if (batch.means[m].rows() != bank.num_classes || batch.means[m].cols() != bank.feat_dim)
            throw DimMismatch("ema_update: batch mean shape mismatch");
        for (int c = 0; c < bank.num_classes; ++c) {
            if (!batch.present[m][c]) continue;
            if (bank.valid[m][c]) {
                out.protos[m].row(c) =
                    bank.alpha * batch.means[m].row(c) + (1.0 - bank.alpha) * bank.protos[m].row(c);
            } else {
                out.protos[m].row(c) = batch.means[m].row(c);
                out.valid[m][c] = 1;
            }
        }
    }
    return out;
}

EffectiveProtos effective_prototypes(const PrototypeBank& bank, bool target_use_source_mean) {
    const int target = bank.num_domains - 1;
    EffectiveProtos eff;
    eff.protos.assign(bank.num_domains, Eigen::MatrixXd::Zero(bank.num_classes, bank.feat_dim));
    eff.sources.assign(bank.num_domains,
                       std::vector<std::vector<EffectiveProtos::Source>>(bank.num_classes));

    auto usable = [&](int m, int c) {
        if (target_use_source_mean && m == target) return false;
        return bank.valid[m][c] != 0;
    };

    for (int m = 0; m < bank.num_domains; ++m) {
        for (int c = 0; c < bank.num_classes; ++c) {
            if (usable(m, c)) {
                eff.protos[m].row(c) = bank.protos[m].row(c);
                eff.sources[m][c].push_back({m, 1.0});
                continue;
            }
            // Substitute the cross-domain mean of this class.
            std::vector<int> contributors;
            for (int other = 0; other < bank.num_domains; ++other)
                if (other != m && usable(other, c)) contributors.push_back(other);
            if (contributors.empty())
                throw InsufficientPrototypes("class " + std::to_string(c) +
                                             " has no valid prototype in any domain");
            const double w = 1.0 / static_cast<double>(contributors.size());
            for (int other : contributors) {
                eff.protos[m].row(c) += w * bank.protos[other].row(c);
                eff.sources[m][c].push_back({other, w});
            }
        }
    }
    return eff;
}

Eigen::MatrixXd similarity_from_protos(const Eigen::MatrixXd& protos, double gamma) {
    if (!(gamma > 0.0)) throw SpecInvalid("gamma must be positive");
    const int c = static_cast<int>(protos.rows());
    Eigen::MatrixXd g(c, c);
    const double inv = 1.0 / (2.0 * gamma * gamma);
    for (int i = 0; i < c; ++i) {
        g(i, i) = 1.0;
        for (int j = i + 1; j < c; ++j) {
            const double d2 = (protos.row(i) - protos.row(j)).squaredNorm();
            const double k = std::max(std::exp(-d2 * inv), kKernelFloor);
            g(i, j) = k;
            g(j, i) = k;
        }
    }
    return g;
}

Eigen::MatrixXd similarity_matrix(const PrototypeBank& bank, int domain) {
    check_domain_index(bank, domain);
    int valid_classes = 0;
    for (int c = 0; c < bank.num_classes; ++c)
        if (bank.valid[domain][c]) ++valid_classes;
    if (valid_classes < 2)
        throw InsufficientPrototypes("domain " + std::to_string(domain) + " has only " +
                                     std::to_string(valid_classes) + " valid classes");
    EffectiveProtos eff = effective_prototypes(bank, false);
    return similarity_from_protos(eff.protos[domain], bank.gamma);
}

SimilarityTensor assemble_tensor(const PrototypeBank& bank) {
    std::vector<Eigen::MatrixXd> slices;
    slices.reserve(bank.num_domains);
    for (int m = 0; m < bank.num_domains; ++m) slices.push_back(similarity_matrix(bank, m));
    return stack_slices(slices);
}

SimilarityTensor assemble_from_protos(const std::vector<Eigen::MatrixXd>& protos, double gamma) {
    std::vector<Eigen::MatrixXd> slices;
    slices.reserve(protos.size());
    for (const auto& p : protos) slices.push_back(similarity_from_protos(p, gamma));
    return stack_slices(slices);
}

std::vector<Eigen::MatrixXd> kernel_backward(const std::vector<Eigen::MatrixXd>& protos,
                                             const std::vector<Eigen::MatrixXd>& g_slices,
                                             const std::vector<Eigen::MatrixXd>& d_g_slices,
                                             double gamma) {
    const double inv_g2 = 1.0 / (gamma * gamma);
    std::vector<Eigen::MatrixXd> d_protos;
    d_protos.reserve(protos.size());
    for (std::size_t m = 0; m < protos.size(); ++m) {
        const Eigen::MatrixXd& f = protos[m];
        const Eigen::MatrixXd& g = g_slices[m];
        const Eigen::MatrixXd& dg = d_g_slices[m];
        const int c = static_cast<int>(f.rows());
        Eigen::MatrixXd df = Eigen::MatrixXd::Zero(c, f.cols());
        for (int i = 0; i < c; ++i) {
            for (int j = 0; j < c; ++j) {
                if (i == j) continue;  // diagonal is constant 1
                const double coeff = (dg(i, j) * g(i, j) + dg(j, i) * g(j, i)) * inv_g2;
                df.row(i) += coeff * (f.row(j) - f.row(i));
            }
        }
        d_protos.push_back(std::move(df));
    }
    return d_protos;
}

}  // namespace t3
