#include "t3/synthdata.hpp"

#include <cmath>
#include <random>

namespace t3 {

namespace {

// Rotate consecutive coordinate pairs (0,1), (2,3), ... by `angle`; an odd
// trailing dimension is left unchanged.
Eigen::VectorXd rotate_pairs(const Eigen::VectorXd& v, double angle) {
    Eigen::VectorXd out = v;
    const double c = std::cos(angle), s = std::sin(angle);
    for (Eigen::Index i = 0; i + 1 < v.size(); i += 2) {
        out(i) = c * v(i) - s * v(i + 1);
        out(i + 1) = s * v(i) + c * v(i + 1);
    }
    return out;
}

DomainData generate_domain(const DomainSpec& spec, std::mt19937_64& rng) {
    const int c = static_cast<int>(spec.centers.rows());
    const int dim = static_cast<int>(spec.centers.cols());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    DomainData data;
    data.x.resize(spec.count, dim);
    data.y.resize(static_cast<std::size_t>(spec.count));

    std::vector<Eigen::VectorXd> shifted(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k)
        shifted[static_cast<std::size_t>(k)] =
            rotate_pairs(spec.centers.row(k).transpose(), spec.angle) + spec.translation;

    for (int i = 0; i < spec.count; ++i) {
        const int label = i % c;  // balanced within +/- 1
        Eigen::VectorXd sample = shifted[static_cast<std::size_t>(label)];
        for (int d = 0; d < dim; ++d) sample(d) += spec.std_dev * gauss(rng);
        int observed = label;
        if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise) {
            // Structured mislabeling: flips go to the next class, which
            // shifts decision boundaries instead of averaging out.
            observed = (label + 1) % c;
        }
        data.x.row(i) = sample.transpose();
        data.y[static_cast<std::size_t>(i)] = observed;
    }
    return data;
}

}  // namespace

void DomainSpec::validate() const {
    const int c = static_cast<int>(centers.rows());
    if (c < 2) throw SpecInvalid("need at least two class centers");
    if (translation.size() != centers.cols())
        throw SpecInvalid("translation dimension does not match centers");
    if (!(std_dev > 0.0)) throw SpecInvalid("cluster std must be positive");
    if (label_noise < 0.0 || label_noise >= 1.0) throw SpecInvalid("label noise must be in [0, 1)");
    if (count < c) throw SpecInvalid("sample count must be at least the class count");
    for (int i = 0; i < c; ++i)
        for (int j = i + 1; j < c; ++j)
            if ((centers.row(i) - centers.row(j)).norm() < 1e-12)
                throw SpecInvalid("class centers must be distinct");
}

DomainDataset generate(const std::vector<DomainSpec>& specs, std::uint64_t seed) {
    if (specs.size() < 3) throw SpecInvalid("need at least two sources plus a target");
    const int dim = static_cast<int>(specs.front().centers.cols());
    const int c = static_cast<int>(specs.front().centers.rows());
    for (const auto& spec : specs) {
        spec.validate();
        if (spec.centers.cols() != dim || spec.centers.rows() != c)
            throw SpecInvalid("all domains must share input_dim and class count");
    }

    std::mt19937_64 rng(seed);
    DomainDataset ds;
    ds.num_classes = c;
    ds.input_dim = dim;
    for (std::size_t m = 0; m + 1 < specs.size(); ++m)
        ds.sources.push_back(generate_domain(specs[m], rng));
    ds.target = generate_domain(specs.back(), rng);
    return ds;
}

Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& samples, double r, std::uint64_t seed) {
    if (r < 0.0) throw SpecInvalid("noise intensity must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd out = samples;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += r * gauss(rng);
    return out;
}

Eigen::MatrixXd make_class_centers(int num_classes, int input_dim, double radius,
                                   std::uint64_t seed) {
    if (num_classes < 2 || input_dim < 1) throw SpecInvalid("need >= 2 classes, >= 1 dim");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd centers(num_classes, input_dim);
    for (int k = 0; k < num_classes; ++k) {
        Eigen::VectorXd v(input_dim);
        for (int d = 0; d < input_dim; ++d) v(d) = gauss(rng);
        centers.row(k) = (radius / v.norm()) * v.transpose();
    }
    return centers;
}

}  // namespace t3
