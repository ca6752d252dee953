#include <doctest.h>

#include <map>

#include "t3/synthdata.hpp"

using namespace t3;

namespace {

std::vector<DomainSpec> small_specs(int count = 60) {
    Eigen::MatrixXd centers = make_class_centers(3, 4, 1.0, 99);
    std::vector<DomainSpec> specs(3);
    for (int m = 0; m < 3; ++m) {
        specs[static_cast<std::size_t>(m)].angle = 0.3 * m;
        specs[static_cast<std::size_t>(m)].translation = Eigen::VectorXd::Zero(4);
        specs[static_cast<std::size_t>(m)].centers = centers;
        specs[static_cast<std::size_t>(m)].std_dev = 0.2;
        specs[static_cast<std::size_t>(m)].count = count;
    }
    return specs;
}

}  // namespace

TEST_CASE("spec validation") {
    auto specs = small_specs();
    SUBCASE("needs at least three domains") {
        CHECK_THROWS_AS(generate({specs[0], specs[1]}, 1), SpecInvalid);
    }
    SUBCASE("rejects non-positive std") {
        specs[0].std_dev = 0.0;
        CHECK_THROWS_AS(generate(specs, 1), SpecInvalid);
    }
    SUBCASE("rejects duplicate centers") {
        specs[1].centers.row(1) = specs[1].centers.row(0);
        CHECK_THROWS_AS(generate(specs, 1), SpecInvalid);
    }
    SUBCASE("rejects label noise outside [0,1)") {
        specs[0].label_noise = 1.0;
        CHECK_THROWS_AS(generate(specs, 1), SpecInvalid);
    }
}

TEST_CASE("generate is deterministic and balanced") {
    auto specs = small_specs(61);  // not divisible by 3
    DomainDataset a = generate(specs, 7);
    DomainDataset b = generate(specs, 7);

    SUBCASE("same seed gives identical bytes") {
        CHECK(a.sources[0].x == b.sources[0].x);
        CHECK(a.sources[1].x == b.sources[1].x);
        CHECK(a.target.x == b.target.x);
        CHECK(a.sources[0].y == b.sources[0].y);
    }
    SUBCASE("different seed gives different data") {
        DomainDataset c = generate(specs, 8);
        CHECK(a.sources[0].x != c.sources[0].x);
    }
    SUBCASE("labels are balanced within +/- 1") {
        for (const auto& domain : {a.sources[0], a.sources[1], a.target}) {
            std::map<int, int> counts;
            for (int y : domain.y) counts[y]++;
            int lo = 1 << 30, hi = 0;
            for (auto& [cls, n] : counts) {
                lo = std::min(lo, n);
                hi = std::max(hi, n);
            }
            CHECK(counts.size() == 3);
            CHECK(hi - lo <= 1);
        }
    }
    SUBCASE("target labels are retained for evaluation") {
        CHECK(a.target.y.size() == 61);
    }
}

TEST_CASE("label noise perturbs roughly the requested fraction") {
    auto specs = small_specs(3000);
    auto noisy = specs;
    noisy[0].label_noise = 0.3;
    DomainDataset clean = generate(specs, 11);
    DomainDataset with_noise = generate(noisy, 11);
    int flipped = 0;
    for (std::size_t i = 0; i < clean.sources[0].y.size(); ++i)
        if (clean.sources[0].y[i] != with_noise.sources[0].y[i]) ++flipped;
    const double rate = static_cast<double>(flipped) / 3000.0;
    CHECK(rate > 0.25);
    CHECK(rate < 0.35);
}

TEST_CASE("inject_noise") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(100, 4);

    SUBCASE("r = 0 leaves samples unchanged") {
        Eigen::MatrixXd y = inject_noise(x, 0.0, 5);
        CHECK((y - x).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("same seed gives identical noise") {
        Eigen::MatrixXd a = inject_noise(x, 0.7, 5);
        Eigen::MatrixXd b = inject_noise(x, 0.7, 5);
        CHECK(a == b);
    }
    SUBCASE("noise scales linearly with r for a fixed seed") {
        Eigen::MatrixXd a = inject_noise(x, 0.5, 5);
        Eigen::MatrixXd b = inject_noise(x, 1.0, 5);
        CHECK(((b - x) - 2.0 * (a - x)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("empirical std of the added noise is about r") {
        Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2500, 4);  // 10^4 draws
        const double r = 0.8;
        Eigen::MatrixXd noisy = inject_noise(big, r, 13);
        const double std = std::sqrt(noisy.array().square().mean());
        CHECK(std == doctest::Approx(r).epsilon(0.05));
    }
    SUBCASE("rejects negative r") { CHECK_THROWS_AS(inject_noise(x, -0.1, 5), SpecInvalid); }
}

TEST_CASE("make_class_centers puts points on the sphere") {
    Eigen::MatrixXd centers = make_class_centers(5, 8, 2.0, 17);
    for (int c = 0; c < 5; ++c) CHECK(centers.row(c).norm() == doctest::Approx(2.0).epsilon(1e-12));
    Eigen::MatrixXd again = make_class_centers(5, 8, 2.0, 17);
    CHECK(centers == again);
}
