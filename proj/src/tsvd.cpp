#include "t3/tsvd.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace t3 {

namespace {

using cd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using CSliceMap = Eigen::Map<const Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using SliceMap = Eigen::Map<Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr double kNonZero = 1e-12;

// Rotate each shared singular pair so the first nonzero component of the left
// singular column is real and nonnegative; keeps u * s * v^H unchanged and
// makes factor comparisons deterministic.
void normalize_phases(MatC& u, MatC& v) {
    const int shared = static_cast<int>(std::min(u.cols(), v.cols()));
    for (int i = 0; i < u.cols(); ++i) {
        int j0 = -1;
        for (int j = 0; j < u.rows(); ++j)
            if (std::abs(u(j, i)) > kNonZero) { j0 = j; break; }
        if (j0 < 0) continue;
        cd phase = u(j0, i) / std::abs(u(j0, i));
        u.col(i) *= std::conj(phase);
        if (i < shared) v.col(i) *= std::conj(phase);
    }
    for (int i = shared; i < v.cols(); ++i) {
        int j0 = -1;
        for (int j = 0; j < v.rows(); ++j)
            if (std::abs(v(j, i)) > kNonZero) { j0 = j; break; }
        if (j0 < 0) continue;
        cd phase = v(j0, i) / std::abs(v(j0, i));
        v.col(i) *= std::conj(phase);
    }
}

void normalize_signs(MatR& u, MatR& v) {
    const int shared = static_cast<int>(std::min(u.cols(), v.cols()));
    for (int i = 0; i < u.cols(); ++i) {
        int j0 = -1;
        for (int j = 0; j < u.rows(); ++j)
            if (std::abs(u(j, i)) > kNonZero) { j0 = j; break; }
        if (j0 < 0 || u(j0, i) >= 0.0) continue;
        u.col(i) = -u.col(i);
        if (i < shared) v.col(i) = -v.col(i);
    }
    for (int i = shared; i < v.cols(); ++i) {
        int j0 = -1;
        for (int j = 0; j < v.rows(); ++j)
            if (std::abs(v(j, i)) > kNonZero) { j0 = j; break; }
        if (j0 >= 0 && v(j0, i) < 0.0) v.col(i) = -v.col(i);
    }
}

struct SliceSvd {
    MatC u;
    Eigen::VectorXd sigma;
    MatC v;
};

// Full SVD of Fourier slice k. Slices 0 and n3/2 of a real tensor's transform
// are exactly real, so they take the real path and yield real factors; that
// keeps the factor tensors conjugate-symmetric and their inverse FFT real.
SliceSvd full_slice_svd(const FourierTensor3& gf, int k, bool self_conjugate) {
    const int n1 = gf.n1(), n2 = gf.n2();
    CSliceMap slice(gf.slice_data(k), n1, n2);
    SliceSvd out;
    if (self_conjugate) {
        MatR real_slice = slice.real();
        Eigen::JacobiSVD<MatR> svd(real_slice, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.info() != Eigen::Success) throw SvdFailure("slice SVD did not converge", k);
        MatR u = svd.matrixU(), v = svd.matrixV();
        normalize_signs(u, v);
        out.u = u.cast<cd>();
        out.v = v.cast<cd>();
        out.sigma = svd.singularValues();
    } else {
        MatC complex_slice = slice;
        Eigen::JacobiSVD<MatC> svd(complex_slice, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.info() != Eigen::Success) throw SvdFailure("slice SVD did not converge", k);
        out.u = svd.matrixU();
        out.v = svd.matrixV();
        normalize_phases(out.u, out.v);
        out.sigma = svd.singularValues();
    }
    return out;
}

void write_slice(FourierTensor3& dst, int k, const MatC& m) {
    SliceMap(dst.slice_data(k), dst.n1(), dst.n2()) = m;
}

void write_conj_slice(FourierTensor3& dst, int k, const MatC& m) {
    SliceMap(dst.slice_data(k), dst.n1(), dst.n2()) = m.conjugate();
}

}  // namespace

TsvdFactors tsvd(const Tensor3& g) {
    const int n1 = g.n1(), n2 = g.n2(), n3 = g.n3();
    const FourierTensor3 gf = fft_mode3(g);
    FourierTensor3 uf(n1, n1, n3), sf(n1, n2, n3), vf(n2, n2, n3);

    const int half = n3 / 2;
    detail::parallel_for(half + 1, [&](int k) {
        const bool self_conj = (k == 0) || (n3 % 2 == 0 && k == half);
        SliceSvd s = full_slice_svd(gf, k, self_conj);
        MatC sigma_mat = MatC::Zero(n1, n2);
        for (int i = 0; i < s.sigma.size(); ++i) sigma_mat(i, i) = s.sigma(i);
        write_slice(uf, k, s.u);
        write_slice(sf, k, sigma_mat);
        write_slice(vf, k, s.v);
        if (!self_conj) {
            write_conj_slice(uf, n3 - k, s.u);
            write_conj_slice(sf, n3 - k, sigma_mat);
            write_conj_slice(vf, n3 - k, s.v);
        }
    });

    return TsvdFactors{ifft_mode3(uf), ifft_mode3(sf), ifft_mode3(vf)};
}

TensorRankVector tensor_rank(const Tensor3& g, double tol) {
    const FourierTensor3 gf = fft_mode3(g);
    const int n1 = g.n1(), n2 = g.n2(), n3 = g.n3();
    TensorRankVector out;
    out.ranks.assign(n3, 0);
    for (int k = 0; k < n3; ++k) {
        MatC slice = CSliceMap(gf.slice_data(k), n1, n2);
        Eigen::JacobiSVD<MatC> svd(slice);
        if (svd.info() != Eigen::Success) throw SvdFailure("slice SVD did not converge", k);
        const auto& sigma = svd.singularValues();
        if (sigma.size() == 0) continue;
        const double cutoff = tol * sigma(0);
        int rank = 0;
        for (int i = 0; i < sigma.size(); ++i)
            if (sigma(i) > cutoff) ++rank;
        out.ranks[k] = rank;
    }
    return out;
}

double tensor_nuclear_norm(const Tensor3& g) {
    const FourierTensor3 gf = fft_mode3(g);
    const int n1 = g.n1(), n2 = g.n2(), n3 = g.n3();
    std::vector<double> per_slice(n3, 0.0);
    detail::parallel_for(n3, [&](int k) {
        MatC slice = CSliceMap(gf.slice_data(k), n1, n2);
        Eigen::JacobiSVD<MatC> svd(slice);
        if (svd.info() != Eigen::Success) throw SvdFailure("slice SVD did not converge", k);
        per_slice[k] = svd.singularValues().sum();
    });
    double total = 0.0;
    for (double v : per_slice) total += v;
    return total;
}

Tensor3 shrinkage_prox(const Tensor3& g, double threshold) {
    if (threshold < 0.0)
        throw NegativeThreshold("shrinkage threshold must be >= 0, got " + std::to_string(threshold));
    const int n1 = g.n1(), n2 = g.n2(), n3 = g.n3();
    const FourierTensor3 gf = fft_mode3(g);
    FourierTensor3 af(n1, n2, n3);

    // The forward transform is unnormalized, so Parseval gives
    // ||a - g||_F^2 = (1/n3) ||a_f - g_f||_F^2; minimizing
    // threshold * TNN(a) + 0.5 ||a - g||_F^2 therefore shrinks the Fourier
    // singular values by threshold * n3.
    const double fourier_threshold = threshold * n3;

    const int half = n3 / 2;
    detail::parallel_for(half + 1, [&](int k) {
        const bool self_conj = (k == 0) || (n3 % 2 == 0 && k == half);
        CSliceMap slice(gf.slice_data(k), n1, n2);
        MatC shrunk;
        if (self_conj) {
            MatR real_slice = slice.real();
            Eigen::JacobiSVD<MatR> svd(real_slice, Eigen::ComputeThinU | Eigen::ComputeThinV);
            if (svd.info() != Eigen::Success) throw SvdFailure("slice SVD did not converge", k);
            Eigen::VectorXd sigma = (svd.singularValues().array() - fourier_threshold).cwiseMax(0.0);
            shrunk = (svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose()).cast<cd>();
        } else {
            MatC complex_slice = slice;
            Eigen::JacobiSVD<MatC> svd(complex_slice, Eigen::ComputeThinU | Eigen::ComputeThinV);
            if (svd.info() != Eigen::Success) throw SvdFailure("slice SVD did not converge", k);
            Eigen::VectorXd sigma = (svd.singularValues().array() - fourier_threshold).cwiseMax(0.0);
            shrunk = svd.matrixU() * sigma.asDiagonal() * svd.matrixV().adjoint();
        }
        write_slice(af, k, shrunk);
        if (!self_conj) write_conj_slice(af, n3 - k, shrunk);
    });

    return ifft_mode3(af);
}

Tensor3 rotated_prox(const Tensor3& g, double threshold) {
    return unrotate(shrinkage_prox(rotate(g), threshold));
}

}  // namespace t3
