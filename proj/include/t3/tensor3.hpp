#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "t3/errors.hpp"

namespace t3 {

/// Dense real 3-order tensor with slice-major layout: the frontal-slice
/// index k is outermost and each n1 x n2 slice is row-major, i.e.
/// offset(i, j, k) = k*n1*n2 + i*n2 + j.
class Tensor3 {
  public:
    Tensor3() = default;

    /// Zero tensor of the given dimensions.
    Tensor3(int n1, int n2, int n3);

    /// Takes ownership of `data` (length must be n1*n2*n3, all finite).
    Tensor3(int n1, int n2, int n3, std::vector<double> data);

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int n3() const { return n3_; }
    std::size_t size() const { return data_.size(); }

    double operator()(int i, int j, int k) const {
        return data_[static_cast<std::size_t>(k) * n1_ * n2_ + static_cast<std::size_t>(i) * n2_ + j];
    }
    double& operator()(int i, int j, int k) {
        return data_[static_cast<std::size_t>(k) * n1_ * n2_ + static_cast<std::size_t>(i) * n2_ + j];
    }

    const double* slice_data(int k) const { return data_.data() + static_cast<std::size_t>(k) * n1_ * n2_; }
    double* slice_data(int k) { return data_.data() + static_cast<std::size_t>(k) * n1_ * n2_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_dims(const Tensor3& other) const {
        return n1_ == other.n1_ && n2_ == other.n2_ && n3_ == other.n3_;
    }

  private:
    int n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<double> data_;
};

/// Complex counterpart of Tensor3, same layout. Produced by fft_mode3.
class FourierTensor3 {
  public:
    using cd = std::complex<double>;

    FourierTensor3() = default;
    FourierTensor3(int n1, int n2, int n3);
    FourierTensor3(int n1, int n2, int n3, std::vector<cd> data);

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int n3() const { return n3_; }
    std::size_t size() const { return data_.size(); }

    cd operator()(int i, int j, int k) const {
        return data_[static_cast<std::size_t>(k) * n1_ * n2_ + static_cast<std::size_t>(i) * n2_ + j];
    }
    cd& operator()(int i, int j, int k) {
        return data_[static_cast<std::size_t>(k) * n1_ * n2_ + static_cast<std::size_t>(i) * n2_ + j];
    }

    const cd* slice_data(int k) const { return data_.data() + static_cast<std::size_t>(k) * n1_ * n2_; }
    cd* slice_data(int k) { return data_.data() + static_cast<std::size_t>(k) * n1_ * n2_; }

    const std::vector<cd>& data() const { return data_; }
    std::vector<cd>& data() { return data_; }

  private:
    int n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<cd> data_;
};

/// Unnormalized forward DFT of every mode-3 tube: X[k] = sum_m x[m] e^{-2pi i mk/n3}.
FourierTensor3 fft_mode3(const Tensor3& t);

/// Inverse of fft_mode3 (carries the 1/n3 factor). Discards imaginary residue;
/// throws ImaginaryResidueTooLarge if max |imag| >= 1e-6.
Tensor3 ifft_mode3(const FourierTensor3& t);

/// t-product: per-tube circular convolution, computed as per-slice matrix
/// products in the Fourier domain. Requires a.n2 == b.n1 and a.n3 == b.n3.
Tensor3 t_product(const Tensor3& a, const Tensor3& b);

/// Transpose every frontal slice and reverse the order of slices 2..n3.
Tensor3 t_transpose(const Tensor3& a);

/// First frontal slice is the n x n identity, all other slices zero.
Tensor3 identity_tensor(int n, int n3);

/// Swap modes 2 and 3: result(i, k, j) = a(i, j, k), dims (n1, n3, n2).
Tensor3 rotate(const Tensor3& a);

/// Exact inverse of rotate (the swap is an involution).
Tensor3 unrotate(const Tensor3& a);

double frobenius_norm_sq(const Tensor3& a);
Tensor3 sub(const Tensor3& a, const Tensor3& b);
Tensor3 add(const Tensor3& a, const Tensor3& b);
Tensor3 scale(const Tensor3& a, double s);

/// Caps the slice/tube-level parallelism of tensor operations. 0 restores the
/// default (T3_THREADS env var, else hardware concurrency). Results never
/// depend on the thread count.
void set_max_threads(int n);
int max_threads();

namespace detail {

/// Forward mode-3 DFT with the real-input conjugate-symmetry optimization
/// switchable. Both paths produce bitwise-identical results; exposed so tests
/// can verify that.
FourierTensor3 fft_mode3_path(const Tensor3& t, bool exploit_real_symmetry);

/// Twiddle table w[r] = e^{-2pi i r/n} built so that w[(n-r) mod n] is the
/// exact bitwise conjugate of w[r].
std::vector<std::complex<double>> dft_twiddles(int n);

/// Runs fn(i) for i in [0, n); may distribute over threads. Each index must
/// write disjoint state.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace detail

}  // namespace t3
