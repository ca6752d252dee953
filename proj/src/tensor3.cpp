#include "t3/tensor3.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/Dense>

namespace t3 {

namespace {

using cd = std::complex<double>;

void check_dims_positive(int n1, int n2, int n3) {
    if (n1 <= 0 || n2 <= 0 || n3 <= 0)
        throw DimMismatch("tensor dims must be positive, got (" + std::to_string(n1) + ", " +
                          std::to_string(n2) + ", " + std::to_string(n3) + ")");
}

using CMatMap = Eigen::Map<const Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MatMap = Eigen::Map<Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

Tensor3::Tensor3(int n1, int n2, int n3) : n1_(n1), n2_(n2), n3_(n3) {
    check_dims_positive(n1, n2, n3);
    data_.assign(static_cast<std::size_t>(n1) * n2 * n3, 0.0);
}

Tensor3::Tensor3(int n1, int n2, int n3, std::vector<double> data)
    : n1_(n1), n2_(n2), n3_(n3), data_(std::move(data)) {
    check_dims_positive(n1, n2, n3);
    if (data_.size() != static_cast<std::size_t>(n1) * n2 * n3)
        throw DimMismatch("data length " + std::to_string(data_.size()) + " does not match dims");
    for (double v : data_)
        if (!std::isfinite(v)) throw NonFiniteInput("tensor entry is not finite");
}

FourierTensor3::FourierTensor3(int n1, int n2, int n3) : n1_(n1), n2_(n2), n3_(n3) {
    check_dims_positive(n1, n2, n3);
    data_.assign(static_cast<std::size_t>(n1) * n2 * n3, cd(0.0, 0.0));
}

FourierTensor3::FourierTensor3(int n1, int n2, int n3, std::vector<cd> data)
    : n1_(n1), n2_(n2), n3_(n3), data_(std::move(data)) {
    check_dims_positive(n1, n2, n3);
    if (data_.size() != static_cast<std::size_t>(n1) * n2 * n3)
        throw DimMismatch("data length does not match dims");
}

// ---------------------------------------------------------------------------
// thread cap
// ---------------------------------------------------------------------------

namespace {

std::atomic<int> g_max_threads{0};

int resolve_default_threads() {
    if (const char* env = std::getenv("T3_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
    int v = g_max_threads.load();
    return v > 0 ? v : resolve_default_threads();
}

namespace detail {

void parallel_for(int n, const std::function<void(int)>& fn) {
    int threads = std::min(max_threads(), n);
    // Small batches are not worth the thread spawn.
    if (threads <= 1 || n < 64) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Table entries for r > n/2 are exact bitwise conjugates of their mirror; the
// self-conjugate entries (r = 0 and r = n/2 for even n) carry an exact zero
// imaginary part. fft paths rely on this for bitwise reproducibility.
std::vector<cd> dft_twiddles(int n) {
    std::vector<cd> w(n);
    w[0] = cd(1.0, 0.0);
    for (int r = 1; 2 * r < n; ++r) {
        double theta = -2.0 * std::numbers::pi * r / n;
        w[r] = cd(std::cos(theta), std::sin(theta));
        w[n - r] = std::conj(w[r]);
    }
    if (n % 2 == 0 && n >= 2) w[n / 2] = cd(-1.0, 0.0);
    return w;
}

FourierTensor3 fft_mode3_path(const Tensor3& t, bool exploit_real_symmetry) {
    const int n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
    const std::vector<cd> w = dft_twiddles(n3);
    FourierTensor3 out(n1, n2, n3);
    const std::size_t stride = static_cast<std::size_t>(n1) * n2;

    // With the symmetry optimization only slices k <= n3/2 are transformed;
    // the rest are filled as conjugates. Adding +0.0 canonicalizes signed
    // zeros so both paths agree bitwise.
    const int k_top = exploit_real_symmetry ? n3 / 2 : n3 - 1;

    detail::parallel_for(n1 * n2, [&](int p) {
        // Tube (i, j) starts at flat offset p = i*n2 + j within slice 0.
        const double* in = t.data().data() + p;
        cd* o = out.data().data() + p;
        for (int k = 0; k <= k_top; ++k) {
            double re = 0.0, im = 0.0;
            for (int m = 0; m < n3; ++m) {
                const double x = in[m * stride];
                const cd& tw = w[(static_cast<long long>(m) * k) % n3];
                re += x * tw.real();
                im += x * tw.imag();
            }
            o[static_cast<std::size_t>(k) * stride] = cd(re + 0.0, im + 0.0);
        }
        for (int k = k_top + 1; k < n3; ++k) {
            const cd src = o[static_cast<std::size_t>(n3 - k) * stride];
            o[static_cast<std::size_t>(k) * stride] = cd(src.real() + 0.0, -src.imag() + 0.0);
        }
    });
    return out;
}

}  // namespace detail

FourierTensor3 fft_mode3(const Tensor3& t) { return detail::fft_mode3_path(t, true); }

Tensor3 ifft_mode3(const FourierTensor3& t) {
    const int n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
    const std::vector<cd> w = detail::dft_twiddles(n3);
    const std::size_t stride = static_cast<std::size_t>(n1) * n2;
    std::vector<double> out(t.size());
    std::vector<double> max_imag_per_tube(static_cast<std::size_t>(n1) * n2, 0.0);

    detail::parallel_for(n1 * n2, [&](int p) {
        const cd* in = t.data().data() + p;
        double max_imag = 0.0;
        for (int m = 0; m < n3; ++m) {
            cd acc(0.0, 0.0);
            for (int k = 0; k < n3; ++k) {
                // Inverse kernel e^{+2pi i mk/n3} is the conjugate of w.
                acc += in[static_cast<std::size_t>(k) * stride] *
                       std::conj(w[(static_cast<long long>(m) * k) % n3]);
            }
            acc /= static_cast<double>(n3);
            max_imag = std::max(max_imag, std::abs(acc.imag()));
            out[p + static_cast<std::size_t>(m) * stride] = acc.real();
        }
        max_imag_per_tube[p] = max_imag;
    });

    double max_imag = *std::max_element(max_imag_per_tube.begin(), max_imag_per_tube.end());
    if (max_imag >= 1e-6)
        throw ImaginaryResidueTooLarge("inverse transform left imaginary residue " +
                                       std::to_string(max_imag));
    return Tensor3(n1, n2, n3, std::move(out));
}

Tensor3 t_product(const Tensor3& a, const Tensor3& b) {
    if (a.n2() != b.n1() || a.n3() != b.n3())
        throw DimMismatch("t_product dims (" + std::to_string(a.n1()) + "," + std::to_string(a.n2()) +
                          "," + std::to_string(a.n3()) + ") x (" + std::to_string(b.n1()) + "," +
                          std::to_string(b.n2()) + "," + std::to_string(b.n3()) + ")");
    FourierTensor3 af = fft_mode3(a);
    FourierTensor3 bf = fft_mode3(b);
    FourierTensor3 cf(a.n1(), b.n2(), a.n3());
    detail::parallel_for(a.n3(), [&](int k) {
        CMatMap am(af.slice_data(k), a.n1(), a.n2());
        CMatMap bm(bf.slice_data(k), b.n1(), b.n2());
        MatMap cm(cf.slice_data(k), a.n1(), b.n2());
        cm.noalias() = am * bm;
    });
    return ifft_mode3(cf);
}

Tensor3 t_transpose(const Tensor3& a) {
    const int n1 = a.n1(), n2 = a.n2(), n3 = a.n3();
    Tensor3 out(n2, n1, n3);
    for (int k = 0; k < n3; ++k) {
        const int src = k == 0 ? 0 : n3 - k;
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) out(j, i, k) = a(i, j, src);
    }
    return out;
}

Tensor3 identity_tensor(int n, int n3) {
    if (n < 1 || n3 < 1) throw DimMismatch("identity_tensor dims must be >= 1");
    Tensor3 out(n, n, n3);
    for (int i = 0; i < n; ++i) out(i, i, 0) = 1.0;
    return out;
}

Tensor3 rotate(const Tensor3& a) {
    const int n1 = a.n1(), n2 = a.n2(), n3 = a.n3();
    Tensor3 out(n1, n3, n2);
    for (int k = 0; k < n3; ++k)
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) out(i, k, j) = a(i, j, k);
    return out;
}

Tensor3 unrotate(const Tensor3& a) {
    // Swapping modes 2 and 3 is an involution.
    return rotate(a);
}

double frobenius_norm_sq(const Tensor3& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return s;
}

Tensor3 sub(const Tensor3& a, const Tensor3& b) {
    if (!a.same_dims(b)) throw DimMismatch("sub: dims differ");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.data()[i] - b.data()[i];
    return Tensor3(a.n1(), a.n2(), a.n3(), std::move(d));
}

Tensor3 add(const Tensor3& a, const Tensor3& b) {
    if (!a.same_dims(b)) throw DimMismatch("add: dims differ");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.data()[i] + b.data()[i];
    return Tensor3(a.n1(), a.n2(), a.n3(), std::move(d));
}

Tensor3 scale(const Tensor3& a, double s) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.data()[i] * s;
    return Tensor3(a.n1(), a.n2(), a.n3(), std::move(d));
}

}  // namespace t3
