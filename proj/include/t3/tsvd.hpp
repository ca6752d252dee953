#pragma once

#include <vector>

#include "t3/tensor3.hpp"

namespace t3 {

/// Result of the tensor SVD g = u * s * t_transpose(v): u (n1 x n1 x n3) and
/// v (n2 x n2 x n3) are orthogonal, s (n1 x n2 x n3) is f-diagonal with its
/// Fourier-domain singular values nonnegative and sorted non-increasing.
struct TsvdFactors {
    Tensor3 u;
    Tensor3 s;
    Tensor3 v;
};

/// Per-Fourier-slice matrix ranks; entry k is the rank of slice k.
struct TensorRankVector {
    std::vector<int> ranks;
};

/// Tensor SVD via per-Fourier-slice matrix SVDs. Conjugate slice pairs share
/// one decomposition so the inverse transform is exactly real.
TsvdFactors tsvd(const Tensor3& g);

/// Ranks of the Fourier-domain frontal slices; singular values above
/// `tol` * max_singular_value count toward the rank.
TensorRankVector tensor_rank(const Tensor3& g, double tol = 1e-10);

/// Sum of the singular values of all Fourier-domain frontal slices.
double tensor_nuclear_norm(const Tensor3& g);

/// Proximal map of threshold * ||.||_TNN at g, i.e. the minimizer of
/// threshold * ||a||_TNN + 0.5 * ||a - g||_F^2: per Fourier slice, singular
/// values are soft-thresholded (by threshold * n3, the Parseval factor of
/// the unnormalized transform) and the slice reassembled. Operates on the
/// tensor as given; the caller performs any rotation.
Tensor3 shrinkage_prox(const Tensor3& g, double threshold);

/// unrotate(shrinkage_prox(rotate(g), threshold)) as a single call.
Tensor3 rotated_prox(const Tensor3& g, double threshold);

}  // namespace t3
