#pragma once

#include <cstdint>
#include <vector>

#include "mvt/tensor.hpp"

namespace mvt::ops {

// Differentiable tensor operations. Each op validates shapes, computes the
// forward value through the active kernel set, and, when `tape` is non-null
// and any input requires grad, records a backward closure. Passing
// tape == nullptr runs pure inference.

TensorPtr matmul(GradTape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(GradTape* tape, const TensorPtr& a);

TensorPtr add(GradTape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(GradTape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(GradTape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(GradTape* tape, const TensorPtr& a, double s);

// X[m x n] + b[n] broadcast over rows.
TensorPtr add_rowvec(GradTape* tape, const TensorPtr& x, const TensorPtr& b);

TensorPtr relu(GradTape* tape, const TensorPtr& a);

// Numerically stable softmax along `axis` (0 or 1 for matrices, 0 for
// vectors). Every slice is max-subtracted before exponentiation.
TensorPtr softmax(GradTape* tape, const TensorPtr& a, std::size_t axis);

// Row-wise softmax over the positions `mask` marks valid (mask is row-major
// [rows x cols], nonzero = attend). Invalid positions get exactly 0 weight
// and never contribute to the forward value or the backward pass, which is
// what makes decoder causality bitwise. Each row needs >= 1 valid entry.
TensorPtr masked_softmax_rows(GradTape* tape, const TensorPtr& scores,
                              const std::vector<std::uint8_t>& mask);

// Per-row normalization to mean 0 / variance 1 (guarded by eps), then an
// affine map by gain and bias, both of length cols(x).
TensorPtr layer_norm(GradTape* tape, const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps);

// Gathers table rows by id; backward scatter-adds into the table gradient.
TensorPtr embedding_rows(GradTape* tape, const TensorPtr& table, const std::vector<int>& ids);

TensorPtr concat_cols(GradTape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_cols(GradTape* tape, const TensorPtr& a, std::size_t c0, std::size_t c1);

TensorPtr sum_all(GradTape* tape, const TensorPtr& a);

// Mean over rows flagged by `row_mask` of (logsumexp(row) - row[gold]).
// Throws DataError when no row is flagged (degenerate all-pad batch).
TensorPtr cross_entropy_rows(GradTape* tape, const TensorPtr& logits,
                             const std::vector<int>& gold,
                             const std::vector<std::uint8_t>& row_mask);

// Plain helpers (not taped).
std::vector<double> log_softmax_row(const double* row, std::size_t n);

}  // namespace mvt::ops
