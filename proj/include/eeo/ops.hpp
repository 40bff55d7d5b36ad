#pragma once

#include <span>

#include "eeo/tensor.hpp"

namespace eeo {

/// Stable softmax over a [K] vector, K >= 2. Throws ValueError on non-finite input.
Tensor softmax(const Tensor& z);

/// Row-wise stable softmax over [N,K].
Tensor softmax_rows(const Tensor& z);

int argmax(std::span<const float> v);

/// Mean over the batch of -log softmax(logits)[label]. logits is [N,K];
/// labels must lie in [0, K). Returned in double for use as an optimization
/// and finite-difference target; callers wanting the spec's f32 just narrow.
double cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

/// dL/dlogits for the mean-reduced cross entropy: (softmax - onehot) / N.
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels);

} // namespace eeo
