#include "eeo/ops.hpp"

#include <cmath>
#include <vector>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

void softmax_row(const float* z, float* out, int K) {
    double zmax = -HUGE_VAL;
    for (int k = 0; k < K; ++k) {
        if (!std::isfinite(z[k])) throw ValueError("softmax input contains non-finite values");
        zmax = std::max(zmax, static_cast<double>(z[k]));
    }
    double denom = 0.0;
    std::vector<double> e(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        e[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(z[k]) - zmax);
        denom += e[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < K; ++k) {
        out[k] = static_cast<float>(e[static_cast<std::size_t>(k)] / denom);
    }
}

} // namespace

Tensor softmax(const Tensor& z) {
    if (z.rank() != 1 || z.dim(0) < 2) {
        throw ShapeError("softmax expects a [K] vector with K >= 2, got " + shape_str(z.shape()));
    }
    Tensor p(z.shape());
    softmax_row(z.data(), p.data(), z.dim(0));
    return p;
}

Tensor softmax_rows(const Tensor& z) {
    if (z.rank() != 2 || z.dim(1) < 2) {
        throw ShapeError("softmax_rows expects [N,K] with K >= 2, got " + shape_str(z.shape()));
    }
    Tensor p(z.shape());
    const int K = z.dim(1);
    for (int n = 0; n < z.dim(0); ++n) {
        softmax_row(z.data() + static_cast<std::size_t>(n) * K, p.data() + static_cast<std::size_t>(n) * K, K);
    }
    return p;
}

int argmax(std::span<const float> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

double cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy_loss expects [N,K] logits, got " + shape_str(logits.shape()));
    }
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) {
        throw ShapeError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(N));
    }
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const int y = labels[static_cast<std::size_t>(n)];
        if (y < 0 || y >= K) {
            throw ValueError("label " + std::to_string(y) + " out of range [0, " + std::to_string(K) + ")");
        }
        const float* z = logits.data() + static_cast<std::size_t>(n) * K;
        double zmax = -HUGE_VAL;
        for (int k = 0; k < K; ++k) {
            if (!std::isfinite(z[k])) throw ValueError("cross_entropy_loss: non-finite logit");
            zmax = std::max(zmax, static_cast<double>(z[k]));
        }
        double denom = 0.0;
        for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>(z[k]) - zmax);
        total += std::log(denom) - (static_cast<double>(z[y]) - zmax);
    }
    return total / static_cast<double>(N);
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels) {
    const Tensor p = softmax_rows(logits);
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) {
        throw ShapeError("cross_entropy_grad: labels/batch mismatch");
    }
    Tensor g(logits.shape());
    const float inv_n = 1.0f / static_cast<float>(N);
    for (int n = 0; n < N; ++n) {
        const int y = labels[static_cast<std::size_t>(n)];
        if (y < 0 || y >= K) {
            throw ValueError("label " + std::to_string(y) + " out of range [0, " + std::to_string(K) + ")");
        }
        for (int k = 0; k < K; ++k) {
            const float pk = p.at2(n, k);
            g.at2(n, k) = (pk - (k == y ? 1.0f : 0.0f)) * inv_n;
        }
    }
    return g;
}

} // namespace eeo
