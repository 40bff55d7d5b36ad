// Shared finite-difference gradient-check harness for the unit tests and the
// acceptance suite.
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "eeo/layers.hpp"
#include "eeo/ops.hpp"
#include "eeo/optim.hpp"
#include "eeo/rng.hpp"

namespace eeo::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Forward pass that fingerprints every ReLU sign and MaxPool argmax decision.
// Central differences are only a valid derivative estimate while the
// perturbed evaluations stay on one smooth piece; elements whose pattern
// changes across the +-h pair get skipped.
inline std::pair<double, std::uint64_t> loss_and_pattern(Sequential& net, const Tensor& x,
                                                         std::span<const int> labels) {
    std::uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](std::uint64_t v) {
        hash ^= v;
        hash *= 1099511628211ULL;
    };
    Tensor h = x;
    for (int i = 0; i < net.size(); ++i) {
        const Layer& layer = net.layer(i);
        if (layer.spec().kind == LayerKind::ReLU) {
            for (std::size_t j = 0; j < h.size(); ++j) mix(h[j] > 0.0f ? j * 2 + 1 : j * 2);
        } else if (layer.spec().kind == LayerKind::MaxPool2d) {
            const int N = h.dim(0), C = h.dim(1), H = h.dim(2), W = h.dim(3);
            const int w = layer.spec().pool;
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int ho = 0; ho + w <= H; ho += w)
                        for (int wo = 0; wo + w <= W; wo += w) {
                            float best = -1e30f;
                            int best_idx = 0;
                            for (int dh = 0; dh < w; ++dh)
                                for (int dw = 0; dw < w; ++dw) {
                                    const float v = h.at4(n, c, ho + dh, wo + dw);
                                    if (v > best) {
                                        best = v;
                                        best_idx = dh * w + dw;
                                    }
                                }
                            mix(static_cast<std::uint64_t>(best_idx) + 17);
                        }
        }
        h = layer.forward(h);
    }
    return {cross_entropy_loss(h, labels), hash};
}

struct GradCheckStats {
    double max_rel_err = 0.0;  // over elements above the f32 noise floor
    int violations = 0;        // |fd-g| > max(rtol*max(|fd|,|g|), atol)
    int checked = 0;
    int skipped = 0;
};

inline GradCheckStats gradient_check(Sequential& net, const Tensor& x, std::span<const int> labels,
                                     double h = 1e-3) {
    net.zero_grads();
    const Tensor out = net.forward_cached(x);
    net.backward(cross_entropy_grad(out, labels));
    const auto [l0, pat_center] = loss_and_pattern(net, x, labels);
    (void)l0;

    GradCheckStats stats;
    for (Parameter* p : net.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const float orig = p->value[i];
            p->value[i] = static_cast<float>(orig + h);
            const auto [lp, pat_p] = loss_and_pattern(net, x, labels);
            p->value[i] = static_cast<float>(orig - h);
            const auto [lm, pat_m] = loss_and_pattern(net, x, labels);
            p->value[i] = orig;
            if (pat_p != pat_center || pat_m != pat_center) {
                ++stats.skipped;
                continue;
            }
            const double fd = (lp - lm) / (2.0 * h);
            const double g = static_cast<double>(p->grad[i]);
            // rtol 1e-3 with an atol floor: activations are stored in f32, so
            // below ~1e-4 the central difference is quantization noise.
            const double rtol = 1e-3, atol = 1e-4;
            const double diff = std::abs(fd - g);
            if (diff > std::max(rtol * std::max(std::abs(fd), std::abs(g)), atol)) {
                ++stats.violations;
            }
            if (diff > atol) {
                stats.max_rel_err =
                    std::max(stats.max_rel_err, diff / std::max(std::abs(fd), std::abs(g)));
            }
            ++stats.checked;
        }
    }
    return stats;
}

inline Sequential random_small_net(Rng& rng, int class_count) {
    const int C = 1 + static_cast<int>(rng.uniform_below(2));
    const int c1 = 2 + static_cast<int>(rng.uniform_below(3));
    const int c2 = 2 + static_cast<int>(rng.uniform_below(3));
    std::vector<LayerSpec> specs;
    specs.push_back(LayerSpec::conv2d(C, c1, 3, 1, 1));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::maxpool2d(2));
    specs.push_back(LayerSpec::conv2d(c1, c2, 3, 1, rng.uniform() < 0.5 ? 0 : 1));
    specs.push_back(LayerSpec::relu());
    if (rng.uniform() < 0.5) {
        specs.push_back(LayerSpec::global_avg_pool());
        specs.push_back(LayerSpec::dense(c2, class_count));
    } else {
        Shape s{1, C, 6, 6};
        for (const auto& sp : specs) s = sp.output_shape(s);
        specs.push_back(LayerSpec::flatten());
        specs.push_back(LayerSpec::dense(s[1] * s[2] * s[3], class_count));
    }
    Sequential net(specs);
    for (int i = 0; i < net.size(); ++i) {
        init_layer(net.layer(i), rng);
        // Jitter biases so preactivations are not centered on the ReLU kink.
        if (net.layer(i).spec().has_params()) {
            for (std::size_t j = 0; j < net.layer(i).bias().value.size(); ++j) {
                net.layer(i).bias().value[j] = static_cast<float>(rng.uniform(-0.05, 0.05));
            }
        }
    }
    return net;
}

inline Shape random_net_input_shape(const Sequential& net) {
    return {2, net.layer(0).spec().in_channels, 6, 6};
}

} // namespace eeo::testing
