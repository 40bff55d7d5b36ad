#include "eeo/optim.hpp"

#include <cmath>

#include "eeo/errors.hpp"

namespace eeo {

void adam_step(std::span<Parameter*> params, double lr, double weight_decay, int t,
               const AdamConfig& cfg) {
    if (t < 1) throw ValueError("adam_step requires t >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        if (!p->grad.same_shape(p->value)) {
            throw ShapeError("parameter gradient shape differs from value shape");
        }
        float* v = p->value.data();
        const float* g = p->grad.data();
        float* m1 = p->adam_m.data();
        float* m2 = p->adam_v.data();
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double m = cfg.beta1 * static_cast<double>(m1[i]) + (1.0 - cfg.beta1) * gi;
            const double s = cfg.beta2 * static_cast<double>(m2[i]) + (1.0 - cfg.beta2) * gi * gi;
            m1[i] = static_cast<float>(m);
            m2[i] = static_cast<float>(s);
            const double mhat = m / bc1;
            const double shat = s / bc2;
            double x = static_cast<double>(v[i]);
            x -= lr * (mhat / (std::sqrt(shat) + cfg.eps));
            x -= lr * weight_decay * static_cast<double>(v[i]);
            v[i] = static_cast<float>(x);
        }
    }
}

double cosine_annealing_lr(double lr_max, double lr_min, int epoch, int total) {
    if (total == 0) throw ValueError("cosine_annealing_lr: total epochs must be non-zero");
    if (epoch < 0 || epoch > total) {
        throw ValueError("cosine_annealing_lr: epoch " + std::to_string(epoch) +
                         " outside [0, " + std::to_string(total) + "]");
    }
    if (lr_min > lr_max) throw ValueError("cosine_annealing_lr: lr_min > lr_max");
    const double c = std::cos(3.14159265358979323846 * static_cast<double>(epoch) / static_cast<double>(total));
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + c);
}

void xavier_init(Parameter& param, int fan_in, int fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw ValueError("xavier_init requires fans >= 1");
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    float* v = param.value.data();
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        v[i] = static_cast<float>(rng.uniform(-a, a));
    }
}

void init_layer(Layer& layer, Rng& rng) {
    const LayerSpec& s = layer.spec();
    if (s.kind == LayerKind::Conv2d) {
        const int rf = s.kernel * s.kernel;
        xavier_init(layer.weight(), s.in_channels * rf, s.out_channels * rf, rng);
        layer.bias().value.fill(0.0f);
    } else if (s.kind == LayerKind::Dense) {
        xavier_init(layer.weight(), s.in_features, s.out_features, rng);
        layer.bias().value.fill(0.0f);
    }
}

} // namespace eeo
