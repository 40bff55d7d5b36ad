#pragma once

#include <span>

#include "eeo/layers.hpp"
#include "eeo/rng.hpp"

namespace eeo {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam step with decoupled weight decay.
/// t is the 1-based step count; non-trainable parameters are left untouched.
void adam_step(std::span<Parameter*> params, double lr, double weight_decay, int t,
               const AdamConfig& cfg = {});

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * epoch / total)) / 2.
double cosine_annealing_lr(double lr_max, double lr_min, int epoch, int total);

/// Uniform on [-a, a], a = sqrt(6 / (fan_in + fan_out)).
void xavier_init(Parameter& param, int fan_in, int fan_out, Rng& rng);

/// Xavier for weights (fans from the layer geometry), zero for biases.
void init_layer(Layer& layer, Rng& rng);

} // namespace eeo
