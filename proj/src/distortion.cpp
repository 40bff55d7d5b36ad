#include "eeo/distortion.hpp"

#include <algorithm>
#include <cmath>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

const float kBlurLevels[] = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f};
const float kNoiseLevels[] = {5.0f, 10.0f, 20.0f, 30.0f, 40.0f};

bool on_grid(float level, std::span<const float> grid) {
    return std::find(grid.begin(), grid.end(), level) != grid.end();
}

// Symmetric reflection (edge-inclusive), folded until in range.
int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// Normalized 1-d Gaussian profile; the 2-d kernel is its outer product.
std::vector<double> gaussian_profile(float sigma) {
    const int k = static_cast<int>(std::lround(4.0 * sigma)) + 1;
    const int r = k / 2;
    std::vector<double> w(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        w[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
}

} // namespace

std::string distortion_kind_name(DistortionKind kind) {
    switch (kind) {
        case DistortionKind::Pristine: return "pristine";
        case DistortionKind::Blur: return "blur";
        case DistortionKind::Noise: return "noise";
    }
    return "unknown";
}

DistortionKind distortion_kind_from_name(const std::string& name) {
    if (name == "pristine") return DistortionKind::Pristine;
    if (name == "blur") return DistortionKind::Blur;
    if (name == "noise") return DistortionKind::Noise;
    throw ValueError("unknown distortion kind '" + name + "'");
}

std::span<const float> blur_levels() { return kBlurLevels; }
std::span<const float> noise_levels() { return kNoiseLevels; }

void DistortionSpec::validate() const {
    switch (kind) {
        case DistortionKind::Pristine:
            if (level != 0.0f) throw ValueError("pristine spec must have level 0");
            return;
        case DistortionKind::Blur:
            if (!on_grid(level, blur_levels())) {
                throw ValueError("blur level " + std::to_string(level) + " not in {1,2,3,4,5}");
            }
            return;
        case DistortionKind::Noise:
            if (!on_grid(level, noise_levels())) {
                throw ValueError("noise level " + std::to_string(level) + " not in {5,10,20,30,40}");
            }
            return;
    }
    throw ValueError("invalid distortion kind");
}

Tensor gaussian_kernel(float sigma) {
    if (sigma < 1.0f) throw ValueError("gaussian_kernel requires sigma >= 1");
    const auto w = gaussian_profile(sigma);
    const int k = static_cast<int>(w.size());
    Tensor kernel({k, k});
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            kernel[static_cast<std::size_t>(i * k + j)] =
                static_cast<float>(w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)]);
        }
    }
    return kernel;
}

std::vector<double> blur_to_f64(const ImageU8& img, float sigma) {
    const auto w = gaussian_profile(sigma);
    const int r = static_cast<int>(w.size()) / 2;
    const int H = img.height, W = img.width, C = img.channels;

    // Horizontal then vertical pass; reflect padding is per-axis, so the
    // separable passes equal the full 2-d convolution.
    std::vector<double> tmp(static_cast<std::size_t>(H) * W * C);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    acc += w[static_cast<std::size_t>(d + r)] *
                           static_cast<double>(img.at(y, reflect_index(x + d, W), c));
                }
                tmp[(static_cast<std::size_t>(y) * W + x) * C + c] = acc;
            }
        }
    }
    std::vector<double> out(tmp.size());
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    acc += w[static_cast<std::size_t>(d + r)] *
                           tmp[(static_cast<std::size_t>(reflect_index(y + d, H)) * W + x) * C + c];
                }
                out[(static_cast<std::size_t>(y) * W + x) * C + c] = acc;
            }
        }
    }
    return out;
}

ImageU8 apply_blur(const ImageU8& img, float sigma) {
    DistortionSpec::blur(sigma).validate();
    const auto blurred = blur_to_f64(img, sigma);
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < blurred.size(); ++i) {
        out.pixels[i] = static_cast<std::uint8_t>(
            std::lround(std::min(255.0, std::max(0.0, blurred[i]))));
    }
    return out;
}

ImageU8 apply_noise(const ImageU8& img, float sigma, std::uint64_t seed) {
    DistortionSpec::noise(sigma, seed).validate();
    Rng rng(seed);
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const double v = static_cast<double>(img.pixels[i]) + rng.normal(0.0, sigma);
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
    }
    return out;
}

ImageU8 apply_distortion(const ImageU8& img, const DistortionSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case DistortionKind::Pristine: return img;
        case DistortionKind::Blur: return apply_blur(img, spec.level);
        case DistortionKind::Noise: return apply_noise(img, spec.level, spec.seed);
    }
    throw ValueError("invalid distortion kind");
}

std::vector<ImageU8> augment_minibatch(std::span<const ImageU8> batch, DistortionKind kind, Rng& rng) {
    if (batch.size() % 2 != 0 || batch.empty()) {
        throw ValueError("augment_minibatch requires a non-empty even batch, got " +
                         std::to_string(batch.size()));
    }
    if (kind == DistortionKind::Pristine) {
        throw ValueError("augment_minibatch needs a non-pristine distortion kind");
    }
    const std::span<const float> grid =
        kind == DistortionKind::Blur ? blur_levels() : noise_levels();

    std::vector<std::size_t> order(batch.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<bool> victim(batch.size(), false);
    for (std::size_t i = 0; i < batch.size() / 2; ++i) victim[order[i]] = true;

    std::vector<ImageU8> out(batch.begin(), batch.end());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!victim[i]) continue;
        const float level = grid[static_cast<std::size_t>(rng.uniform_below(grid.size()))];
        if (kind == DistortionKind::Blur) {
            out[i] = apply_blur(batch[i], level);
        } else {
            out[i] = apply_noise(batch[i], level, rng.next_u64());
        }
    }
    return out;
}

} // namespace eeo
