#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eeo/image.hpp"
#include "eeo/rng.hpp"
#include "eeo/tensor.hpp"

namespace eeo {

enum class DistortionKind : std::uint32_t {
    Pristine = 0,
    Blur = 1,
    Noise = 2,
};

std::string distortion_kind_name(DistortionKind kind);
DistortionKind distortion_kind_from_name(const std::string& name);

std::span<const float> blur_levels();   // {1,2,3,4,5}
std::span<const float> noise_levels();  // {5,10,20,30,40}

/// Distortion kind + level (sigma); level 0 for pristine. Only grid levels
/// are accepted, never extrapolated.
struct DistortionSpec {
    DistortionKind kind = DistortionKind::Pristine;
    float level = 0.0f;
    std::uint64_t seed = 0;  // noise only

    static DistortionSpec pristine() { return {}; }
    static DistortionSpec blur(float sigma) { return {DistortionKind::Blur, sigma, 0}; }
    static DistortionSpec noise(float sigma, std::uint64_t seed) {
        return {DistortionKind::Noise, sigma, seed};
    }

    void validate() const;
};

/// Normalized Gaussian kernel on the centered integer grid, size 4*sigma+1.
Tensor gaussian_kernel(float sigma);

ImageU8 apply_blur(const ImageU8& img, float sigma);
ImageU8 apply_noise(const ImageU8& img, float sigma, std::uint64_t seed);
ImageU8 apply_distortion(const ImageU8& img, const DistortionSpec& spec);

/// Blur result before rounding/clamping, for oracle comparisons.
std::vector<double> blur_to_f64(const ImageU8& img, float sigma);

/// Distorts exactly half of an even-sized batch: victims chosen uniformly
/// without replacement, per-image level uniform over the kind's grid.
std::vector<ImageU8> augment_minibatch(std::span<const ImageU8> batch, DistortionKind kind, Rng& rng);

} // namespace eeo
